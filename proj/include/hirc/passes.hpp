#ifndef HIRC_PASSES_HPP
#define HIRC_PASSES_HPP

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "hirc/ir.hpp"
#include "hirc/verifier.hpp"

namespace hirc {

struct PassReport {
  std::string pass;
  int removed = 0;   // ops deleted
  int rewritten = 0; // ops changed in place
  int merged = 0;    // ops folded into an existing equivalent
};

namespace detail {

// Program-order replacement map. Uses always appear after defs, so a
// single in-order walk that rewrites operands before inspecting an op
// sees fully-substituted inputs.
class Replacements {
public:
  void map(ValueId from, ValueId to) { repl[from] = to; }

  ValueId resolve(ValueId v) const {
    for (int guard = 0; guard < 1024; ++guard) {
      auto it = repl.find(v);
      if (it == repl.end())
        return v;
      v = it->second;
    }
    return v;
  }

  void rewrite(Operation &op) const {
    for (ValueId &v : op.operands)
      v = resolve(v);
  }

private:
  std::map<ValueId, ValueId> repl;
};

inline std::set<ValueId> usedValues(const Function &fn) {
  std::set<ValueId> used;
  walkOps(fn, [&](const Operation &op, auto &) {
    for (ValueId v : op.operands)
      used.insert(v);
    if (op.sched)
      used.insert(op.sched->base);
  });
  return used;
}

//===----------------------------------------------------------------------===//
// constprop
//===----------------------------------------------------------------------===//

class ConstProp {
public:
  ConstProp(Function &fn, PassReport &rep) : fn(fn), rep(rep) {}

  void run() {
    process(fn.body);
    removeDeadConstants();
  }

private:
  Function &fn;
  PassReport &rep;

  std::optional<int64_t> cv(ValueId v) const { return fn.constValue(v); }

  // Fold with the same wrap-at-width semantics the datapath has, so the
  // simulation is bit-identical before and after. Values are bit vectors:
  // the folded literal is the masked (non-negative) word, exactly what a
  // register of that width would hold and feed into wider consumers.
  std::optional<int64_t> evaluate(const Operation &op) const {
    int width = fn.val(op.results[0]).type.width;
    auto wrap = [&](uint64_t raw) {
      return (int64_t)maskToWidth(raw, width);
    };
    switch (op.op) {
    case Opcode::Add:
      return wrap((uint64_t)*cv(op.operands[0]) + (uint64_t)*cv(op.operands[1]));
    case Opcode::Sub:
      return wrap((uint64_t)*cv(op.operands[0]) - (uint64_t)*cv(op.operands[1]));
    case Opcode::Mult:
      return wrap((uint64_t)*cv(op.operands[0]) * (uint64_t)*cv(op.operands[1]));
    case Opcode::Select:
      return wrap(*cv(op.operands[0]) != 0 ? *cv(op.operands[1])
                                           : *cv(op.operands[2]));
    case Opcode::BitSlice: {
      uint64_t v = maskToWidth((uint64_t)*cv(op.operands[0]), 64);
      return (int64_t)maskToWidth(v >> op.lo, op.hi - op.lo + 1);
    }
    default:
      return std::nullopt;
    }
  }

  bool allConst(const Operation &op) const {
    for (ValueId v : op.operands)
      if (!cv(v))
        return false;
    return true;
  }

  // mult x,1 / mult x,0 / add x,0 / sub x,0. Only when the surviving
  // value has exactly the type the result had.
  ValueId identity(const Operation &op) const {
    if (op.operands.size() != 2)
      return kNoValue;
    ValueId x = op.operands[0];
    auto c = cv(op.operands[1]);
    if (!c && op.op != Opcode::Sub) { // add/mult commute
      x = op.operands[1];
      c = cv(op.operands[0]);
    }
    if (!c)
      return kNoValue;
    bool keepX = (op.op == Opcode::Add && *c == 0) ||
                 (op.op == Opcode::Sub && *c == 0 && x == op.operands[0]) ||
                 (op.op == Opcode::Mult && *c == 1);
    if (keepX &&
        (fn.val(x).type == fn.val(op.results[0]).type || cv(x)))
      return x;
    return kNoValue;
  }

  Replacements repl;

  void process(std::vector<Operation> &region) {
    std::vector<Operation> kept;
    for (Operation &op : region) {
      repl.rewrite(op);
      if (op.isLoop())
        process(op.body);
      bool foldable = (op.op == Opcode::Add || op.op == Opcode::Sub ||
                       op.op == Opcode::Mult || op.op == Opcode::Select ||
                       op.op == Opcode::BitSlice) &&
                      op.results.size() == 1;
      if (foldable && allConst(op)) {
        if (auto v = evaluate(op)) {
          repl.map(op.results[0], fn.addLiteralInterned(*v));
          ++rep.removed;
          continue;
        }
      }
      if (foldable && op.op == Opcode::Mult && !allConst(op)) {
        bool zero = false;
        for (ValueId v : op.operands)
          zero |= cv(v) && *cv(v) == 0;
        if (zero) {
          repl.map(op.results[0], fn.addLiteralInterned(0));
          ++rep.removed;
          continue;
        }
      }
      if (foldable) {
        ValueId x = identity(op);
        if (x != kNoValue) {
          repl.map(op.results[0], x);
          ++rep.removed;
          continue;
        }
      }
      kept.push_back(std::move(op));
    }
    region = std::move(kept);
  }

  void removeDeadConstants() {
    std::set<ValueId> used = usedValues(fn);
    removeDeadIn(fn.body, used);
  }

  void removeDeadIn(std::vector<Operation> &region,
                    const std::set<ValueId> &used) {
    std::vector<Operation> kept;
    for (Operation &op : region) {
      if (op.isLoop())
        removeDeadIn(op.body, used);
      if (op.op == Opcode::Constant && !used.count(op.results[0])) {
        ++rep.removed;
        continue;
      }
      kept.push_back(std::move(op));
    }
    region = std::move(kept);
  }
};

//===----------------------------------------------------------------------===//
// cse
//===----------------------------------------------------------------------===//

class Cse {
public:
  Cse(Function &fn, PassReport &rep) : fn(fn), rep(rep) {}
  void run() { process(fn.body); }

private:
  Function &fn;
  PassReport &rep;

  using Key = std::tuple<Opcode, ValueId, int64_t, std::vector<ValueId>,
                         int64_t, int, int, int>;

  std::optional<Key> keyOf(const Operation &op) const {
    // Pure, time-indexed ops only. Two ops are interchangeable iff they
    // compute the same function of the same operands at the same instant.
    switch (op.op) {
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mult:
    case Opcode::Select:
    case Opcode::BitSlice:
    case Opcode::MemRead:
      break;
    default:
      return std::nullopt;
    }
    if (!op.sched || op.results.size() != 1)
      return std::nullopt;
    CanonicalInstant ci = resolveTime(fn, *op.sched);
    if (!ci.valid)
      return std::nullopt;
    // Canonicalize const operands by value so literals and folded
    // constants compare equal.
    std::vector<ValueId> ops;
    for (ValueId v : op.operands) {
      auto c = fn.constValue(v);
      ops.push_back(c ? fn.addLiteralInterned(*c) : v);
    }
    return Key{op.op,    ci.root, ci.offset,
               ops,      op.amount, op.hi,
               op.lo,    fn.val(op.results[0]).type.width};
  }

  Replacements repl;

  // One map per region: values from sibling or inner regions are not in
  // scope elsewhere, so merging across regions could break dominance.
  void process(std::vector<Operation> &region) {
    std::map<Key, ValueId> seen;
    std::vector<Operation> kept;
    for (Operation &op : region) {
      repl.rewrite(op);
      if (op.isLoop())
        process(op.body);
      if (auto k = keyOf(op)) {
        auto it = seen.find(*k);
        if (it != seen.end()) {
          repl.map(op.results[0], it->second);
          ++rep.merged;
          continue;
        }
        seen.emplace(std::move(*k), op.results[0]);
      }
      kept.push_back(std::move(op));
    }
    region = std::move(kept);
  }
};

//===----------------------------------------------------------------------===//
// strength_reduce
//===----------------------------------------------------------------------===//

class StrengthReduce {
public:
  StrengthReduce(Function &fn, PassReport &rep) : fn(fn), rep(rep) {}
  void run() { process(fn.body, nullptr); }

private:
  Function &fn;
  PassReport &rep;

  void process(std::vector<Operation> &region, Operation *loop) {
    std::vector<Operation> kept;
    for (Operation &op : region) {
      if (op.isLoop()) {
        process(op.body, &op);
        kept.push_back(std::move(op));
        continue;
      }
      if (loop && reducible(op, *loop)) {
        ++rep.rewritten;
        continue;
      }
      kept.push_back(std::move(op));
    }
    region = std::move(kept);
  }

  // mult(iv, c) at the iteration instant becomes a counter that steps by
  // step*c: one adder of counter width replaces a full multiplier.
  bool reducible(const Operation &op, Operation &loop) {
    if (op.op != Opcode::Mult || loop.op != Opcode::For || !op.sched)
      return false;
    CanonicalInstant ci = resolveTime(fn, *op.sched);
    if (!ci.valid || ci.root != loop.iterTime || ci.offset != 0)
      return false;
    ValueId iv = loop.inductionVar, other = kNoValue;
    if (op.operands[0] == iv)
      other = op.operands[1];
    else if (op.operands[1] == iv)
      other = op.operands[0];
    if (other == kNoValue)
      return false;
    auto c = fn.constValue(other);
    auto lb = fn.constValue(loop.operands[0]);
    auto st = fn.constValue(loop.operands[2]);
    if (!c || !lb || !st)
      return false;
    LoopCounter counter;
    counter.result = op.results[0];
    counter.init = *lb * *c;
    counter.step = *st * *c;
    counter.width = fn.val(op.results[0]).type.width;
    loop.counters.push_back(counter);
    return true;
  }
};

//===----------------------------------------------------------------------===//
// narrow_precision
//===----------------------------------------------------------------------===//

inline int bitsFor(int64_t v) {
  if (v <= 0)
    return 1;
  int n = 0;
  while (v) {
    ++n;
    v >>= 1;
  }
  return n;
}

class NarrowPrecision {
public:
  NarrowPrecision(Function &fn, PassReport &rep) : fn(fn), rep(rep) {}

  void run() {
    walkOpsMut(fn.body, [&](Operation &op) {
      if (op.op != Opcode::For)
        return;
      auto lb = fn.constValue(op.operands[0]);
      auto ub = fn.constValue(op.operands[1]);
      auto st = fn.constValue(op.operands[2]);
      if (!lb || !ub || !st || *lb < 0 || *ub < 0 || *st <= 0)
        return;
      // The counter register must hold the bound and the first value
      // that fails the guard (lb + trip*step).
      int64_t trip = *ub > *lb ? (*ub - *lb + *st - 1) / *st : 0;
      int64_t maxVal = std::max(*ub, *lb + trip * *st);
      int width = bitsFor(maxVal);
      Type &ivType = fn.val(op.inductionVar).type;
      if (ivType.isInt() && width < ivType.width) {
        ivType.width = width;
        ++rep.rewritten;
      }
      for (auto &c : op.counters) {
        int64_t cmax = std::max(c.init, c.init + trip * c.step);
        int w = bitsFor(cmax);
        if (w < c.width) {
          c.width = w;
          ++rep.rewritten;
        }
      }
    });
    // A delay produces exactly its operand's type, so narrowed widths
    // propagate through delay chains (program order covers transitive
    // chains in one sweep).
    walkOpsMut(fn.body, [&](Operation &op) {
      if (op.op != Opcode::Delay)
        return;
      const Type &src = fn.val(op.operands[0]).type;
      if (src.isInt() && fn.val(op.results[0]).type.isInt())
        fn.val(op.results[0]).type = src;
    });
  }

private:
  Function &fn;
  PassReport &rep;
};

//===----------------------------------------------------------------------===//
// dedup_time_and_delays
//===----------------------------------------------------------------------===//

class DedupTimeAndDelays {
public:
  DedupTimeAndDelays(Function &fn, PassReport &rep) : fn(fn), rep(rep) {}

  void run() {
    dedupTimeDefs(fn.body);
    chainDelays(fn.body);
  }

private:
  Function &fn;
  PassReport &rep;

  void dedupTimeDefs(std::vector<Operation> &region) {
    // Phase 1: find equivalent derived time variables per region.
    std::map<ValueId, ValueId> merge;
    collectTimeMerges(region, merge);
    if (merge.empty())
      return;
    // Phase 2: retarget every schedule and derived-parent link.
    walkOpsMut(fn.body, [&](Operation &op) {
      if (op.sched) {
        auto it = merge.find(op.sched->base);
        if (it != merge.end())
          op.sched->base = it->second;
      }
    });
    for (auto &v : fn.values) {
      if (!v.type.isTime())
        continue;
      auto it = merge.find(v.time.parent);
      if (it != merge.end())
        v.time.parent = it->second;
    }
    // Phase 3: drop the now-unreferenced definitions.
    eraseMergedTimeDefs(fn.body, merge);
  }

  void collectTimeMerges(std::vector<Operation> &region,
                         std::map<ValueId, ValueId> &merge) {
    std::map<std::pair<ValueId, int64_t>, ValueId> seen;
    for (Operation &op : region) {
      if (op.isLoop())
        collectTimeMerges(op.body, merge);
      if (op.op != Opcode::TimeDef)
        continue;
      const TimeVarInfo &tv = fn.val(op.results[0]).time;
      CanonicalInstant ci = resolveTime(fn, {tv.parent, tv.parentOffset});
      if (!ci.valid)
        continue;
      auto [it, inserted] =
          seen.emplace(std::make_pair(ci.root, ci.offset), op.results[0]);
      if (!inserted) {
        merge[op.results[0]] = it->second;
        ++rep.merged;
      }
    }
  }

  void eraseMergedTimeDefs(std::vector<Operation> &region,
                           const std::map<ValueId, ValueId> &merge) {
    std::vector<Operation> kept;
    for (Operation &op : region) {
      if (op.isLoop())
        eraseMergedTimeDefs(op.body, merge);
      if (op.op == Opcode::TimeDef && merge.count(op.results[0]))
        continue;
      kept.push_back(std::move(op));
    }
    region = std::move(kept);
  }

  // Delays of one source anchored at one instant form a single shift
  // chain: delay-by-5 taps three registers beyond the delay-by-2 tap.
  void chainDelays(std::vector<Operation> &region) {
    std::map<std::pair<ValueId, std::pair<ValueId, int64_t>>,
             std::vector<Operation *>>
        groups;
    for (Operation &op : region) {
      if (op.isLoop())
        chainDelays(op.body);
      if (op.op != Opcode::Delay || !op.sched)
        continue;
      CanonicalInstant ci = resolveTime(fn, *op.sched);
      if (!ci.valid)
        continue;
      groups[{op.operands[0], {ci.root, ci.offset}}].push_back(&op);
    }
    for (auto &[key, ops] : groups) {
      if (ops.size() < 2)
        continue;
      std::sort(ops.begin(), ops.end(),
                [](const Operation *a, const Operation *b) {
                  return a->amount < b->amount;
                });
      std::vector<int64_t> amt;
      for (const Operation *op : ops)
        amt.push_back(op->amount);
      for (size_t i = 1; i < ops.size(); ++i) {
        // Tap i consumes tap i-1's output (valid at base + amt[i-1]) and
        // only adds the remaining amt[i] - amt[i-1] registers.
        Operation *cur = ops[i];
        cur->operands[0] = ops[i - 1]->results[0];
        cur->sched->offset += amt[i - 1];
        cur->amount = amt[i] - amt[i - 1];
        ++rep.rewritten;
      }
    }
  }
};

} // namespace detail

//===----------------------------------------------------------------------===//
// Pipeline driver
//===----------------------------------------------------------------------===//

inline const std::vector<std::string> &allPassNames() {
  static const std::vector<std::string> names = {
      "constprop", "cse", "strength_reduce", "narrow_precision",
      "dedup_time_and_delays"};
  return names;
}

inline bool runPass(Module &mod, const std::string &name, PassReport &rep) {
  rep.pass = name;
  for (auto &fn : mod.functions) {
    if (fn.isExtern)
      continue;
    if (name == "constprop")
      detail::ConstProp(fn, rep).run();
    else if (name == "cse")
      detail::Cse(fn, rep).run();
    else if (name == "strength_reduce")
      detail::StrengthReduce(fn, rep).run();
    else if (name == "narrow_precision")
      detail::NarrowPrecision(fn, rep).run();
    else if (name == "dedup_time_and_delays")
      detail::DedupTimeAndDelays(fn, rep).run();
    else
      return false;
  }
  return true;
}

// Runs the requested passes, then re-verifies. A pass that introduces a
// structural or timing error aborts the pipeline with an internal error
// diagnostic; the transformed module is still returned for inspection.
inline std::vector<PassReport> runPipeline(Module &mod,
                                           const std::vector<std::string> &passes,
                                           std::vector<Diagnostic> &diags) {
  std::vector<PassReport> reports;
  for (const std::string &name : passes) {
    PassReport rep;
    if (!runPass(mod, name, rep)) {
      diags.push_back({Severity::Error, "unknown-pass", {},
                       "unknown pass '" + name + "'", {}});
      return reports;
    }
    reports.push_back(rep);
  }
  std::vector<Diagnostic> post = validateStructure(mod);
  auto v = verify(mod);
  post.insert(post.end(), v.begin(), v.end());
  if (hasErrors(post)) {
    diags.push_back({Severity::Error, "pass-invariant", {},
                     "optimization pipeline produced an invalid module",
                     {}});
    diags.insert(diags.end(), post.begin(), post.end());
  }
  return reports;
}

} // namespace hirc

#endif
