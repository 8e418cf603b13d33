#ifndef HIRC_VERIFIER_HPP
#define HIRC_VERIFIER_HPP

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hirc/ir.hpp"
#include "hirc/validate.hpp"

namespace hirc {

//===----------------------------------------------------------------------===//
// Loop timing analysis
//===----------------------------------------------------------------------===//

// Static timing facts about one loop. All offsets are cycles. A loop
// scheduled at instant T runs its first iteration at T+1; iteration k
// starts at T+1+k*II; the completion time fires at
// T + 1 + (N-1)*II + bodyLatency (T+1 when N == 0).
struct LoopTiming {
  bool iiConst = false;
  int64_t ii = 0;
  bool tripConst = false;
  int64_t trip = 0;
  bool latencyConst = false;
  int64_t bodyLatency = 0; // max op end offset relative to the iteration time
  bool completionConst = false;
  int64_t completion = 0; // completion offset relative to the loop's instant
};

// Validity coordinate of one SSA value. `anytime` values (constants,
// memrefs, unresolvable) never participate in timing checks.
struct Validity {
  bool anytime = true;
  CanonicalInstant at;
};

// Per-function maps shared by the verifier, the backend and the simulator.
class FnAnalysis {
public:
  FnAnalysis(const Module &mod, const Function &fn) : mod(mod), fn(fn) {
    build();
  }

  const Module &mod;
  const Function &fn;
  std::map<ValueId, const Operation *> producer; // result -> defining op
  std::map<ValueId, int> resultIdx;
  std::map<ValueId, const Operation *> iterLoop;  // iter time var -> loop
  std::map<ValueId, const Operation *> complLoop; // completion var -> loop
  std::map<const Operation *, LoopTiming> timing;
  std::map<ValueId, Validity> validity;

  const LoopTiming &loopTiming(const Operation &loop) const {
    static const LoopTiming none;
    auto it = timing.find(&loop);
    return it == timing.end() ? none : it->second;
  }

  Validity validityOf(ValueId v) const {
    auto it = validity.find(v);
    return it == validity.end() ? Validity{} : it->second;
  }

  // Rewrites statically-known loop completion roots into their parent
  // coordinates, e.g. (loop done, +2) -> (function entry, +34).
  CanonicalInstant deepResolve(CanonicalInstant ci) const {
    for (int guard = 0; guard < 1024 && ci.valid; ++guard) {
      const TimeVarInfo &tv = fn.val(ci.root).time;
      if (tv.origin != TimeOrigin::LoopCompletion)
        return ci;
      auto it = complLoop.find(ci.root);
      if (it == complLoop.end())
        return ci;
      const Operation *loop = it->second;
      const LoopTiming &lt = loopTiming(*loop);
      if (!lt.completionConst || !loop->sched)
        return ci;
      CanonicalInstant s = resolveTime(fn, *loop->sched);
      if (!s.valid)
        return ci;
      ci.root = s.root;
      ci.offset += s.offset + lt.completion;
    }
    return ci;
  }

  // Earliest cycle the instant can denote, expressed against the outermost
  // root reachable by replacing iteration roots with their loop's first
  // iteration. Invalid result means "cannot bound statically".
  CanonicalInstant lowerBound(CanonicalInstant ci) const {
    ci = deepResolve(ci);
    for (int guard = 0; guard < 1024 && ci.valid; ++guard) {
      const TimeVarInfo &tv = fn.val(ci.root).time;
      if (tv.origin == TimeOrigin::LoopIteration) {
        auto it = iterLoop.find(ci.root);
        if (it == iterLoop.end() || !it->second->sched)
          return {};
        CanonicalInstant s =
            deepResolve(resolveTime(fn, *it->second->sched));
        if (!s.valid)
          return {};
        ci.root = s.root;
        ci.offset += s.offset + 1;
        continue;
      }
      return ci;
    }
    return {};
  }

  bool isIterationRoot(ValueId v) const {
    return v != kNoValue &&
           fn.val(v).time.origin == TimeOrigin::LoopIteration;
  }

private:
  void build() {
    walkOps(fn, [&](const Operation &op, auto &) {
      for (size_t i = 0; i < op.results.size(); ++i) {
        producer[op.results[i]] = &op;
        resultIdx[op.results[i]] = (int)i;
      }
      if (op.isLoop()) {
        if (op.inductionVar != kNoValue)
          producer[op.inductionVar] = &op;
        if (op.iterTime != kNoValue)
          iterLoop[op.iterTime] = &op;
        if (op.completionTime != kNoValue)
          complLoop[op.completionTime] = &op;
        for (auto &c : op.counters)
          producer[c.result] = &op;
      }
    });
    analyzeRegion(fn.body);
    buildValidity();
  }

  // Innermost loops first: a loop's latency depends on its children.
  void analyzeRegion(const std::vector<Operation> &region) {
    for (auto &op : region) {
      if (op.isLoop()) {
        analyzeRegion(op.body);
        analyzeLoop(op);
      }
    }
  }

  void analyzeLoop(const Operation &op) {
    LoopTiming lt;
    // Initiation interval from the yield anchor.
    for (auto &b : op.body) {
      if (b.op != Opcode::Yield || !b.sched)
        continue;
      CanonicalInstant y = resolveTime(fn, *b.sched);
      if (y.valid && y.root == op.iterTime) {
        lt.iiConst = true;
        lt.ii = y.offset;
      }
    }
    // Trip count from constant bounds.
    auto lb = fn.constValue(op.operands[0]);
    auto ub = fn.constValue(op.operands[1]);
    auto st = fn.constValue(op.operands[2]);
    if (lb && ub && st && *st > 0) {
      lt.tripConst = true;
      lt.trip = *ub > *lb ? (*ub - *lb + *st - 1) / *st : 0;
    }
    // Static body latency: max end cycle of any scheduled op, yield excluded.
    lt.latencyConst = true;
    int64_t lat = 0;
    for (auto &b : op.body) {
      if (b.op == Opcode::Yield || !b.sched)
        continue;
      CanonicalInstant s = resolveTime(fn, *b.sched);
      if (!s.valid || s.root != op.iterTime) {
        // Anchored outside the iteration; does not bound the iteration.
        continue;
      }
      int64_t end = s.offset;
      if (b.isLoop()) {
        const LoopTiming &child = loopTiming(b);
        if (!child.completionConst) {
          lt.latencyConst = false;
          continue;
        }
        end += child.completion;
      } else {
        end += latencyOf(fn, b, &mod);
      }
      lat = std::max(lat, end);
    }
    lt.bodyLatency = lat;
    if (lt.iiConst && lt.tripConst && lt.latencyConst) {
      lt.completionConst = true;
      lt.completion =
          lt.trip == 0 ? 1 : 1 + (lt.trip - 1) * lt.ii + lt.bodyLatency;
    }
    timing[&op] = lt;
  }

  void setValidity(ValueId v, CanonicalInstant ci) {
    Validity vd;
    vd.anytime = !ci.valid;
    vd.at = ci;
    validity[v] = vd;
  }

  void buildValidity() {
    for (auto &p : fn.params) {
      const Type &t = fn.val(p.value).type;
      if (t.isPrimitive())
        setValidity(p.value, {fn.rootTime, p.delay, true});
    }
    walkOps(fn, [&](const Operation &op, auto &) {
      if (op.isLoop()) {
        if (op.op == Opcode::For && op.inductionVar != kNoValue)
          setValidity(op.inductionVar, {op.iterTime, 0, true});
        for (auto &c : op.counters)
          setValidity(c.result, {op.iterTime, 0, true});
        return;
      }
      if (!op.sched)
        return; // constants / allocs are anytime
      CanonicalInstant s = resolveTime(fn, *op.sched);
      if (!s.valid)
        return;
      if (op.op == Opcode::Call) {
        const Function *callee = mod.find(op.callee);
        for (size_t i = 0; i < op.results.size(); ++i) {
          int64_t d =
              callee && i < callee->results.size() ? callee->results[i].delay
                                                   : 0;
          setValidity(op.results[i], {s.root, s.offset + d, true});
        }
        return;
      }
      int64_t lat = latencyOf(fn, op, &mod);
      for (ValueId r : op.results)
        setValidity(r, {s.root, s.offset + lat, true});
    });
  }
};

//===----------------------------------------------------------------------===//
// Verifier
//===----------------------------------------------------------------------===//

namespace detail {

class Verifier {
public:
  Verifier(const Module &mod, const Function &fn)
      : mod(mod), fn(fn), an(mod, fn) {}

  std::vector<Diagnostic> run() {
    checkValueTiming();
    checkLoopStaleness();
    checkCallAlignment();
    checkMemrefConflicts();
    return diags;
  }

private:
  const Module &mod;
  const Function &fn;
  FnAnalysis an;
  std::vector<Diagnostic> diags;
  std::set<std::pair<const Operation *, std::string>> reported;

  void emit(Severity sev, const std::string &cls, const Operation &op,
            const std::string &msg) {
    // One diagnostic per (op, class): an op with several misaligned
    // operands is one mistake, not many.
    if (!reported.insert({&op, cls}).second)
      return;
    diags.push_back({sev, cls, op.loc, msg, {}});
  }

  bool isCallResult(ValueId v) const {
    auto it = an.producer.find(v);
    return it != an.producer.end() && it->second->op == Opcode::Call;
  }

  static bool timingChecked(const Operation &op) {
    switch (op.op) {
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mult:
    case Opcode::BitSlice:
    case Opcode::Select:
    case Opcode::MemRead:
    case Opcode::MemWrite:
    case Opcode::Delay:
    case Opcode::For:
    case Opcode::UnrollFor:
      return true;
    default:
      return false;
    }
  }

  std::string desc(ValueId v) const { return "%" + fn.val(v).name; }

  // Can `use` rely on a value valid at `v`? Assumes both already resolved.
  // Returns: 0 ok, 1 provably wrong, 2 handled elsewhere (staleness).
  int classifyUse(CanonicalInstant v, CanonicalInstant use) const {
    CanonicalInstant vd = an.deepResolve(v), ud = an.deepResolve(use);
    if (vd.root == ud.root) {
      if (ud.offset == vd.offset)
        return 0;
      if (ud.offset < vd.offset)
        return 1; // used before it exists
      return an.isIterationRoot(vd.root) ? 2 : 0; // stable once written
    }
    // Different roots: stable values may be consumed anywhere provably at
    // or after their validity; iteration values may not escape (scoping
    // already prevents that) but may flow into nested loops.
    CanonicalInstant lb = an.lowerBound(ud);
    CanonicalInstant vlb = an.isIterationRoot(vd.root) ? an.lowerBound(vd) : vd;
    if (lb.valid && vlb.valid && lb.root == vlb.root)
      return lb.offset >= vlb.offset ? 0 : 1;
    return 0; // not statically comparable; give the benefit of the doubt
  }

  void checkValueTiming() {
    walkOps(fn, [&](const Operation &op, auto &) {
      if (!timingChecked(op) || !op.sched)
        return;
      CanonicalInstant use = resolveTime(fn, *op.sched);
      if (!use.valid)
        return;
      for (ValueId v : op.operands) {
        const Type &t = fn.val(v).type;
        if (!t.isPrimitive())
          continue;
        if (isCallResult(v))
          continue; // pipeline alignment check owns call results
        Validity vd = an.validityOf(v);
        if (vd.anytime)
          continue;
        if (classifyUse(vd.at, use) == 1)
          emit(Severity::Error, "timing-mismatch", op,
               desc(v) + " is valid at a different instant than " +
                   opcodeName(op.op) + " consumes it; add a delay or " +
                   "reschedule the consumer");
      }
    });
  }

  void checkLoopStaleness() {
    walkOps(fn, [&](const Operation &op, auto &) {
      if (!timingChecked(op) || !op.sched)
        return;
      CanonicalInstant use = resolveTime(fn, *op.sched);
      if (!use.valid)
        return;
      for (ValueId v : op.operands) {
        if (!fn.val(v).type.isPrimitive() || isCallResult(v))
          continue;
        Validity vd = an.validityOf(v);
        if (vd.anytime || !vd.at.valid)
          continue;
        if (vd.at.root != use.root || !an.isIterationRoot(vd.at.root))
          continue;
        int64_t d = use.offset - vd.at.offset;
        if (d <= 0)
          continue;
        auto it = an.iterLoop.find(vd.at.root);
        if (it == an.iterLoop.end())
          continue;
        const LoopTiming &lt = an.loopTiming(*it->second);
        if (!lt.iiConst) {
          emit(Severity::Warning, "stale-iteration-value", op,
               desc(v) + " may be overwritten by a later iteration before " +
                   opcodeName(op.op) + " reads it (variable initiation "
                   "interval)");
        } else if (lt.ii == 0 || d >= lt.ii) {
          emit(Severity::Error, "stale-iteration-value", op,
               desc(v) + " is overwritten " +
                   std::to_string(lt.ii == 0 ? 0 : lt.ii) +
                   " cycle(s) after it is produced, but " +
                   opcodeName(op.op) + " reads it " + std::to_string(d) +
                   " cycle(s) late; it would observe iteration i+" +
                   std::to_string(lt.ii == 0 ? d : d / lt.ii));
        }
      }
      // Deliberate cross-iteration feeds: a delay longer than the
      // initiation interval observes an earlier iteration. Legal, but
      // worth flagging since it is a frequent source of off-by-one bugs.
      if (op.op == Opcode::Delay) {
        if (an.isIterationRoot(use.root)) {
          auto it = an.iterLoop.find(use.root);
          if (it != an.iterLoop.end()) {
            const LoopTiming &lt = an.loopTiming(*it->second);
            if (lt.iiConst && lt.ii > 0 && op.amount > lt.ii)
              emit(Severity::Warning, "stale-iteration-value", op,
                   "delay of " + std::to_string(op.amount) +
                       " cycles spans " + std::to_string(op.amount / lt.ii) +
                       " iterations (initiation interval " +
                       std::to_string(lt.ii) + "); the result observes an "
                       "earlier iteration");
          }
        }
      }
      // A sequential `for` cannot restart an iteration every cycle zero.
      if (op.op == Opcode::For) {
        const LoopTiming &lt = an.loopTiming(op);
        if (lt.iiConst && lt.ii == 0)
          emit(Severity::Error, "zero-ii", op,
               "`for` requires an initiation interval of at least one "
               "cycle; use unroll_for for fully parallel iterations");
      }
    });
  }

  void checkCallAlignment() {
    walkOps(fn, [&](const Operation &op, auto &) {
      if (op.op == Opcode::Call)
        checkCallOperands(op);
      else if (op.op == Opcode::Return)
        checkReturn(op);
      else if (timingChecked(op))
        checkCallResultUses(op);
    });
  }

  void checkCallOperands(const Operation &op) {
    const Function *callee = mod.find(op.callee);
    if (!callee || !op.sched)
      return;
    CanonicalInstant cs = resolveTime(fn, *op.sched);
    if (!cs.valid)
      return;
    for (size_t i = 0; i < op.operands.size() && i < callee->params.size();
         ++i) {
      ValueId v = op.operands[i];
      if (!fn.val(v).type.isPrimitive())
        continue;
      Validity vd = an.validityOf(v);
      if (vd.anytime)
        continue;
      CanonicalInstant need{cs.root, cs.offset + callee->params[i].delay,
                            true};
      if (!alignedForConsumption(vd.at, need))
        emit(Severity::Error, "pipeline-imbalance", op,
             "argument " + desc(v) + " of @" + op.callee +
                 " is not valid at the instant the callee samples it "
                 "(call + " +
                 std::to_string(callee->params[i].delay) + ")");
    }
  }

  void checkCallResultUses(const Operation &op) {
    if (!op.sched)
      return;
    CanonicalInstant use = resolveTime(fn, *op.sched);
    if (!use.valid)
      return;
    for (ValueId v : op.operands) {
      if (!fn.val(v).type.isPrimitive() || !isCallResult(v))
        continue;
      Validity vd = an.validityOf(v);
      if (vd.anytime)
        continue;
      if (classifyUse(vd.at, use) == 1)
        emit(Severity::Error, "pipeline-imbalance", op,
             desc(v) + " becomes available later than " +
                 opcodeName(op.op) + " consumes it; the pipeline stages "
                 "around the call are misaligned");
      else if (staleAcrossIterations(vd.at, use))
        emit(Severity::Error, "pipeline-imbalance", op,
             desc(v) + " is consumed after the next call overwrites it");
    }
  }

  bool staleAcrossIterations(CanonicalInstant v, CanonicalInstant use) const {
    if (!v.valid || !use.valid || v.root != use.root ||
        !an.isIterationRoot(v.root))
      return false;
    int64_t d = use.offset - v.offset;
    if (d <= 0)
      return false;
    auto it = an.iterLoop.find(v.root);
    if (it == an.iterLoop.end())
      return false;
    const LoopTiming &lt = an.loopTiming(*it->second);
    return lt.iiConst && (lt.ii == 0 || d >= lt.ii);
  }

  void checkReturn(const Operation &op) {
    for (size_t i = 0; i < op.operands.size() && i < fn.results.size(); ++i) {
      ValueId v = op.operands[i];
      if (!fn.val(v).type.isPrimitive())
        continue;
      Validity vd = an.validityOf(v);
      if (vd.anytime)
        continue;
      CanonicalInstant need{fn.rootTime, fn.results[i].delay, true};
      if (!alignedForConsumption(vd.at, need))
        emit(Severity::Error, "pipeline-imbalance", op,
             "result " + std::to_string(i) + " (" + desc(v) +
                 ") is not valid at the declared output delay of " +
                 std::to_string(fn.results[i].delay) + " cycles");
    }
  }

  // A consumer sampling at `need` sees `v` iff the instants match, or the
  // value is stable (non-iteration root) and provably written no later.
  bool alignedForConsumption(CanonicalInstant v, CanonicalInstant need) const {
    CanonicalInstant vd = an.deepResolve(v), nd = an.deepResolve(need);
    if (vd.root == nd.root) {
      if (vd.offset == nd.offset)
        return true;
      return !an.isIterationRoot(vd.root) && vd.offset < nd.offset;
    }
    if (an.isIterationRoot(vd.root))
      return false;
    CanonicalInstant lb = an.lowerBound(nd);
    if (lb.valid && lb.root == vd.root)
      return lb.offset >= vd.offset;
    return true; // not statically comparable
  }

  struct Access {
    const Operation *op;
    bool isWrite;
    CanonicalInstant at;
    std::vector<ValueId> indices;
  };

  bool sameAddress(const Access &a, const Access &b) const {
    if (a.indices.size() != b.indices.size())
      return false;
    for (size_t i = 0; i < a.indices.size(); ++i) {
      if (a.indices[i] == b.indices[i])
        continue;
      auto ca = fn.constValue(a.indices[i]), cb = fn.constValue(b.indices[i]);
      if (!(ca && cb && *ca == *cb))
        return false;
    }
    return true;
  }

  bool constAddress(const Access &a) const {
    for (ValueId v : a.indices)
      if (!fn.constValue(v))
        return false;
    return true;
  }

  void conflictPair(const Access &a, const Access &b) {
    if (!a.at.valid || !b.at.valid || a.at.root != b.at.root)
      return;
    bool bothRead = !a.isWrite && !b.isWrite;
    if (a.at.offset == b.at.offset) {
      if (bothRead && sameAddress(a, b))
        return; // one transaction, shared
      emit(Severity::Error, "port-conflict", *b.op,
           "two transactions occupy the same memref port in the same "
           "cycle; move one access or add a port");
      return;
    }
    if (!an.isIterationRoot(a.at.root))
      return; // distinct stable instants never coincide
    auto it = an.iterLoop.find(a.at.root);
    if (it == an.iterLoop.end())
      return;
    const LoopTiming &lt = an.loopTiming(*it->second);
    if (!lt.iiConst || lt.ii <= 0)
      return;
    int64_t d = std::llabs(a.at.offset - b.at.offset);
    if (d % lt.ii != 0)
      return;
    int64_t span = d / lt.ii;
    // Accesses d cycles apart collide when iteration i+span overlaps
    // iteration i. Same-address sharing only holds for constant indices.
    if (bothRead && sameAddress(a, b) && constAddress(a))
      return;
    if (lt.tripConst) {
      if (span <= lt.trip - 1)
        emit(Severity::Error, "port-conflict", *b.op,
             "pipelined iterations " + std::to_string(span) +
                 " apart issue transactions on the same memref port in "
                 "the same cycle (initiation interval " +
                 std::to_string(lt.ii) + ")");
    } else {
      emit(Severity::Warning, "port-conflict-possible", *b.op,
           "pipelined iterations may issue transactions on the same "
           "memref port in the same cycle (initiation interval " +
           std::to_string(lt.ii) + ", trip count unknown)");
    }
  }

  void checkMemrefConflicts() {
    std::map<ValueId, std::vector<Access>> byPort;
    walkOps(fn, [&](const Operation &op, auto &) {
      if (!op.sched)
        return;
      if (op.op == Opcode::MemRead) {
        byPort[op.operands[0]].push_back(
            {&op, false, resolveTime(fn, *op.sched),
             {op.operands.begin() + 1, op.operands.end()}});
      } else if (op.op == Opcode::MemWrite) {
        byPort[op.operands[1]].push_back(
            {&op, true, resolveTime(fn, *op.sched),
             {op.operands.begin() + 2, op.operands.end()}});
      }
    });
    for (auto &[port, accs] : byPort)
      for (size_t i = 0; i < accs.size(); ++i)
        for (size_t j = i + 1; j < accs.size(); ++j)
          conflictPair(accs[i], accs[j]);
  }
};

} // namespace detail

// Schedule verification: value/consumer instant agreement, pipelined-loop
// staleness, call/return pipeline alignment, memref port exclusivity.
// Assumes the module already passed structural validation.
inline std::vector<Diagnostic> verify(const Module &mod, const Function &fn) {
  if (fn.isExtern)
    return {};
  return detail::Verifier(mod, fn).run();
}

inline std::vector<Diagnostic> verify(const Module &mod) {
  std::vector<Diagnostic> all;
  for (auto &fn : mod.functions) {
    auto d = verify(mod, fn);
    all.insert(all.end(), d.begin(), d.end());
  }
  return all;
}

} // namespace hirc

#endif
