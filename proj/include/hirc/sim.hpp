#ifndef HIRC_SIM_HPP
#define HIRC_SIM_HPP

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "hirc/ir.hpp"

namespace hirc {

//===----------------------------------------------------------------------===//
// Inputs / outputs
//===----------------------------------------------------------------------===//

struct ScriptTxn { // externally scripted write into a top-level port
  std::string port;
  int64_t cycle = 0;
  std::vector<int64_t> index;
  int64_t value = 0;
};

struct SimInput {
  std::map<std::string, int64_t> scalars;
  std::map<std::string, std::vector<int64_t>> tensors;
  // Params naming the same physical tensor (extra ports onto one buffer).
  std::map<std::string, std::string> alias;
  std::vector<ScriptTxn> ports;
  int64_t maxCycles = 1000000;
  bool trace = false;
};

struct UBEvent {
  std::string kind; // out-of-bounds | port-conflict | uninitialized-read
                    // | bound-inversion | loop-reentry
  int64_t cycle = 0;
  std::string detail;
  SourceSpan loc;
};

struct TraceEntry {
  int64_t cycle = 0;
  std::string name;
  int64_t value = 0;
};

struct SimResult {
  bool ok = false;
  std::vector<Diagnostic> diags;
  std::vector<int64_t> results;
  int64_t completionCycle = -1;
  int64_t cyclesRun = 0;
  std::map<std::string, std::vector<int64_t>> tensors;
  std::vector<UBEvent> ub;
  std::vector<TraceEntry> trace;
};

namespace detail {

//===----------------------------------------------------------------------===//
// Simulation state
//===----------------------------------------------------------------------===//

struct SimValue {
  uint64_t bits = 0;
  bool known = false;
  bool poison = false;
};

struct MemWord {
  uint64_t bits = 0;
  bool init = false;
  bool poison = false;
};

struct MemInstance {
  std::string name;
  MemrefType type; // as declared at the origin (alloc / top param)
  std::vector<MemWord> words;
};

struct Txn {
  int64_t bank = 0;
  int64_t word = 0; // within the bank
  bool isWrite = false;
  uint64_t bits = 0;
  bool poison = false;
  const Operation *op = nullptr; // null for scripted transactions
};

struct SimPort {
  std::string name;
  MemrefType type;
  std::shared_ptr<MemInstance> inst;
  std::map<int64_t, std::vector<Txn>> txns;
};

using PortPtr = std::shared_ptr<SimPort>;

struct Frame {
  Frame *parent = nullptr;
  std::map<ValueId, SimValue> vals;
};

struct Activation;

// One running instance of a region (a function body, or one loop
// iteration / unroll lane). Tracks when every op in it has finished so
// the dynamic body latency (max op end cycle) is known.
struct Scope {
  Activation *act = nullptr;
  Frame *frame = nullptr;
  int64_t start = 0;
  int outstanding = 0;
  int64_t maxEnd = 0;
  std::function<void(int64_t)> onDone;
  std::function<void(int64_t)> onYield;
  std::map<ValueId, std::vector<const Operation *>> waiting;
};

struct Activation {
  const Function *fn = nullptr;
  Frame *root = nullptr;
  std::map<ValueId, PortPtr> ports;
  std::function<void(int64_t, const std::vector<SimValue> &)> onReturn;
};

//===----------------------------------------------------------------------===//
// Engine
//===----------------------------------------------------------------------===//

class Sim {
public:
  Sim(const Module &mod, const SimInput &in) : mod(mod), in(in) {}

  SimResult run(const std::string &fnName) {
    const Function *top = mod.find(fnName);
    if (!top || top->isExtern) {
      res.diags.push_back({Severity::Error, "sim-entry", {},
                           "no simulable function @" + fnName, {}});
      return res;
    }
    topFn = top;
    if (!bindTopLevel(*top))
      return res;
    runQueue();
    if (res.completionCycle < 0 && !fatal)
      res.diags.push_back({Severity::Error, "sim-timeout", {},
                           "@" + fnName + " did not return within " +
                               std::to_string(in.maxCycles) + " cycles",
                           {}});
    extractTensors();
    res.ok = !hasErrors(res.diags);
    return res;
  }

private:
  const Module &mod;
  const SimInput &in;
  const Function *topFn = nullptr;
  SimResult res;
  bool fatal = false;

  std::map<int64_t, std::vector<std::function<void()>>> queue;
  int64_t now = 0;
  std::deque<Frame> frames;
  std::deque<Activation> activations;
  std::deque<Scope> scopes;
  std::vector<PortPtr> allPorts;
  std::set<std::pair<const Operation *, Frame *>> activeLoops;
  Activation *topAct = nullptr;

  //===--- plumbing -------------------------------------------------------===//

  void at(int64_t cycle, std::function<void()> cb) {
    queue[std::max(cycle, now)].push_back(std::move(cb));
  }

  void ubEvent(const std::string &kind, int64_t cycle,
               const std::string &detail, const SourceSpan &loc) {
    if (res.ub.size() < 1000)
      res.ub.push_back({kind, cycle, detail, loc});
  }

  SimValue lookup(const Function &fn, Frame *frame, ValueId v) const {
    const ValueDef &d = fn.val(v);
    if (d.knownConst)
      return {(uint64_t)d.literal, true, false};
    for (Frame *f = frame; f; f = f->parent) {
      auto it = f->vals.find(v);
      if (it != f->vals.end())
        return it->second;
    }
    return {};
  }

  void store(Frame *frame, ValueId v, SimValue val) {
    frame->vals[v] = val;
  }

  // Datapath view: a value is the word its register holds, zero-extended
  // into wider consumers. Consts contribute their 64-bit literal; the
  // wrap happens at the consuming op's width.
  int64_t rawOf(const Function &fn, ValueId v, const SimValue &sv) const {
    (void)fn;
    (void)v;
    return (int64_t)sv.bits;
  }

  // Control view: signed, for loop bounds and guards.
  int64_t signedOf(const Function &fn, ValueId v, const SimValue &sv) const {
    const Type &t = fn.val(v).type;
    if (t.isInt())
      return signExtend(sv.bits, t.width);
    return (int64_t)sv.bits;
  }

  //===--- top level binding ---------------------------------------------===//

  bool bindTopLevel(const Function &fn) {
    activations.emplace_back();
    topAct = &activations.back();
    frames.emplace_back();
    topAct->fn = &fn;
    topAct->root = &frames.back();
    // Aliased params share one MemInstance.
    std::map<std::string, std::shared_ptr<MemInstance>> insts;
    auto canonical = [&](const std::string &name) {
      std::string n = name;
      for (int guard = 0; guard < 64; ++guard) {
        auto it = in.alias.find(n);
        if (it == in.alias.end())
          return n;
        n = it->second;
      }
      return n;
    };
    for (auto &p : fn.params) {
      const ValueDef &d = fn.val(p.value);
      if (d.type.isMemref()) {
        std::string base = canonical(d.name);
        auto &inst = insts[base];
        if (!inst) {
          inst = std::make_shared<MemInstance>();
          inst->name = base;
          inst->type = *d.type.memref;
          inst->words.resize(d.type.memref->numElements());
          auto it = in.tensors.find(base);
          if (it != in.tensors.end()) {
            if ((int64_t)it->second.size() != inst->type.numElements()) {
              res.diags.push_back(
                  {Severity::Error, "sim-input", {},
                   "tensor '" + base + "' has " +
                       std::to_string(it->second.size()) + " elements, " +
                       std::to_string(inst->type.numElements()) +
                       " expected",
                   {}});
              return false;
            }
            for (size_t i = 0; i < it->second.size(); ++i) {
              inst->words[i].bits =
                  maskToWidth((uint64_t)it->second[i], inst->type.elemWidth);
              inst->words[i].init = true;
            }
          }
        }
        auto port = std::make_shared<SimPort>();
        port->name = d.name;
        port->type = *d.type.memref;
        port->inst = inst;
        topAct->ports[p.value] = port;
        allPorts.push_back(port);
      } else if (d.type.isPrimitive()) {
        auto it = in.scalars.find(d.name);
        int64_t v = it != in.scalars.end() ? it->second : 0;
        store(topAct->root, p.value,
              {maskToWidth((uint64_t)v, d.type.width), true, false});
      }
    }
    // Scripted external writes; also force those cycles to be processed.
    for (auto &s : in.ports) {
      PortPtr port;
      for (auto &p : fn.params)
        if (fn.val(p.value).name == s.port && topAct->ports.count(p.value))
          port = topAct->ports[p.value];
      if (!port) {
        res.diags.push_back({Severity::Error, "sim-input", {},
                             "scripted port '" + s.port + "' not found",
                             {}});
        return false;
      }
      auto [bank, word, oob] = address(port->type, s.index);
      if (oob) {
        res.diags.push_back({Severity::Error, "sim-input", {},
                             "scripted index out of bounds on '" + s.port +
                                 "'",
                             {}});
        return false;
      }
      port->txns[s.cycle].push_back(
          {bank, word, true,
           maskToWidth((uint64_t)s.value, port->type.elemWidth), false,
           nullptr});
      at(s.cycle, [] {});
    }
    topAct->onReturn = [this](int64_t cycle,
                              const std::vector<SimValue> &vals) {
      res.completionCycle = cycle;
      for (size_t i = 0; i < vals.size(); ++i) {
        int w = topFn->results[i].type.width;
        res.results.push_back(vals[i].poison || !vals[i].known
                                  ? 0
                                  : signExtend(vals[i].bits, w));
      }
    };
    store(topAct->root, fn.rootTime, {0, true, false});
    startScope(*topAct, topAct->root, fn.body, 0, [](int64_t) {}, nullptr);
    return true;
  }

  void extractTensors() {
    if (!topAct)
      return;
    std::set<std::string> done;
    for (auto &p : topFn->params) {
      auto it = topAct->ports.find(p.value);
      if (it == topAct->ports.end())
        continue;
      const MemInstance &inst = *it->second->inst;
      if (!done.insert(inst.name).second)
        continue;
      std::vector<int64_t> out;
      out.reserve(inst.words.size());
      for (auto &w : inst.words)
        out.push_back(w.init && !w.poison
                          ? signExtend(w.bits, inst.type.elemWidth)
                          : 0);
      res.tensors[inst.name] = std::move(out);
    }
  }

  //===--- main loop ------------------------------------------------------===//

  void runQueue() {
    while (!queue.empty() && !fatal) {
      now = queue.begin()->first;
      if (now > in.maxCycles)
        break;
      res.cyclesRun = now;
      // Drain every event scheduled for this cycle, including ones added
      // while processing it, before memory commits.
      for (;;) {
        auto it = queue.find(now);
        if (it == queue.end())
          break;
        std::vector<std::function<void()>> cbs = std::move(it->second);
        queue.erase(it);
        for (auto &cb : cbs) {
          if (fatal)
            return;
          cb();
        }
      }
      commit(now);
    }
  }

  std::tuple<int64_t, int64_t, bool> address(const MemrefType &mt,
                                             const std::vector<int64_t> &idx) {
    int64_t bank = 0, word = 0;
    bool oob = idx.size() != mt.shape.size();
    for (size_t i = 0; i < idx.size() && !oob; ++i) {
      if (idx[i] < 0 || idx[i] >= mt.shape[i]) {
        oob = true;
        break;
      }
      if (mt.dims[i] == DimKind::Dist)
        bank = bank * mt.shape[i] + idx[i];
      else
        word = word * mt.shape[i] + idx[i];
    }
    return {bank, word, oob};
  }

  void commit(int64_t cycle) {
    for (auto &port : allPorts) {
      auto it = port->txns.find(cycle);
      if (it == port->txns.end())
        continue;
      std::vector<Txn> &txns = it->second;
      // Conflicts are per bank: each bank exposes this port once.
      std::map<int64_t, std::vector<const Txn *>> byBank;
      for (auto &t : txns)
        byBank[t.bank].push_back(&t);
      for (auto &[bank, group] : byBank) {
        if (group.size() > 1) {
          bool allSharedReads = true;
          for (auto *t : group)
            allSharedReads &= !t->isWrite && t->word == group[0]->word;
          if (!allSharedReads)
            ubEvent("port-conflict", cycle,
                    "port '" + port->name + "' bank " +
                        std::to_string(bank) + " carries " +
                        std::to_string(group.size()) +
                        " transactions in one cycle",
                    group.back()->op ? group.back()->op->loc : SourceSpan{});
        }
      }
      for (auto &t : txns) {
        if (!t.isWrite)
          continue;
        MemWord &w =
            port->inst->words[t.bank * port->type.wordsPerBank() + t.word];
        w.bits = t.bits;
        w.init = true;
        w.poison = t.poison;
      }
      port->txns.erase(it);
    }
  }

  //===--- scopes ---------------------------------------------------------===//

  Scope *startScope(Activation &act, Frame *frame,
                    const std::vector<Operation> &ops, int64_t start,
                    std::function<void(int64_t)> onDone,
                    std::function<void(int64_t)> onYield) {
    scopes.emplace_back();
    Scope *sc = &scopes.back();
    sc->act = &act;
    sc->frame = frame;
    sc->start = start;
    sc->maxEnd = start;
    sc->onDone = std::move(onDone);
    sc->onYield = std::move(onYield);
    for (auto &op : ops)
      if (op.op != Opcode::Yield)
        ++sc->outstanding;
    if (sc->outstanding == 0)
      sc->onDone(start);
    for (auto &op : ops)
      dispatch(*sc, op);
    return sc;
  }

  void finish(Scope &sc, int64_t end) {
    sc.maxEnd = std::max(sc.maxEnd, end);
    if (--sc.outstanding == 0)
      sc.onDone(sc.maxEnd);
  }

  void setTime(Scope &sc, ValueId v, int64_t cycle) {
    store(sc.frame, v, {(uint64_t)cycle, true, false});
    auto it = sc.waiting.find(v);
    if (it == sc.waiting.end())
      return;
    std::vector<const Operation *> ops = std::move(it->second);
    sc.waiting.erase(it);
    for (const Operation *op : ops)
      dispatch(sc, *op);
  }

  void dispatch(Scope &sc, const Operation &op) {
    const Function &fn = *sc.act->fn;
    if (op.op == Opcode::Constant) {
      finish(sc, sc.start); // value is compile time; no hardware event
      return;
    }
    if (op.op == Opcode::Alloc) {
      execAlloc(sc, op);
      finish(sc, sc.start);
      return;
    }
    if (op.op == Opcode::TimeDef) {
      const TimeVarInfo &tv = fn.val(op.results[0]).time;
      SimValue p = lookup(fn, sc.frame, tv.parent);
      if (!p.known) {
        sc.waiting[tv.parent].push_back(&op);
        return;
      }
      setTime(sc, op.results[0], (int64_t)p.bits + tv.parentOffset);
      finish(sc, sc.start);
      return;
    }
    SimValue base = lookup(fn, sc.frame, op.sched->base);
    if (!base.known) {
      sc.waiting[op.sched->base].push_back(&op);
      return;
    }
    int64_t cycle = (int64_t)base.bits + op.sched->offset;
    at(cycle, [this, &sc, &op, cycle] { exec(sc, op, cycle); });
  }

  void execAlloc(Scope &sc, const Operation &op) {
    const Function &fn = *sc.act->fn;
    auto inst = std::make_shared<MemInstance>();
    const MemrefType &mt = *fn.val(op.results[0]).type.memref;
    inst->name = fn.val(op.results[0]).name;
    inst->type = mt;
    inst->words.resize(mt.numElements());
    for (ValueId r : op.results) {
      auto port = std::make_shared<SimPort>();
      port->name = fn.val(r).name;
      port->type = *fn.val(r).type.memref;
      port->inst = inst;
      sc.act->ports[r] = port;
      allPorts.push_back(port);
    }
  }

  PortPtr portOf(Activation &act, ValueId v) {
    auto it = act.ports.find(v);
    return it == act.ports.end() ? nullptr : it->second;
  }

  //===--- op execution ---------------------------------------------------===//

  void exec(Scope &sc, const Operation &op, int64_t cycle) {
    switch (op.op) {
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mult:
    case Opcode::Select:
    case Opcode::BitSlice:
      execArith(sc, op, cycle);
      break;
    case Opcode::Delay:
      execDelay(sc, op, cycle);
      break;
    case Opcode::MemRead:
      execRead(sc, op, cycle);
      break;
    case Opcode::MemWrite:
      execWrite(sc, op, cycle);
      break;
    case Opcode::Call:
      execCall(sc, op, cycle);
      break;
    case Opcode::For:
    case Opcode::UnrollFor:
      execLoop(sc, op, cycle);
      break;
    case Opcode::Yield:
      if (sc.onYield)
        sc.onYield(cycle);
      break;
    case Opcode::Return:
      execReturn(sc, op, cycle);
      break;
    default:
      finish(sc, cycle);
      break;
    }
  }

  struct Operand {
    int64_t raw = 0;
    bool poison = false;
  };

  Operand readOperand(Scope &sc, ValueId v) {
    SimValue sv = lookup(*sc.act->fn, sc.frame, v);
    if (!sv.known)
      return {0, true};
    return {rawOf(*sc.act->fn, v, sv), sv.poison};
  }

  void setResult(Scope &sc, ValueId r, int64_t raw, bool poison) {
    const Type &t = sc.act->fn->val(r).type;
    int w = t.isInt() ? t.width : 64;
    SimValue sv{maskToWidth((uint64_t)raw, w), true, poison};
    store(sc.frame, r, sv);
    if (in.trace && res.trace.size() < 200000)
      res.trace.push_back(
          {now, sc.act->fn->name + "." + sc.act->fn->val(r).name,
           poison ? 0 : signExtend(sv.bits, w)});
  }

  void execArith(Scope &sc, const Operation &op, int64_t cycle) {
    std::vector<Operand> xs;
    bool poison = false;
    for (ValueId v : op.operands) {
      xs.push_back(readOperand(sc, v));
      poison |= xs.back().poison;
    }
    int64_t r = 0;
    switch (op.op) {
    case Opcode::Add:
      r = (int64_t)((uint64_t)xs[0].raw + (uint64_t)xs[1].raw);
      break;
    case Opcode::Sub:
      r = (int64_t)((uint64_t)xs[0].raw - (uint64_t)xs[1].raw);
      break;
    case Opcode::Mult:
      r = (int64_t)((uint64_t)xs[0].raw * (uint64_t)xs[1].raw);
      break;
    case Opcode::Select: r = xs[0].raw != 0 ? xs[1].raw : xs[2].raw; break;
    case Opcode::BitSlice:
      r = (int64_t)maskToWidth((uint64_t)xs[0].raw >> op.lo,
                               op.hi - op.lo + 1);
      break;
    default: break;
    }
    setResult(sc, op.results[0], r, poison);
    finish(sc, cycle);
  }

  void execDelay(Scope &sc, const Operation &op, int64_t cycle) {
    Operand x = readOperand(sc, op.operands[0]);
    setResult(sc, op.results[0], x.raw, x.poison);
    finish(sc, cycle + op.amount);
  }

  bool gatherIndices(Scope &sc, const Operation &op, size_t first,
                     const MemrefType &mt, std::vector<int64_t> &idx,
                     bool &poison, int64_t cycle) {
    for (size_t i = first; i < op.operands.size(); ++i) {
      Operand o = readOperand(sc, op.operands[i]);
      poison |= o.poison;
      idx.push_back(o.raw);
    }
    auto [bank, word, oob] = address(mt, idx);
    if (oob && !poison) {
      ubEvent("out-of-bounds", cycle, "index out of range on mem access",
              op.loc);
      return false;
    }
    return !poison && !oob;
  }

  void execRead(Scope &sc, const Operation &op, int64_t cycle) {
    PortPtr port = portOf(*sc.act, op.operands[0]);
    int64_t lat = latencyOf(*sc.act->fn, op, &mod);
    if (!port) {
      setResult(sc, op.results[0], 0, true);
      finish(sc, cycle + lat);
      return;
    }
    std::vector<int64_t> idx;
    bool poison = false;
    if (!gatherIndices(sc, op, 1, port->type, idx, poison, cycle)) {
      setResult(sc, op.results[0], 0, true);
      finish(sc, cycle + lat);
      return;
    }
    auto [bank, word, oob] = address(port->type, idx);
    port->txns[cycle].push_back({bank, word, false, 0, false, &op});
    const MemWord &w =
        port->inst->words[bank * port->type.wordsPerBank() + word];
    bool p = w.poison;
    if (!w.init) {
      ubEvent("uninitialized-read", cycle,
              "read of '" + port->name + "' before any write", op.loc);
      p = true;
    }
    setResult(sc, op.results[0], (int64_t)w.bits, p);
    finish(sc, cycle + lat);
  }

  void execWrite(Scope &sc, const Operation &op, int64_t cycle) {
    PortPtr port = portOf(*sc.act, op.operands[1]);
    Operand data = readOperand(sc, op.operands[0]);
    if (!port) {
      finish(sc, cycle + 1);
      return;
    }
    std::vector<int64_t> idx;
    bool poison = data.poison;
    if (gatherIndices(sc, op, 2, port->type, idx, poison, cycle)) {
      auto [bank, word, oob] = address(port->type, idx);
      port->txns[cycle].push_back(
          {bank, word, true,
           maskToWidth((uint64_t)data.raw, port->type.elemWidth),
           data.poison, &op});
    }
    finish(sc, cycle + 1);
  }

  void execCall(Scope &sc, const Operation &op, int64_t cycle) {
    const Function *callee = mod.find(op.callee);
    if (!callee || callee->isExtern) {
      res.diags.push_back(
          {Severity::Error, "sim-extern", op.loc,
           "@" + op.callee +
               " is external and cannot be simulated; provide a "
               "definition or simulate the emitted Verilog",
           {}});
      fatal = true;
      return;
    }
    activations.emplace_back();
    Activation &act = activations.back();
    frames.emplace_back();
    act.fn = callee;
    act.root = &frames.back();
    for (size_t i = 0; i < callee->params.size(); ++i) {
      const ValueDef &pd = callee->val(callee->params[i].value);
      if (pd.type.isMemref()) {
        act.ports[callee->params[i].value] = portOf(*sc.act, op.operands[i]);
      } else {
        Operand o = readOperand(sc, op.operands[i]);
        store(act.root, callee->params[i].value,
              {maskToWidth((uint64_t)o.raw,
                           pd.type.isInt() ? pd.type.width : 64),
               true, o.poison});
      }
    }
    store(act.root, callee->rootTime, {(uint64_t)cycle, true, false});
    Scope *caller = &sc;
    const Operation *callOp = &op;
    act.onReturn = [this, caller, callOp](int64_t retCycle,
                                          const std::vector<SimValue> &vals) {
      for (size_t i = 0; i < callOp->results.size() && i < vals.size(); ++i)
        store(caller->frame, callOp->results[i], vals[i]);
      finish(*caller, retCycle);
    };
    startScope(act, act.root, callee->body, cycle, [](int64_t) {}, nullptr);
  }

  void execReturn(Scope &sc, const Operation &op, int64_t cycle) {
    attemptReturn(sc, op, cycle, 4096);
  }

  // Result wires may become valid after the completion event fires (a
  // declared result delay larger than the return's offset, e.g. a long
  // delay tap or a late call result). The completion cycle is the fire
  // cycle; sampling an operand that a callee has not delivered yet is
  // retried on later cycles.
  void attemptReturn(Scope &sc, const Operation &op, int64_t fireCycle,
                     int triesLeft) {
    std::vector<SimValue> vals;
    bool allKnown = true;
    for (ValueId v : op.operands) {
      vals.push_back(lookup(*sc.act->fn, sc.frame, v));
      allKnown &= vals.back().known;
    }
    if (!allKnown && triesLeft > 0) {
      at(now + 1,
         [this, &sc, &op, fireCycle, triesLeft] {
           attemptReturn(sc, op, fireCycle, triesLeft - 1);
         });
      return;
    }
    if (sc.act->onReturn)
      sc.act->onReturn(fireCycle, vals);
    finish(sc, fireCycle);
  }

  //===--- loops ----------------------------------------------------------===//

  struct LoopRun {
    const Operation *op = nullptr;
    Scope *parent = nullptr;
    int64_t fireCycle = 0;
    int64_t lb = 0, step = 1, trip = 0;
    int64_t nextIter = 0;
    int scopesLeft = 0;
    int64_t maxEnd = 0;
  };
  std::deque<LoopRun> loopRuns;

  void execLoop(Scope &sc, const Operation &op, int64_t cycle) {
    const Function &fn = *sc.act->fn;
    auto key = std::make_pair(&op, sc.frame);
    if (!activeLoops.insert(key).second) {
      ubEvent("loop-reentry", cycle,
              "loop restarted before its previous activation completed",
              op.loc);
      finish(sc, cycle + 1);
      return;
    }
    int64_t bound[3] = {0, 0, 1};
    bool bad = false;
    for (int i = 0; i < 3; ++i) {
      SimValue sv = lookup(fn, sc.frame, op.operands[i]);
      bad |= !sv.known || sv.poison;
      bound[i] = signedOf(fn, op.operands[i], sv);
    }
    int64_t lb = bound[0], ub = bound[1], st = bound[2];
    if (!bad && (st <= 0 || ub < lb)) {
      ubEvent("bound-inversion", cycle,
              "loop bounds are not well ordered (lb " + std::to_string(lb) +
                  ", ub " + std::to_string(ub) + ", step " +
                  std::to_string(st) + ")",
              op.loc);
      bad = true;
    }
    loopRuns.emplace_back();
    LoopRun *lr = &loopRuns.back();
    lr->op = &op;
    lr->parent = &sc;
    lr->fireCycle = cycle;
    lr->lb = lb;
    lr->step = bad ? 1 : st;
    lr->trip = bad ? 0 : (ub - lb + st - 1) / st;
    if (lr->trip == 0) {
      completeLoop(*lr, cycle + 1);
      return;
    }
    lr->scopesLeft = (int)lr->trip;
    lr->maxEnd = cycle + 1;
    if (op.op == Opcode::UnrollFor) {
      for (int64_t k = 0; k < lr->trip; ++k)
        startIteration(*lr, k, cycle + 1);
    } else {
      startIteration(*lr, 0, cycle + 1);
    }
  }

  void startIteration(LoopRun &lr, int64_t k, int64_t start) {
    const Operation &op = *lr.op;
    const Function &fn = *lr.parent->act->fn;
    frames.emplace_back();
    Frame *f = &frames.back();
    f->parent = lr.parent->frame;
    int64_t ivVal = lr.lb + k * lr.step;
    const Type &ivT = fn.val(op.inductionVar).type;
    f->vals[op.inductionVar] = {
        maskToWidth((uint64_t)ivVal, ivT.isInt() ? ivT.width : 64), true,
        false};
    for (auto &c : op.counters)
      f->vals[c.result] = {
          maskToWidth((uint64_t)(c.init + k * c.step), c.width), true, false};
    f->vals[op.iterTime] = {(uint64_t)start, true, false};
    LoopRun *plr = &lr;
    auto onYield = [this, plr, k](int64_t ycycle) {
      // The yield of iteration k launches iteration k+1; its cycle is
      // the initiation interval made concrete. Unroll lanes are all
      // launched up front instead.
      if (plr->op->op != Opcode::UnrollFor && k + 1 < plr->trip)
        startIteration(*plr, k + 1, ycycle);
    };
    auto onDone = [this, plr](int64_t end) {
      plr->maxEnd = std::max(plr->maxEnd, end);
      if (--plr->scopesLeft == 0)
        completeLoop(*plr, plr->maxEnd);
    };
    startScope(*lr.parent->act, f, op.body, start, onDone, onYield);
  }

  void completeLoop(LoopRun &lr, int64_t cycle) {
    activeLoops.erase(std::make_pair(lr.op, lr.parent->frame));
    if (lr.op->completionTime != kNoValue)
      setTime(*lr.parent, lr.op->completionTime, cycle);
    finish(*lr.parent, cycle);
  }
};

} // namespace detail

// Cycle-accurate interpretation of a verified module. Reads observe the
// memory state from before the current cycle; writes commit at the end
// of it. Undefined behavior is recorded and poisons dependent values
// rather than aborting.
inline SimResult simulate(const Module &mod, const std::string &fn,
                          const SimInput &in) {
  return detail::Sim(mod, in).run(fn);
}

} // namespace hirc

#endif
