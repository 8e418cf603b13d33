#ifndef HIRC_BACKEND_HPP
#define HIRC_BACKEND_HPP

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hirc/verifier.hpp"

namespace hirc {

struct BackendOptions {
  std::string top;      // emit only this function and its callees
  std::string ramStyle; // "", "block" or "distributed"
};

struct BackendResult {
  bool ok = false;
  std::vector<Diagnostic> diags;
  std::string verilog;
  std::string plan;   // JSON: per-op event wire (root, depth) audit trail
  std::string report; // JSON: registers, counters, memories per function
};

namespace detail {

using json = nlohmann::ordered_json;

inline int clog2(int64_t n) {
  int b = 0;
  while ((int64_t(1) << b) < n)
    ++b;
  return b;
}

// Schedules every operation on a one-bit event pulse derived from its
// canonical (root time, offset) instant. Each root time variable owns a
// shift-register spine; tapping it at depth k yields the pulse for
// offset k. Loops are counters that re-fire their iteration pulse every
// II cycles until the trip count is reached.
class VerilogEmitter {
public:
  VerilogEmitter(const Module &mod, const BackendOptions &opts)
      : mod(mod), opts(opts) {}

  BackendResult run() {
    BackendResult res;
    std::vector<const Function *> fns;
    if (!opts.top.empty()) {
      const Function *top = mod.find(opts.top);
      if (!top || top->isExtern) {
        res.diags.push_back({Severity::Error, "backend-top", {},
                             "no such function @" + opts.top, {}});
        return res;
      }
      collectCallees(*top, fns);
    } else {
      for (auto &f : mod.functions)
        if (!f.isExtern)
          fns.push_back(&f);
    }
    std::ostringstream all;
    all << "// Generated by hirc. Do not edit.\n";
    json planFns = json::array();
    json reportFns = json::array();
    for (const Function *f : fns) {
      FnEmit fe(mod, *f, opts, res.diags);
      if (!fe.emit())
        continue;
      all << "\n" << fe.text.str();
      planFns.push_back(std::move(fe.plan));
      reportFns.push_back(std::move(fe.report));
    }
    if (hasErrors(res.diags))
      return res;
    res.verilog = all.str();
    res.plan = json{{"functions", std::move(planFns)}}.dump(2) + "\n";
    res.report = json{{"functions", std::move(reportFns)}}.dump(2) + "\n";
    res.ok = true;
    return res;
  }

private:
  const Module &mod;
  const BackendOptions &opts;

  void collectCallees(const Function &fn, std::vector<const Function *> &out) {
    for (const Function *f : out)
      if (f == &fn)
        return;
    // Callees first so every module is defined before it is instantiated.
    walkOps(fn, [&](const Operation &op, auto &) {
      if (op.op == Opcode::Call) {
        const Function *callee = mod.find(op.callee);
        if (callee && !callee->isExtern)
          collectCallees(*callee, out);
      }
    });
    out.push_back(&fn);
  }

  //===--- per function ---------------------------------------------------===//

  struct PortContribution {
    int64_t bank = 0;
    std::string event;
    std::string addr;
    bool isWrite = false;
    std::string data;
    const Operation *op = nullptr;
  };

  struct InstancePortWiring { // callee instance signals OR'd into a port
    std::string prefix;      // e.g. "c0_O"
    const MemrefType *type = nullptr;
  };

  struct FnEmit {
    const Module &mod;
    const Function &fn;
    const BackendOptions &opts;
    std::vector<Diagnostic> &diags;
    FnAnalysis an;
    std::ostringstream text;
    std::ostringstream logic;
    std::ostringstream asserts;
    json plan;
    json report;

    std::map<ValueId, std::string> names; // unique signal name per value
    std::map<ValueId, std::set<int64_t>> eventNeed; // root -> tap depths
    std::map<ValueId, std::vector<PortContribution>> portUse;
    std::map<ValueId, std::vector<InstancePortWiring>> portInstances;
    std::vector<ValueId> portOrder; // params then allocs, program order
    std::map<ValueId, bool> portInternal;
    int instanceCount = 0;
    int64_t delayRegs = 0;
    int64_t eventRegs = 0;
    json counters = json::array();
    json delays = json::array();
    json memories = json::array();
    json planOps = json::array();
    json planLoops = json::array();

    FnEmit(const Module &mod, const Function &fn, const BackendOptions &opts,
           std::vector<Diagnostic> &diags)
        : mod(mod), fn(fn), opts(opts), diags(diags), an(mod, fn) {}

    std::string sanitize(const std::string &s) const {
      std::string r;
      for (char c : s)
        r += (isalnum((unsigned char)c) || c == '_') ? c : '_';
      if (r.empty() || isdigit((unsigned char)r[0]))
        r = "s" + r;
      return r;
    }

    void buildNames() {
      std::set<std::string> taken;
      for (ValueId v = 0; v < (ValueId)fn.values.size(); ++v) {
        std::string n = sanitize(fn.val(v).name);
        if (!taken.insert(n).second) {
          n += "_" + std::to_string(v);
          taken.insert(n);
        }
        names[v] = n;
      }
    }

    std::string evName(ValueId root, int64_t off) {
      eventNeed[root].insert(off);
      return "ev_" + names[root] + "_" + std::to_string(off);
    }

    std::string evOf(const Operation &op) {
      CanonicalInstant ci = resolveTime(fn, *op.sched);
      return evName(ci.root, ci.offset);
    }

    // Unroll lanes share events but duplicate values: `env` maps the lane
    // induction variable to its constant, `suffix` uniquifies lane signals.
    struct LaneCtx {
      std::map<ValueId, int64_t> env;
      std::string suffix;
      std::set<ValueId> local; // values defined in an unrolled body
    };

    std::optional<int64_t> constOf(ValueId v, const LaneCtx &lane) const {
      auto it = lane.env.find(v);
      if (it != lane.env.end())
        return it->second;
      return fn.constValue(v);
    }

    std::string sig(ValueId v, int width, const LaneCtx &lane) {
      if (auto c = constOf(v, lane))
        return std::to_string(width) + "'d" +
               std::to_string(maskToWidth((uint64_t)*c, width));
      std::string n = "v_" + names[v];
      if (lane.local.count(v))
        n += lane.suffix;
      return n;
    }

    int widthOf(ValueId v) const {
      const Type &t = fn.val(v).type;
      return t.isInt() ? t.width : 32;
    }

    bool emit() {
      buildNames();
      if (!checkStatic())
        return false;
      buildPlan();
      emitHeader();
      LaneCtx top;
      emitRegion(fn.body, top);
      emitEventSpines();
      emitPortMuxes();
      text << logic.str();
      emitAsserts();
      text << "endmodule\n";
      finishReport();
      return true;
    }

    bool checkStatic() {
      bool ok = true;
      walkOps(fn, [&](const Operation &op, auto &) {
        if (!op.isLoop())
          return;
        const LoopTiming &lt = an.loopTiming(op);
        if (!lt.iiConst || !lt.tripConst || !lt.latencyConst ||
            (op.op == Opcode::For && lt.ii < 1)) {
          diags.push_back(
              {Severity::Error, "backend-non-static", op.loc,
               "loop bounds, initiation interval and latency must be "
               "compile time constants for hardware generation",
               {}});
          ok = false;
        }
      });
      return ok;
    }

    void buildPlan() {
      walkOps(fn, [&](const Operation &op, auto &) {
        if (op.isLoop()) {
          const LoopTiming &lt = an.loopTiming(op);
          planLoops.push_back({{"iter", fn.val(op.iterTime).name},
                               {"ii", lt.ii},
                               {"trip", lt.trip},
                               {"latency", lt.bodyLatency},
                               {"completion", lt.completion}});
        }
        if (!op.sched)
          return;
        CanonicalInstant ci = resolveTime(fn, *op.sched);
        planOps.push_back(
            {{"op", opcodeName(op.op)},
             {"file", op.loc.file},
             {"line", op.loc.begin.line},
             {"col", op.loc.begin.col},
             {"root", fn.val(ci.root).name},
             {"depth", ci.offset},
             {"event",
              "ev_" + names[ci.root] + "_" + std::to_string(ci.offset)}});
      });
      plan = {{"name", fn.name}, {"ops", std::move(planOps)},
              {"loops", std::move(planLoops)}};
    }

    void emitHeader() {
      text << "module " << sanitize(fn.name) << " (\n";
      text << "  input wire clk,\n  input wire rst,\n  input wire start";
      for (auto &p : fn.params) {
        const ValueDef &d = fn.val(p.value);
        if (d.type.isMemref()) {
          emitPortDecl(text, names[p.value], *d.type.memref, false);
          portOrder.push_back(p.value);
          portInternal[p.value] = false;
        } else if (d.type.isPrimitive()) {
          text << ",\n  input wire [" << (d.type.width - 1) << ":0] v_"
               << names[p.value];
        }
      }
      text << ",\n  output wire done";
      for (size_t i = 0; i < fn.results.size(); ++i)
        text << ",\n  output wire [" << (fn.results[i].type.width - 1)
             << ":0] res" << i;
      text << "\n);\n";
      text << "  wire " << evName(fn.rootTime, 0) << " = start;\n";
    }

    void emitPortDecl(std::ostringstream &os, const std::string &name,
                      const MemrefType &mt, bool internal) {
      int aw = std::max(1, clog2(mt.wordsPerBank()));
      for (int64_t b = 0; b < mt.banks(); ++b) {
        std::string pn = name + (mt.banks() > 1 ? "_b" + std::to_string(b)
                                                : std::string());
        auto line = [&](const char *dir, int w, const char *suffix) {
          if (internal)
            os << "  wire [" << (w - 1) << ":0] " << pn << suffix << ";\n";
          else
            os << ",\n  " << dir << " wire [" << (w - 1) << ":0] " << pn
               << suffix;
        };
        line("output", aw, "_addr");
        if (mt.canWrite()) {
          line("output", 1, "_we");
          line("output", mt.elemWidth, "_wdata");
        }
        if (mt.canRead())
          line("input", mt.elemWidth, "_rdata");
      }
    }

    std::string bankName(ValueId port, int64_t bank) {
      const MemrefType &mt = *fn.val(port).type.memref;
      std::string n = names[port];
      if (mt.banks() > 1)
        n += "_b" + std::to_string(bank);
      return n;
    }

    //===--- region walk --------------------------------------------------===//

    void emitRegion(const std::vector<Operation> &region, LaneCtx &lane) {
      for (const Operation &op : region)
        emitOp(op, lane);
    }

    void emitOp(const Operation &op, LaneCtx &lane) {
      switch (op.op) {
      case Opcode::Constant:
      case Opcode::TimeDef:
      case Opcode::Yield:
        break; // folded into events / constants
      case Opcode::Alloc:
        emitAlloc(op);
        break;
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::Mult:
      case Opcode::Select:
      case Opcode::BitSlice:
        emitArith(op, lane);
        break;
      case Opcode::Delay:
        emitDelay(op, lane);
        break;
      case Opcode::MemRead:
        emitRead(op, lane);
        break;
      case Opcode::MemWrite:
        emitWrite(op, lane);
        break;
      case Opcode::Call:
        emitCall(op, lane);
        break;
      case Opcode::For:
      case Opcode::UnrollFor:
        emitLoop(op, lane);
        break;
      case Opcode::Return:
        emitReturn(op, lane);
        break;
      }
    }

    std::string locComment(const Operation &op) {
      return " // " + op.loc.file + ":" +
             std::to_string(op.loc.begin.line) + ":" +
             std::to_string(op.loc.begin.col);
    }

    void emitArith(const Operation &op, LaneCtx &lane) {
      int w = widthOf(op.results[0]);
      std::string r = sig(op.results[0], w, lane);
      std::string e;
      switch (op.op) {
      case Opcode::Add:
        e = sig(op.operands[0], w, lane) + " + " +
            sig(op.operands[1], w, lane);
        break;
      case Opcode::Sub:
        e = sig(op.operands[0], w, lane) + " - " +
            sig(op.operands[1], w, lane);
        break;
      case Opcode::Mult:
        e = sig(op.operands[0], w, lane) + " * " +
            sig(op.operands[1], w, lane);
        break;
      case Opcode::Select:
        e = sig(op.operands[0], 1, lane) + " != 1'd0 ? " +
            sig(op.operands[1], w, lane) + " : " +
            sig(op.operands[2], w, lane);
        break;
      case Opcode::BitSlice:
        e = sig(op.operands[0], widthOf(op.operands[0]), lane) + "[" +
            std::to_string(op.hi) + ":" + std::to_string(op.lo) + "]";
        break;
      default:
        break;
      }
      logic << "  wire [" << (w - 1) << ":0] " << r << " = " << e << ";"
            << locComment(op) << "\n";
    }

    void emitDelay(const Operation &op, LaneCtx &lane) {
      int w = widthOf(op.results[0]);
      int64_t d = op.amount;
      std::string r = sig(op.results[0], w, lane);
      std::string src = sig(op.operands[0], w, lane);
      delayRegs += d;
      delays.push_back({{"name", fn.val(op.results[0]).name + lane.suffix},
                        {"width", w},
                        {"depth", d}});
      if (d == 0) {
        logic << "  wire [" << (w - 1) << ":0] " << r << " = " << src << ";"
              << locComment(op) << "\n";
        return;
      }
      logic << "  reg [" << (w * d - 1) << ":0] " << r << "_sr;"
            << locComment(op) << "\n";
      logic << "  always @(posedge clk) " << r << "_sr <= ";
      if (d == 1)
        logic << src << ";\n";
      else
        logic << "{" << r << "_sr[" << (w * (d - 1) - 1) << ":0], " << src
              << "};\n";
      logic << "  wire [" << (w - 1) << ":0] " << r << " = " << r << "_sr["
            << (w * d - 1) << ":" << (w * (d - 1)) << "];\n";
    }

    // Returns (bank, packed address expression) for a mem access whose
    // index operands start at `first`. Distributed indices are required
    // to be compile time constants by structure validation.
    std::pair<int64_t, std::string> addressOf(const Operation &op,
                                              size_t first,
                                              const MemrefType &mt,
                                              LaneCtx &lane) {
      int aw = std::max(1, clog2(mt.wordsPerBank()));
      int64_t bank = 0;
      std::string addr;
      int64_t constAddr = 0;
      bool allConst = true;
      int64_t stride = 1;
      // Build packed linear address; fold when all indices are constant.
      std::vector<std::string> terms;
      for (size_t i = 0; i < mt.shape.size(); ++i) {
        ValueId idx = op.operands[first + i];
        auto c = constOf(idx, lane);
        if (mt.dims[i] == DimKind::Dist) {
          bank = bank * mt.shape[i] + (c ? *c : 0);
          continue;
        }
        if (c) {
          terms.push_back("");
          continue;
        }
        allConst = false;
        terms.push_back(sig(idx, widthOf(idx), lane));
      }
      // Second walk for strides (row major over packed dims).
      stride = 1;
      std::vector<int64_t> strides;
      for (size_t i = 0; i < mt.shape.size(); ++i)
        if (mt.dims[i] == DimKind::Packed)
          strides.push_back(0);
      int64_t acc = 1;
      for (size_t i = mt.shape.size(), pi = strides.size(); i-- > 0;) {
        if (mt.dims[i] != DimKind::Packed)
          continue;
        strides[--pi] = acc;
        acc *= mt.shape[i];
      }
      size_t pi = 0;
      std::vector<std::string> parts;
      for (size_t i = 0; i < mt.shape.size(); ++i) {
        if (mt.dims[i] != DimKind::Packed)
          continue;
        ValueId idx = op.operands[first + i];
        auto c = constOf(idx, lane);
        int64_t st = strides[pi++];
        if (c) {
          constAddr += *c * st;
        } else {
          parts.push_back(st == 1 ? sig(idx, widthOf(idx), lane)
                                  : sig(idx, widthOf(idx), lane) + " * " +
                                        std::to_string(st));
        }
      }
      if (allConst)
        return {bank, std::to_string(aw) + "'d" +
                          std::to_string(maskToWidth((uint64_t)constAddr,
                                                     aw))};
      for (auto &p : parts)
        addr += (addr.empty() ? "" : " + ") + p;
      if (constAddr)
        addr += " + " + std::to_string(constAddr);
      return {bank, addr};
    }

    void emitRead(const Operation &op, LaneCtx &lane) {
      ValueId port = op.operands[0];
      const MemrefType &mt = *fn.val(port).type.memref;
      auto [bank, addr] = addressOf(op, 1, mt, lane);
      std::string ev = evOf(op);
      portUse[port].push_back({bank, ev, addr, false, "", &op});
      int w = widthOf(op.results[0]);
      std::string r = sig(op.results[0], w, lane);
      std::string rdata = bankName(port, bank) + "_rdata";
      emitBoundsAssert(op, 1, mt, lane, ev);
      if (mt.storage == Storage::Reg) {
        logic << "  wire [" << (w - 1) << ":0] " << r << " = " << rdata
              << ";" << locComment(op) << "\n";
        return;
      }
      // RAM data arrives one cycle after the address: capture it with a
      // combinational bypass so same-cycle consumers see it too.
      CanonicalInstant ci = resolveTime(fn, *op.sched);
      std::string evq = evName(ci.root, ci.offset + 1);
      logic << "  reg [" << (w - 1) << ":0] " << r << "_q;"
            << locComment(op) << "\n";
      logic << "  always @(posedge clk) if (" << evq << ") " << r
            << "_q <= " << rdata << ";\n";
      logic << "  wire [" << (w - 1) << ":0] " << r << " = " << evq << " ? "
            << rdata << " : " << r << "_q;\n";
      eventRegs += 1;
    }

    void emitWrite(const Operation &op, LaneCtx &lane) {
      ValueId port = op.operands[1];
      const MemrefType &mt = *fn.val(port).type.memref;
      auto [bank, addr] = addressOf(op, 2, mt, lane);
      std::string ev = evOf(op);
      portUse[port].push_back(
          {bank, ev, addr, true, sig(op.operands[0], mt.elemWidth, lane),
           &op});
      logic << "  //" << locComment(op).substr(3) << " mem_write via port "
            << names[port] << "\n";
      emitBoundsAssert(op, 2, mt, lane, ev);
    }

    void emitBoundsAssert(const Operation &op, size_t first,
                          const MemrefType &mt, LaneCtx &lane,
                          const std::string &ev) {
      for (size_t i = 0; i < mt.shape.size(); ++i) {
        ValueId idx = op.operands[first + i];
        if (constOf(idx, lane))
          continue;
        asserts << "  always @(posedge clk) if (" << ev << " && !("
                << sig(idx, widthOf(idx), lane) << " < "
                << std::to_string(mt.shape[i]) << "))\n"
                << "    $error(\"index out of bounds at " << op.loc.file
                << ":" << op.loc.begin.line << ":" << op.loc.begin.col
                << "\");\n";
      }
    }

    void emitCall(const Operation &op, LaneCtx &lane) {
      const Function *callee = mod.find(op.callee);
      std::string inst = "c" + std::to_string(instanceCount++);
      std::string ev = evOf(op);
      logic << "  // call @" << op.callee << locComment(op) << "\n";
      // Result wires first.
      for (size_t i = 0; i < op.results.size(); ++i) {
        int w = widthOf(op.results[i]);
        logic << "  wire [" << (w - 1) << ":0] "
              << sig(op.results[i], w, lane) << ";\n";
      }
      logic << "  " << sanitize(op.callee) << " " << inst << " (\n"
            << "    .clk(clk), .rst(rst), .start(" << ev << ")";
      for (size_t i = 0; i < op.operands.size() && callee &&
                         i < callee->params.size();
           ++i) {
        const ValueDef &pd = callee->val(callee->params[i].value);
        std::string pname = sanitize(pd.name);
        if (pd.type.isMemref()) {
          // Dedicated wires, OR'd into the caller-side port mux.
          const MemrefType &mt = *pd.type.memref;
          std::string prefix = inst + "_" + pname;
          declareInstancePortWires(prefix, mt);
          wireInstancePort(logic, prefix, pname, mt);
          portInstances[op.operands[i]].push_back({prefix, pd.type.memref.get()});
        } else {
          logic << ",\n    .v_" << pname << "("
                << sig(op.operands[i], pd.type.width, lane) << ")";
        }
      }
      logic << ",\n    .done()";
      for (size_t i = 0; i < op.results.size(); ++i)
        logic << ",\n    .res" << i << "("
              << sig(op.results[i], widthOf(op.results[i]), lane) << ")";
      logic << "\n  );\n";
    }

    void declareInstancePortWires(const std::string &prefix,
                                  const MemrefType &mt) {
      int aw = std::max(1, clog2(mt.wordsPerBank()));
      for (int64_t b = 0; b < mt.banks(); ++b) {
        std::string pn =
            prefix + (mt.banks() > 1 ? "_b" + std::to_string(b) : "");
        logic << "  wire [" << (aw - 1) << ":0] " << pn << "_addr;\n";
        if (mt.canWrite()) {
          logic << "  wire [0:0] " << pn << "_we;\n";
          logic << "  wire [" << (mt.elemWidth - 1) << ":0] " << pn
                << "_wdata;\n";
        }
      }
    }

    void wireInstancePort(std::ostringstream &os, const std::string &prefix,
                          const std::string &pname, const MemrefType &mt) {
      for (int64_t b = 0; b < mt.banks(); ++b) {
        std::string suffix = mt.banks() > 1 ? "_b" + std::to_string(b) : "";
        os << ",\n    ." << pname << suffix << "_addr(" << prefix << suffix
           << "_addr)";
        if (mt.canWrite()) {
          os << ",\n    ." << pname << suffix << "_we(" << prefix << suffix
             << "_we)";
          os << ",\n    ." << pname << suffix << "_wdata(" << prefix
             << suffix << "_wdata)";
        }
        if (mt.canRead())
          os << ",\n    ." << pname << suffix << "_rdata(" << prefix
             << suffix << "_rdata_in)";
      }
    }

    void emitAlloc(const Operation &op) {
      const MemrefType &mt = *fn.val(op.results[0]).type.memref;
      std::string mem = "m_" + names[op.results[0]];
      std::string attr;
      if (!opts.ramStyle.empty())
        attr = "(* ram_style = \"" + opts.ramStyle + "\" *) ";
      for (int64_t b = 0; b < mt.banks(); ++b)
        logic << "  " << attr << "reg [" << (mt.elemWidth - 1) << ":0] "
              << mem << "_b" << b << " [0:" << (mt.wordsPerBank() - 1)
              << "];" << locComment(op) << "\n";
      memories.push_back({{"name", fn.val(op.results[0]).name},
                          {"banks", mt.banks()},
                          {"words", mt.wordsPerBank()},
                          {"width", mt.elemWidth},
                          {"storage",
                           mt.storage == Storage::Reg ? "reg" : "ram"}});
      // Every result is a port onto this storage; their muxed signals are
      // declared here and wired to the arrays.
      for (ValueId r : op.results) {
        const MemrefType &pt = *fn.val(r).type.memref;
        emitPortDecl(logic, names[r], pt, true);
        portOrder.push_back(r);
        portInternal[r] = true;
        for (int64_t b = 0; b < pt.banks(); ++b) {
          std::string pn = bankName(r, b);
          std::string arr = mem + "_b" + std::to_string(b);
          if (pt.canWrite())
            logic << "  always @(posedge clk) if (" << pn << "_we) " << arr
                  << "[" << pn << "_addr] <= " << pn << "_wdata;\n";
          if (pt.canRead()) {
            if (pt.storage == Storage::Reg) {
              logic << "  assign " << pn << "_rdata = " << arr << "[" << pn
                    << "_addr];\n";
            } else {
              logic << "  reg [" << (pt.elemWidth - 1) << ":0] " << pn
                    << "_rdata_q;\n";
              logic << "  always @(posedge clk) " << pn << "_rdata_q <= "
                    << arr << "[" << pn << "_addr];\n";
              logic << "  assign " << pn << "_rdata = " << pn
                    << "_rdata_q;\n";
            }
          }
        }
      }
    }

    void emitLoop(const Operation &op, LaneCtx &lane) {
      const LoopTiming &lt = an.loopTiming(op);
      std::string tn = names[op.iterTime];
      std::string fire = evOf(op);
      logic << "  // " << opcodeName(op.op) << " "
            << fn.val(op.inductionVar).name << ": trip " << lt.trip
            << ", ii " << lt.ii << ", latency " << lt.bodyLatency
            << locComment(op) << "\n";
      logic << "  reg lp_" << tn << "_d;\n";
      logic << "  always @(posedge clk) lp_" << tn << "_d <= rst ? 1'b0 : "
            << fire << ";\n";
      eventRegs += 1;
      if (op.op == Opcode::UnrollFor) {
        emitUnrollBody(op, lane, lt);
        return;
      }
      int tw = std::max(1, clog2(std::max<int64_t>(lt.trip, 2)));
      // Re-fire II cycles after each non-final iteration pulse.
      logic << "  wire ev_" << tn << "_0 = lp_" << tn << "_d | lp_" << tn
            << "_again;\n";
      logic << "  reg [" << (tw - 1) << ":0] lp_" << tn << "_n;\n";
      logic << "  wire lp_" << tn << "_last = ev_" << tn << "_0 && (lp_"
            << tn << "_n == " << tw << "'d" << (lt.trip - 1) << ");\n";
      logic << "  reg [" << (lt.ii - 1) << ":0] lp_" << tn << "_rf;\n";
      logic << "  always @(posedge clk) lp_" << tn << "_rf <= rst ? "
            << lt.ii << "'d0 : ";
      if (lt.ii == 1)
        logic << "(ev_" << tn << "_0 & ~lp_" << tn << "_last);\n";
      else
        logic << "{lp_" << tn << "_rf[" << (lt.ii - 2) << ":0], ev_" << tn
              << "_0 & ~lp_" << tn << "_last};\n";
      logic << "  wire lp_" << tn << "_again = lp_" << tn << "_rf["
            << (lt.ii - 1) << "];\n";
      logic << "  always @(posedge clk) begin\n"
            << "    if (" << fire << ") lp_" << tn << "_n <= " << tw
            << "'d0;\n"
            << "    else if (ev_" << tn << "_0) lp_" << tn << "_n <= lp_"
            << tn << "_n + " << tw << "'d1;\n  end\n";
      eventRegs += tw + lt.ii;
      // Induction variable and strength-reduced counters.
      emitCounter(op, fire, tn, op.inductionVar, widthOf(op.inductionVar),
                  *fn.constValue(op.operands[0]),
                  *fn.constValue(op.operands[2]));
      for (auto &c : op.counters)
        emitCounter(op, fire, tn, c.result, c.width, c.init, c.step);
      // Completion pulse: body latency after the last iteration pulse.
      if (op.completionTime != kNoValue)
        emitCompletion(op, "lp_" + tn + "_last", lt.bodyLatency);
      LaneCtx inner = lane; // loop bodies inherit the lane environment
      emitRegion(op.body, inner);
    }

    void emitCounter(const Operation &op, const std::string &fire,
                     const std::string &tn, ValueId v, int w, int64_t init,
                     int64_t step) {
      std::string r = "v_" + names[v];
      logic << "  reg [" << (w - 1) << ":0] " << r << ";\n";
      logic << "  always @(posedge clk) begin\n"
            << "    if (" << fire << ") " << r << " <= " << w << "'d"
            << maskToWidth((uint64_t)init, w) << ";\n"
            << "    else if (ev_" << tn << "_0) " << r << " <= " << r
            << " + " << w << "'d" << maskToWidth((uint64_t)step, w)
            << ";\n  end\n";
      counters.push_back({{"name", fn.val(v).name}, {"width", w}});
    }

    void emitCompletion(const Operation &op, const std::string &lastPulse,
                        int64_t latency) {
      std::string cn = names[op.completionTime];
      if (latency == 0) {
        logic << "  wire ev_" << cn << "_0 = " << lastPulse << ";\n";
        return;
      }
      logic << "  reg [" << (latency - 1) << ":0] lp_" << cn << "_sr;\n";
      logic << "  always @(posedge clk) lp_" << cn << "_sr <= rst ? "
            << latency << "'d0 : ";
      if (latency == 1)
        logic << lastPulse << ";\n";
      else
        logic << "{lp_" << cn << "_sr[" << (latency - 2) << ":0], "
              << lastPulse << "};\n";
      logic << "  wire ev_" << cn << "_0 = lp_" << cn << "_sr["
            << (latency - 1) << "];\n";
      eventRegs += latency;
    }

    void emitUnrollBody(const Operation &op, LaneCtx &lane,
                        const LoopTiming &lt) {
      std::string tn = names[op.iterTime];
      logic << "  wire ev_" << tn << "_0 = lp_" << tn << "_d;\n";
      if (op.completionTime != kNoValue)
        emitCompletion(op, "lp_" + tn + "_d", lt.bodyLatency);
      int64_t lb = *fn.constValue(op.operands[0]);
      int64_t step = *fn.constValue(op.operands[2]);
      std::set<ValueId> bodyDefs;
      std::vector<const Operation *> stack;
      walkOps(op.body, stack, [&](const Operation &b, auto &) {
        for (ValueId r : b.results)
          bodyDefs.insert(r);
      });
      for (int64_t k = 0; k < lt.trip; ++k) {
        LaneCtx lc = lane;
        lc.env[op.inductionVar] = lb + k * step;
        lc.suffix = lane.suffix + "_l" + std::to_string(k);
        lc.local.insert(bodyDefs.begin(), bodyDefs.end());
        logic << "  // lane " << k << "\n";
        emitRegion(op.body, lc);
      }
    }

    void emitReturn(const Operation &op, LaneCtx &lane) {
      logic << "  assign done = " << evOf(op) << ";" << locComment(op)
            << "\n";
      for (size_t i = 0; i < op.operands.size(); ++i)
        logic << "  assign res" << i << " = "
              << sig(op.operands[i], fn.results[i].type.width, lane)
              << ";\n";
    }

    //===--- module-level wiring ------------------------------------------===//

    void emitEventSpines() {
      text << "\n  // event spines\n";
      for (auto &[root, offs] : eventNeed) {
        int64_t maxOff = *offs.rbegin();
        if (maxOff == 0)
          continue;
        std::string n = names[root];
        text << "  reg [" << (maxOff - 1) << ":0] ev_" << n << "_sr;\n";
        text << "  always @(posedge clk) ev_" << n << "_sr <= rst ? "
             << maxOff << "'d0 : ";
        if (maxOff == 1)
          text << "ev_" << n << "_0;\n";
        else
          text << "{ev_" << n << "_sr[" << (maxOff - 2) << ":0], ev_" << n
               << "_0};\n";
        for (int64_t o : offs)
          if (o > 0)
            text << "  wire ev_" << n << "_" << o << " = ev_" << n << "_sr["
                 << (o - 1) << "];\n";
        eventRegs += maxOff;
      }
    }

    void emitPortMuxes() {
      text << "\n  // port muxes\n";
      for (ValueId port : portOrder) {
        const MemrefType &mt = *fn.val(port).type.memref;
        int aw = std::max(1, clog2(mt.wordsPerBank()));
        auto &uses = portUse[port];
        auto &insts = portInstances[port];
        for (int64_t b = 0; b < mt.banks(); ++b) {
          std::string pn = bankName(port, b);
          std::string bsuf = mt.banks() > 1 ? "_b" + std::to_string(b)
                                            : std::string();
          std::string addr, we, wdata;
          std::vector<std::string> evs;
          for (auto &u : uses) {
            if (u.bank != b)
              continue;
            addr += (addr.empty() ? "" : "\n      | ") + ("(" + u.event +
                    " ? " + u.addr + " : " + std::to_string(aw) + "'d0)");
            evs.push_back(u.event);
            if (u.isWrite) {
              we += (we.empty() ? "" : " | ") + u.event;
              wdata += (wdata.empty() ? "" : "\n      | ") + ("(" + u.event +
                       " ? " + u.data + " : " +
                       std::to_string(mt.elemWidth) + "'d0)");
            }
          }
          for (auto &iw : insts) {
            std::string ip = iw.prefix + bsuf;
            addr += (addr.empty() ? "" : "\n      | ") + ip + "_addr";
            if (mt.canWrite() && iw.type->canWrite()) {
              we += (we.empty() ? "" : " | ") + ip + "_we";
              wdata += (wdata.empty() ? "" : "\n      | ") + ip + "_wdata";
            }
            if (mt.canRead() && iw.type->canRead())
              text << "  wire [" << (mt.elemWidth - 1) << ":0] " << ip
                   << "_rdata_in = " << pn << "_rdata;\n";
          }
          text << "  assign " << pn << "_addr = "
               << (addr.empty() ? std::to_string(aw) + "'d0" : addr)
               << ";\n";
          if (mt.canWrite()) {
            text << "  assign " << pn << "_we = "
                 << (we.empty() ? "1'b0" : we) << ";\n";
            text << "  assign " << pn << "_wdata = "
                 << (wdata.empty() ? std::to_string(mt.elemWidth) + "'d0"
                                   : wdata)
                 << ";\n";
          }
          // One transaction per port bank per cycle.
          if (evs.size() > 1) {
            std::string cat;
            for (auto &e : evs)
              cat += (cat.empty() ? "" : ", ") + e;
            asserts << "  always @(posedge clk) if (!$onehot0({" << cat
                    << "}))\n    $error(\"port conflict on " << pn
                    << "\");\n";
          }
        }
      }
    }

    void emitAsserts() {
      std::string a = asserts.str();
      if (a.empty())
        return;
      text << "\n`ifdef HIRC_ASSERT\n" << a << "`endif\n";
    }

    void finishReport() {
      report = {{"name", fn.name},
                {"registers", delayRegs},
                {"delays", std::move(delays)},
                {"counters", std::move(counters)},
                {"event_registers", eventRegs},
                {"memories", std::move(memories)}};
    }
  };
};

} // namespace detail

inline BackendResult emitVerilog(const Module &mod,
                                 const BackendOptions &opts = {}) {
  return detail::VerilogEmitter(mod, opts).run();
}

} // namespace hirc

#endif
