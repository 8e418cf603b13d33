#ifndef HIRC_PRINTER_HPP
#define HIRC_PRINTER_HPP

#include <map>
#include <sstream>
#include <string>

#include "hirc/ir.hpp"

namespace hirc {

namespace detail {

class ModulePrinter {
public:
  explicit ModulePrinter(const Module &mod) : mod(mod) {}

  std::string print() {
    for (auto &f : mod.functions)
      printFunction(f);
    return os.str();
  }

private:
  const Module &mod;
  std::ostringstream os;
  const Function *fn = nullptr;
  int depth = 0;

  void indent() {
    for (int i = 0; i < depth; ++i)
      os << "  ";
  }

  std::string typeStr(const Type &t) {
    switch (t.kind) {
    case TypeKind::Int: return "i" + std::to_string(t.width);
    case TypeKind::Float: return "f" + std::to_string(t.width);
    case TypeKind::Const: return "const";
    case TypeKind::Time: return "!time";
    case TypeKind::Memref: return memrefStr(*t.memref);
    }
    return "?";
  }

  std::string memrefStr(const MemrefType &mt) {
    std::string s = "memref<";
    for (auto e : mt.shape)
      s += std::to_string(e) + "x";
    s += (mt.elemKind == TypeKind::Float ? "f" : "i") +
         std::to_string(mt.elemWidth);
    s += ", [";
    for (size_t i = 0; i < mt.dims.size(); ++i) {
      if (i)
        s += ", ";
      s += mt.dims[i] == DimKind::Dist ? "dist" : "packed";
    }
    s += "], ";
    s += mt.port == Port::Read ? "r" : mt.port == Port::Write ? "w" : "rw";
    if (mt.storage == Storage::Reg)
      s += ", reg";
    s += ">";
    return s;
  }

  std::string operandStr(ValueId v) {
    const ValueDef &d = fn->val(v);
    if (d.isLiteral)
      return std::to_string(d.literal);
    return "%" + d.name;
  }

  std::string timeStr(const TimeExpr &te) {
    std::string s = "%" + fn->val(te.base).name;
    if (te.offset != 0)
      s += " offset " + std::to_string(te.offset);
    return s;
  }

  void printSignature(const Function &f) {
    os << "@" << f.name << "(";
    for (size_t i = 0; i < f.params.size(); ++i) {
      if (i)
        os << ", ";
      const ValueDef &d = f.val(f.params[i].value);
      os << "%" << d.name << " : " << typeStr(d.type);
      if (!d.type.isMemref() && !d.type.isConst())
        os << " delay " << f.params[i].delay;
    }
    os << ")";
    if (!f.results.empty()) {
      os << " -> (";
      for (size_t i = 0; i < f.results.size(); ++i) {
        if (i)
          os << ", ";
        os << typeStr(f.results[i].type) << " delay " << f.results[i].delay;
      }
      os << ")";
    }
  }

  void printFunction(const Function &f) {
    fn = &f;
    if (f.isExtern) {
      os << "extern ";
      printSignature(f);
      os << "\n\n";
      return;
    }
    os << "def ";
    printSignature(f);
    os << " at %" << f.val(f.rootTime).name << " {\n";
    depth = 1;
    printRegion(f.body);
    os << "}\n\n";
  }

  void printRegion(const std::vector<Operation> &region) {
    for (auto &op : region)
      printOp(op);
  }

  void printOp(const Operation &op) {
    indent();
    switch (op.op) {
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mult:
      os << operandStr(op.results[0]) << " = " << opcodeName(op.op) << " "
         << operandStr(op.operands[0]) << ", " << operandStr(op.operands[1])
         << " : " << typeStr(fn->val(op.results[0]).type) << " at "
         << timeStr(*op.sched) << "\n";
      break;
    case Opcode::Select:
      os << operandStr(op.results[0]) << " = select "
         << operandStr(op.operands[0]) << ", " << operandStr(op.operands[1])
         << ", " << operandStr(op.operands[2]) << " : "
         << typeStr(fn->val(op.results[0]).type) << " at "
         << timeStr(*op.sched) << "\n";
      break;
    case Opcode::BitSlice:
      os << operandStr(op.results[0]) << " = bit_slice "
         << operandStr(op.operands[0]) << "[" << op.hi << ":" << op.lo
         << "] : " << typeStr(fn->val(op.results[0]).type) << " at "
         << timeStr(*op.sched) << "\n";
      break;
    case Opcode::MemRead: {
      os << operandStr(op.results[0]) << " = mem_read "
         << operandStr(op.operands[0]) << "[";
      for (size_t i = 1; i < op.operands.size(); ++i)
        os << (i > 1 ? ", " : "") << operandStr(op.operands[i]);
      os << "] : " << typeStr(fn->val(op.results[0]).type) << " at "
         << timeStr(*op.sched) << "\n";
      break;
    }
    case Opcode::MemWrite: {
      os << "mem_write " << operandStr(op.operands[0]) << " to "
         << operandStr(op.operands[1]) << "[";
      for (size_t i = 2; i < op.operands.size(); ++i)
        os << (i > 2 ? ", " : "") << operandStr(op.operands[i]);
      os << "] at " << timeStr(*op.sched) << "\n";
      break;
    }
    case Opcode::Delay:
      os << operandStr(op.results[0]) << " = delay "
         << operandStr(op.operands[0]) << " by " << op.amount << " at "
         << timeStr(*op.sched) << "\n";
      break;
    case Opcode::Constant:
      os << operandStr(op.results[0]) << " = constant " << op.amount << "\n";
      break;
    case Opcode::Alloc: {
      for (size_t i = 0; i < op.results.size(); ++i)
        os << (i ? ", " : "") << operandStr(op.results[i]);
      os << " = alloc : ";
      for (size_t i = 0; i < op.results.size(); ++i)
        os << (i ? ", " : "") << typeStr(fn->val(op.results[i]).type);
      os << "\n";
      break;
    }
    case Opcode::TimeDef: {
      const TimeVarInfo &tv = fn->val(op.results[0]).time;
      os << operandStr(op.results[0]) << " = time %"
         << fn->val(tv.parent).name;
      if (tv.parentOffset != 0)
        os << " offset " << tv.parentOffset;
      os << "\n";
      break;
    }
    case Opcode::Call: {
      for (size_t i = 0; i < op.results.size(); ++i)
        os << operandStr(op.results[i]) << (i + 1 < op.results.size() ? ", "
                                                                      : " = ");
      os << "call @" << op.callee << "(";
      for (size_t i = 0; i < op.operands.size(); ++i)
        os << (i ? ", " : "") << operandStr(op.operands[i]);
      os << ") at " << timeStr(*op.sched) << "\n";
      break;
    }
    case Opcode::Yield:
      os << "yield at " << timeStr(*op.sched) << "\n";
      break;
    case Opcode::Return: {
      os << "return";
      for (size_t i = 0; i < op.operands.size(); ++i)
        os << (i ? ", " : " ") << operandStr(op.operands[i]);
      os << " at " << timeStr(*op.sched) << "\n";
      break;
    }
    case Opcode::For:
    case Opcode::UnrollFor: {
      os << opcodeName(op.op) << " " << operandStr(op.inductionVar);
      if (op.op == Opcode::For)
        os << " : " << typeStr(fn->val(op.inductionVar).type);
      os << " = " << operandStr(op.operands[0]) << " to "
         << operandStr(op.operands[1]) << " step "
         << operandStr(op.operands[2]);
      for (auto &c : op.counters)
        os << " counter " << operandStr(c.result) << " = " << c.init
           << " step " << c.step << " : i" << c.width;
      os << " iter_time " << operandStr(op.iterTime) << " at "
         << timeStr(*op.sched) << " {\n";
      ++depth;
      printRegion(op.body);
      --depth;
      indent();
      os << "}";
      if (op.completionTime != kNoValue)
        os << " yield_result " << operandStr(op.completionTime);
      os << "\n";
      break;
    }
    }
  }
};

//===----------------------------------------------------------------------===//
// Structural equality
//===----------------------------------------------------------------------===//

struct StructEq {
  const Function *fa = nullptr, *fb = nullptr;
  std::map<ValueId, ValueId> map;

  bool values(ValueId a, ValueId b) {
    if ((a == kNoValue) != (b == kNoValue))
      return false;
    if (a == kNoValue)
      return true;
    const ValueDef &da = fa->val(a), &db = fb->val(b);
    if (da.type.isConst() && db.type.isConst())
      return da.literal == db.literal;
    auto it = map.find(a);
    if (it != map.end())
      return it->second == b;
    if (!(da.type == db.type))
      return false;
    map[a] = b;
    return true;
  }

  bool time(const std::optional<TimeExpr> &a,
            const std::optional<TimeExpr> &b) {
    if (a.has_value() != b.has_value())
      return false;
    if (!a)
      return true;
    return a->offset == b->offset && values(a->base, b->base);
  }

  bool region(const std::vector<Operation> &ra,
              const std::vector<Operation> &rb) {
    if (ra.size() != rb.size())
      return false;
    for (size_t i = 0; i < ra.size(); ++i)
      if (!operation(ra[i], rb[i]))
        return false;
    return true;
  }

  bool operation(const Operation &a, const Operation &b) {
    if (a.op != b.op || a.amount != b.amount || a.hi != b.hi ||
        a.lo != b.lo || a.callee != b.callee)
      return false;
    if (a.operands.size() != b.operands.size() ||
        a.results.size() != b.results.size() ||
        a.counters.size() != b.counters.size())
      return false;
    if (!time(a.sched, b.sched))
      return false;
    if (!values(a.inductionVar, b.inductionVar) ||
        !values(a.iterTime, b.iterTime))
      return false;
    for (size_t i = 0; i < a.counters.size(); ++i) {
      if (a.counters[i].init != b.counters[i].init ||
          a.counters[i].step != b.counters[i].step ||
          a.counters[i].width != b.counters[i].width ||
          !values(a.counters[i].result, b.counters[i].result))
        return false;
    }
    for (size_t i = 0; i < a.operands.size(); ++i)
      if (!values(a.operands[i], b.operands[i]))
        return false;
    for (size_t i = 0; i < a.results.size(); ++i)
      if (!values(a.results[i], b.results[i]))
        return false;
    if (!region(a.body, b.body))
      return false;
    if (!values(a.completionTime, b.completionTime))
      return false;
    return true;
  }

  bool function(const Function &a, const Function &b) {
    fa = &a;
    fb = &b;
    map.clear();
    if (a.name != b.name || a.isExtern != b.isExtern)
      return false;
    if (a.params.size() != b.params.size() ||
        a.results.size() != b.results.size())
      return false;
    for (size_t i = 0; i < a.params.size(); ++i) {
      if (a.params[i].delay != b.params[i].delay ||
          !values(a.params[i].value, b.params[i].value))
        return false;
    }
    for (size_t i = 0; i < a.results.size(); ++i)
      if (!(a.results[i].type == b.results[i].type) ||
          a.results[i].delay != b.results[i].delay)
        return false;
    if (!values(a.rootTime, b.rootTime))
      return false;
    return region(a.body, b.body);
  }
};

} // namespace detail

// Deterministic textual form; parse(print(m)) is structurally identical
// to m and print is a fixed point of parse-then-print.
inline std::string print(const Module &mod) {
  return detail::ModulePrinter(mod).print();
}

// Structural identity up to SSA value renaming.
inline bool structurallyEqual(const Module &a, const Module &b) {
  if (a.functions.size() != b.functions.size())
    return false;
  detail::StructEq eq;
  for (size_t i = 0; i < a.functions.size(); ++i)
    if (!eq.function(a.functions[i], b.functions[i]))
      return false;
  return true;
}

} // namespace hirc

#endif
