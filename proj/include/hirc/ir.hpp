#ifndef HIRC_IR_HPP
#define HIRC_IR_HPP

#include <cassert>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hirc/diag.hpp"

namespace hirc {

//===----------------------------------------------------------------------===//
// Types
//===----------------------------------------------------------------------===//

enum class TypeKind { Int, Float, Const, Time, Memref };
enum class DimKind { Packed, Dist };
enum class Port { Read, Write, ReadWrite };
enum class Storage { Ram, Reg };

struct MemrefType {
  TypeKind elemKind = TypeKind::Int;
  int elemWidth = 32;
  std::vector<int64_t> shape;   // positive extents
  std::vector<DimKind> dims;    // one per shape entry
  Port port = Port::ReadWrite;
  Storage storage = Storage::Ram;

  // Number of storage instances = product of distributed extents.
  int64_t banks() const {
    int64_t n = 1;
    for (size_t i = 0; i < shape.size(); ++i)
      if (dims[i] == DimKind::Dist)
        n *= shape[i];
    return n;
  }

  // Words per bank = product of packed extents.
  int64_t wordsPerBank() const {
    int64_t n = 1;
    for (size_t i = 0; i < shape.size(); ++i)
      if (dims[i] == DimKind::Packed)
        n *= shape[i];
    return n;
  }

  int64_t numElements() const {
    int64_t n = 1;
    for (int64_t e : shape)
      n *= e;
    return n;
  }

  bool canRead() const { return port != Port::Write; }
  bool canWrite() const { return port != Port::Read; }

  bool operator==(const MemrefType &o) const {
    return elemKind == o.elemKind && elemWidth == o.elemWidth &&
           shape == o.shape && dims == o.dims && port == o.port &&
           storage == o.storage;
  }
};

struct Type {
  TypeKind kind = TypeKind::Int;
  int width = 0; // Int/Float bit width
  std::shared_ptr<MemrefType> memref;

  static Type makeInt(int w) { return {TypeKind::Int, w, nullptr}; }
  static Type makeFloat(int w) { return {TypeKind::Float, w, nullptr}; }
  static Type makeConst() { return {TypeKind::Const, 0, nullptr}; }
  static Type makeTime() { return {TypeKind::Time, 0, nullptr}; }
  static Type makeMemref(MemrefType mt) {
    return {TypeKind::Memref, 0, std::make_shared<MemrefType>(std::move(mt))};
  }

  bool isInt() const { return kind == TypeKind::Int; }
  bool isConst() const { return kind == TypeKind::Const; }
  bool isTime() const { return kind == TypeKind::Time; }
  bool isMemref() const { return kind == TypeKind::Memref; }
  bool isPrimitive() const {
    return kind == TypeKind::Int || kind == TypeKind::Float;
  }

  bool operator==(const Type &o) const {
    if (kind != o.kind || width != o.width)
      return false;
    if (kind == TypeKind::Memref)
      return memref && o.memref && *memref == *o.memref;
    return true;
  }
};

//===----------------------------------------------------------------------===//
// Values and timing coordinates
//===----------------------------------------------------------------------===//

using ValueId = int32_t;
constexpr ValueId kNoValue = -1;

// A scheduling coordinate: base time variable + non-negative cycle offset.
struct TimeExpr {
  ValueId base = kNoValue;
  int64_t offset = 0;
};

enum class TimeOrigin { FunctionEntry, LoopIteration, LoopCompletion, Derived };

struct TimeVarInfo {
  TimeOrigin origin = TimeOrigin::FunctionEntry;
  // Derived time variables are a fixed delay from a parent time variable.
  ValueId parent = kNoValue;
  int64_t parentOffset = 0;
};

struct ValueDef {
  std::string name;
  Type type;
  bool isLiteral = false; // inline integer literal of const type
  // Const-typed values with a compile time integer. Unroll induction
  // variables are const-typed but lane dependent, so this stays false.
  bool knownConst = false;
  int64_t literal = 0;
  TimeVarInfo time; // meaningful for time-typed values
};

//===----------------------------------------------------------------------===//
// Operations
//===----------------------------------------------------------------------===//

enum class Opcode {
  For,
  UnrollFor,
  Yield,
  Return,
  Call,
  Add,
  Sub,
  Mult,
  BitSlice,
  Select,
  MemRead,
  MemWrite,
  Delay,
  Constant,
  Alloc,
  TimeDef,
};

inline const char *opcodeName(Opcode op) {
  switch (op) {
  case Opcode::For: return "for";
  case Opcode::UnrollFor: return "unroll_for";
  case Opcode::Yield: return "yield";
  case Opcode::Return: return "return";
  case Opcode::Call: return "call";
  case Opcode::Add: return "add";
  case Opcode::Sub: return "sub";
  case Opcode::Mult: return "mult";
  case Opcode::BitSlice: return "bit_slice";
  case Opcode::Select: return "select";
  case Opcode::MemRead: return "mem_read";
  case Opcode::MemWrite: return "mem_write";
  case Opcode::Delay: return "delay";
  case Opcode::Constant: return "constant";
  case Opcode::Alloc: return "alloc";
  case Opcode::TimeDef: return "time";
  }
  return "?";
}

// Strength-reduced induction product carried by a loop: the value steps by
// `step` every iteration starting from `init`, valid at the iteration time.
struct LoopCounter {
  ValueId result = kNoValue;
  int64_t init = 0;
  int64_t step = 0;
  int width = 32;
};

struct Operation {
  Opcode op = Opcode::Constant;
  // Operand conventions:
  //  Add/Sub/Mult: lhs, rhs       Select: cond, true, false
  //  BitSlice: value              Delay: value
  //  MemRead: memref, indices...  MemWrite: data, memref, indices...
  //  Call: args...                Return: results...
  //  For/UnrollFor: lb, ub, step
  std::vector<ValueId> operands;
  std::vector<ValueId> results;
  std::optional<TimeExpr> sched; // absent for Constant/Alloc/TimeDef
  int64_t amount = 0;            // Delay cycles / Constant value
  int hi = 0, lo = 0;            // BitSlice bounds
  std::string callee;            // Call target
  // Loop-only fields.
  ValueId inductionVar = kNoValue;
  ValueId iterTime = kNoValue;
  ValueId completionTime = kNoValue; // optional result time var
  std::vector<LoopCounter> counters;
  std::vector<Operation> body;
  SourceSpan loc;

  bool isLoop() const { return op == Opcode::For || op == Opcode::UnrollFor; }
};

//===----------------------------------------------------------------------===//
// Functions and modules
//===----------------------------------------------------------------------===//

struct Param {
  ValueId value = kNoValue;
  int64_t delay = 0; // scalar params: offset from the function root time
};

struct ResultDecl {
  Type type;
  int64_t delay = 0;
};

struct Function {
  std::string name;
  bool isExtern = false;
  std::vector<ValueDef> values; // all SSA values, literals included
  std::vector<Param> params;
  std::vector<ResultDecl> results;
  ValueId rootTime = kNoValue;
  std::vector<Operation> body;
  SourceSpan loc;

  const ValueDef &val(ValueId id) const { return values[id]; }
  ValueDef &val(ValueId id) { return values[id]; }

  ValueId addValue(std::string name, Type type) {
    values.push_back({std::move(name), std::move(type)});
    return static_cast<ValueId>(values.size() - 1);
  }

  ValueId addLiteral(int64_t v) {
    ValueDef d;
    d.name = std::to_string(v);
    d.type = Type::makeConst();
    d.isLiteral = true;
    d.knownConst = true;
    d.literal = v;
    values.push_back(std::move(d));
    return static_cast<ValueId>(values.size() - 1);
  }

  // Reuses an existing literal with the same value if there is one, so
  // value-identical constants compare equal by id.
  ValueId addLiteralInterned(int64_t v) {
    for (ValueId id = 0; id < (ValueId)values.size(); ++id)
      if (values[id].isLiteral && values[id].literal == v)
        return id;
    return addLiteral(v);
  }

  bool isConstValue(ValueId id) const { return values[id].type.isConst(); }

  // Literal or `constant` op results resolved during parsing share the
  // literal slot; this is the compile time integer of a const value.
  std::optional<int64_t> constValue(ValueId id) const {
    const ValueDef &d = values[id];
    if (d.type.isConst() && d.knownConst)
      return d.literal;
    return std::nullopt;
  }
};

struct Module {
  std::vector<Function> functions;

  const Function *find(const std::string &name) const {
    for (auto &f : functions)
      if (f.name == name)
        return &f;
    return nullptr;
  }
  Function *find(const std::string &name) {
    for (auto &f : functions)
      if (f.name == name)
        return &f;
    return nullptr;
  }
};

//===----------------------------------------------------------------------===//
// Time resolution
//===----------------------------------------------------------------------===//

// (root time variable, total constant offset). Instants with different
// roots (e.g. iteration variables of different loops) are not comparable.
struct CanonicalInstant {
  ValueId root = kNoValue;
  int64_t offset = 0;
  bool valid = false;

  bool comparable(const CanonicalInstant &o) const {
    return valid && o.valid && root == o.root;
  }
  bool operator==(const CanonicalInstant &o) const {
    return valid && o.valid && root == o.root && offset == o.offset;
  }
};

// Resolves chains of Derived parent links into a single (root, offset) pair.
// Idempotent: resolving an already canonical instant is the identity.
inline CanonicalInstant resolveTime(const Function &fn, TimeExpr e) {
  CanonicalInstant ci;
  if (e.base == kNoValue || !fn.val(e.base).type.isTime())
    return ci;
  ValueId base = e.base;
  int64_t off = e.offset;
  // Parent chains are short; cycles are rejected by structure validation.
  for (int guard = 0; guard < 1024; ++guard) {
    const TimeVarInfo &tv = fn.val(base).time;
    if (tv.origin != TimeOrigin::Derived || tv.parent == kNoValue) {
      ci.root = base;
      ci.offset = off;
      ci.valid = true;
      return ci;
    }
    off += tv.parentOffset;
    base = tv.parent;
  }
  return ci;
}

//===----------------------------------------------------------------------===//
// Latency model
//===----------------------------------------------------------------------===//

// Cycles from an operation's scheduled instant to its result (or, for
// mem_write, its observable effect). Memory writes take one cycle; reads
// take one cycle from RAM-backed memrefs and zero from register-backed
// ones; integer arithmetic is combinational.
inline int64_t latencyOf(const Function &fn, const Operation &op,
                         const Module *mod = nullptr) {
  switch (op.op) {
  case Opcode::MemWrite:
    return 1;
  case Opcode::MemRead: {
    const auto &mt = *fn.val(op.operands[0]).type.memref;
    return mt.storage == Storage::Reg ? 0 : 1;
  }
  case Opcode::Delay:
    return op.amount;
  case Opcode::Call: {
    // Max per-result delay; per-result validity is handled by callers
    // that need result-granular instants.
    if (!mod)
      return 0;
    const Function *callee = mod->find(op.callee);
    if (!callee)
      return 0;
    int64_t m = 0;
    for (auto &r : callee->results)
      m = std::max(m, r.delay);
    return m;
  }
  case Opcode::Add:
  case Opcode::Sub:
  case Opcode::Mult:
  case Opcode::BitSlice:
  case Opcode::Select:
    return 0;
  default:
    return 0;
  }
}

//===----------------------------------------------------------------------===//
// Traversal helpers
//===----------------------------------------------------------------------===//

// Visits every operation in the function, outermost first. The callback
// receives the chain of enclosing loop operations (empty at function scope).
inline void
walkOps(const std::vector<Operation> &region,
        std::vector<const Operation *> &loopStack,
        const std::function<void(const Operation &,
                                 const std::vector<const Operation *> &)> &cb) {
  for (const Operation &op : region) {
    cb(op, loopStack);
    if (op.isLoop()) {
      loopStack.push_back(&op);
      walkOps(op.body, loopStack, cb);
      loopStack.pop_back();
    }
  }
}

inline void
walkOps(const Function &fn,
        const std::function<void(const Operation &,
                                 const std::vector<const Operation *> &)> &cb) {
  std::vector<const Operation *> stack;
  walkOps(fn.body, stack, cb);
}

inline void walkOpsMut(std::vector<Operation> &region,
                       const std::function<void(Operation &)> &cb) {
  for (Operation &op : region) {
    cb(op);
    if (op.isLoop())
      walkOpsMut(op.body, cb);
  }
}

inline size_t countOps(const std::vector<Operation> &region) {
  size_t n = 0;
  for (auto &op : region) {
    ++n;
    if (op.isLoop())
      n += countOps(op.body);
  }
  return n;
}

// Two's-complement helpers for width-exact datapath arithmetic.
inline uint64_t maskToWidth(uint64_t v, int width) {
  if (width >= 64)
    return v;
  return v & ((uint64_t(1) << width) - 1);
}

inline int64_t signExtend(uint64_t v, int width) {
  if (width >= 64 || width <= 0)
    return static_cast<int64_t>(v);
  uint64_t sign = uint64_t(1) << (width - 1);
  v = maskToWidth(v, width);
  return static_cast<int64_t>((v ^ sign) - sign);
}

} // namespace hirc

#endif
