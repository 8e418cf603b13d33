#ifndef HIRC_VALIDATE_HPP
#define HIRC_VALIDATE_HPP

#include <set>
#include <string>
#include <vector>

#include "hirc/ir.hpp"

namespace hirc {
namespace detail {

class StructureValidator {
public:
  StructureValidator(const Module &mod, const Function &fn)
      : mod(mod), fn(fn) {}

  std::vector<Diagnostic> run() {
    diags.clear();
    std::set<ValueId> scope;
    for (auto &p : fn.params)
      scope.insert(p.value);
    if (fn.rootTime != kNoValue)
      scope.insert(fn.rootTime);
    // Literals are visible everywhere.
    for (ValueId v = 0; v < (ValueId)fn.values.size(); ++v)
      if (fn.values[v].isLiteral)
        scope.insert(v);
    int returns = 0;
    validateRegion(fn.body, scope, /*inLoop=*/false, &returns);
    if (!fn.isExtern && returns == 0)
      error("missing-return", fn.loc, "function @" + fn.name + " has no return");
    return diags;
  }

private:
  const Module &mod;
  const Function &fn;
  std::vector<Diagnostic> diags;

  void error(const std::string &cls, const SourceSpan &loc,
             const std::string &msg) {
    diags.push_back({Severity::Error, cls, loc, msg, {}});
  }

  void checkUse(ValueId v, const std::set<ValueId> &scope,
                const Operation &op) {
    if (v == kNoValue) {
      error("use-before-def", op.loc, "missing operand");
      return;
    }
    if (!scope.count(v))
      error("use-before-def", op.loc,
            "value %" + fn.val(v).name +
                " is used before its definition or out of scope");
  }

  void checkSchedule(const Operation &op, const std::set<ValueId> &scope) {
    if (!op.sched) {
      if (op.op != Opcode::Constant && op.op != Opcode::Alloc &&
          op.op != Opcode::TimeDef)
        error("missing-schedule", op.loc,
              std::string(opcodeName(op.op)) + " has no schedule");
      return;
    }
    if (op.sched->offset < 0)
      error("negative-offset", op.loc, "time offsets must be non-negative");
    checkUse(op.sched->base, scope, op);
    if (op.sched->base != kNoValue && !fn.val(op.sched->base).type.isTime())
      error("type-error", op.loc, "schedule base is not a time variable");
  }

  void checkIntOperand(ValueId v, const Operation &op) {
    const Type &t = fn.val(v).type;
    if (!t.isInt() && !t.isConst())
      error("type-error", op.loc,
            "operand %" + fn.val(v).name + " must be an integer or constant");
  }

  void checkMemAccess(const Operation &op, ValueId mref,
                      const std::vector<ValueId> &indices, bool isWrite) {
    const Type &t = fn.val(mref).type;
    if (!t.isMemref()) {
      error("type-error", op.loc, "%" + fn.val(mref).name + " is not a memref");
      return;
    }
    const MemrefType &mt = *t.memref;
    if (indices.size() != mt.shape.size()) {
      error("index-arity", op.loc,
            "memref has " + std::to_string(mt.shape.size()) +
                " dimensions but " + std::to_string(indices.size()) +
                " indices were given");
      return;
    }
    if (isWrite && !mt.canWrite())
      error("port-kind-mismatch", op.loc,
            "mem_write on a read-only memref port");
    if (!isWrite && !mt.canRead())
      error("port-kind-mismatch", op.loc,
            "mem_read on a write-only memref port");
    for (size_t i = 0; i < indices.size(); ++i) {
      if (mt.dims[i] == DimKind::Dist && !fn.isConstValue(indices[i]))
        error("dist-index-not-const", op.loc,
              "distributed dimension " + std::to_string(i) +
                  " must be indexed by a compile time constant");
      else
        checkIntOperand(indices[i], op);
    }
  }

  void validateRegion(const std::vector<Operation> &region,
                      std::set<ValueId> scope, bool inLoop, int *returns) {
    int yields = 0;
    for (const Operation &op : region) {
      validateOp(op, scope, inLoop, returns, yields);
      for (ValueId r : op.results)
        scope.insert(r);
      if (op.isLoop() && op.completionTime != kNoValue)
        scope.insert(op.completionTime);
    }
    if (inLoop && yields == 0)
      error("missing-yield", region.empty() ? fn.loc : region.front().loc,
            "loop body must contain exactly one yield");
  }

  void validateOp(const Operation &op, std::set<ValueId> &scope, bool inLoop,
                  int *returns, int &yields) {
    switch (op.op) {
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mult:
      checkSchedule(op, scope);
      for (ValueId v : op.operands) {
        checkUse(v, scope, op);
        checkIntOperand(v, op);
      }
      break;
    case Opcode::Select:
      checkSchedule(op, scope);
      for (ValueId v : op.operands) {
        checkUse(v, scope, op);
        checkIntOperand(v, op);
      }
      break;
    case Opcode::BitSlice: {
      checkSchedule(op, scope);
      checkUse(op.operands[0], scope, op);
      checkIntOperand(op.operands[0], op);
      const Type &t = fn.val(op.operands[0]).type;
      if (op.hi < op.lo || (t.isInt() && op.hi >= t.width))
        error("bad-slice", op.loc, "bit_slice bounds out of range");
      if (!op.results.empty() &&
          fn.val(op.results[0]).type.width != op.hi - op.lo + 1)
        error("bad-slice", op.loc,
              "bit_slice result width must be hi-lo+1");
      break;
    }
    case Opcode::MemRead:
      checkSchedule(op, scope);
      checkUse(op.operands[0], scope, op);
      checkMemAccess(op, op.operands[0],
                     {op.operands.begin() + 1, op.operands.end()}, false);
      break;
    case Opcode::MemWrite:
      checkSchedule(op, scope);
      checkUse(op.operands[0], scope, op);
      checkIntOperand(op.operands[0], op);
      checkUse(op.operands[1], scope, op);
      checkMemAccess(op, op.operands[1],
                     {op.operands.begin() + 2, op.operands.end()}, true);
      break;
    case Opcode::Delay:
      checkSchedule(op, scope);
      checkUse(op.operands[0], scope, op);
      if (op.amount < 0)
        error("negative-offset", op.loc, "delay amount must be non-negative");
      break;
    case Opcode::Constant:
      break;
    case Opcode::Alloc: {
      if (op.results.empty()) {
        error("alloc-mismatch", op.loc, "alloc needs at least one memref");
        break;
      }
      const MemrefType &first = *fn.val(op.results[0]).type.memref;
      for (ValueId r : op.results) {
        const MemrefType &mt = *fn.val(r).type.memref;
        if (mt.shape != first.shape || mt.dims != first.dims ||
            mt.elemWidth != first.elemWidth || mt.storage != first.storage)
          error("alloc-mismatch", op.loc,
                "all ports of an alloc must agree on shape, element type, "
                "dimension kinds and storage");
      }
      break;
    }
    case Opcode::TimeDef: {
      checkUse(op.operands[0], scope, op);
      const TimeVarInfo &tv = fn.val(op.results[0]).time;
      if (tv.parentOffset < 0)
        error("negative-offset", op.loc, "time offsets must be non-negative");
      break;
    }
    case Opcode::Call: {
      checkSchedule(op, scope);
      for (ValueId v : op.operands)
        checkUse(v, scope, op);
      const Function *callee = mod.find(op.callee);
      if (!callee) {
        error("unknown-callee", op.loc, "unknown function @" + op.callee);
        break;
      }
      if (callee->params.size() != op.operands.size()) {
        error("call-arity-mismatch", op.loc,
              "@" + op.callee + " expects " +
                  std::to_string(callee->params.size()) + " arguments, got " +
                  std::to_string(op.operands.size()));
        break;
      }
      for (size_t i = 0; i < op.operands.size(); ++i) {
        const Type &pt = callee->val(callee->params[i].value).type;
        const Type &at = fn.val(op.operands[i]).type;
        if (pt.isMemref()) {
          if (!at.isMemref() || at.memref->shape != pt.memref->shape ||
              at.memref->elemWidth != pt.memref->elemWidth ||
              at.memref->dims != pt.memref->dims) {
            error("call-type-mismatch", op.loc,
                  "argument " + std::to_string(i) + " of @" + op.callee +
                      " has the wrong memref type");
          } else {
            bool needR = pt.memref->canRead(), needW = pt.memref->canWrite();
            if ((needR && !at.memref->canRead()) ||
                (needW && !at.memref->canWrite()))
              error("port-kind-mismatch", op.loc,
                    "argument " + std::to_string(i) + " of @" + op.callee +
                        " does not grant the required port access");
          }
        } else if (pt.isPrimitive()) {
          if (!at.isPrimitive() && !at.isConst())
            error("call-type-mismatch", op.loc,
                  "argument " + std::to_string(i) + " of @" + op.callee +
                      " must be a primitive value");
        }
      }
      if (op.results.size() != callee->results.size())
        error("result-count-mismatch", op.loc,
              "@" + op.callee + " returns " +
                  std::to_string(callee->results.size()) + " values, " +
                  std::to_string(op.results.size()) + " bound");
      break;
    }
    case Opcode::Yield:
      checkSchedule(op, scope);
      if (!inLoop)
        error("misplaced-yield", op.loc, "yield outside of a loop body");
      else if (++yields > 1)
        error("multiple-yield", op.loc,
              "loop body must contain exactly one yield");
      break;
    case Opcode::Return: {
      checkSchedule(op, scope);
      if (inLoop) {
        error("misplaced-return", op.loc, "return inside a loop body");
        break;
      }
      ++*returns;
      if (*returns > 1)
        error("multiple-return", op.loc, "function has multiple returns");
      if (op.operands.size() != fn.results.size())
        error("result-count-mismatch", op.loc,
              "function declares " + std::to_string(fn.results.size()) +
                  " results but return has " +
                  std::to_string(op.operands.size()) + " operands");
      for (ValueId v : op.operands)
        checkUse(v, scope, op);
      break;
    }
    case Opcode::For:
    case Opcode::UnrollFor: {
      checkSchedule(op, scope);
      for (ValueId v : op.operands) {
        checkUse(v, scope, op);
        checkIntOperand(v, op);
      }
      if (op.op == Opcode::UnrollFor)
        for (ValueId v : op.operands)
          if (!fn.isConstValue(v))
            error("unroll-bounds-not-const", op.loc,
                  "unroll bounds must be constant");
      // Loop body: the induction variable and iteration time variable are
      // visible only inside.
      std::set<ValueId> bodyScope = scope;
      bodyScope.insert(op.inductionVar);
      bodyScope.insert(op.iterTime);
      for (auto &c : op.counters)
        bodyScope.insert(c.result);
      int bodyReturns = 0;
      validateRegion(op.body, bodyScope, /*inLoop=*/true, &bodyReturns);
      break;
    }
    }
  }
};

} // namespace detail

// Structural validation: SSA dominance, region/time-variable scoping, yield
// cardinality, const-only distributed indices, constant unroll bounds, call
// signatures. Collects every violation instead of stopping at the first.
inline std::vector<Diagnostic> validateStructure(const Module &mod,
                                                 const Function &fn) {
  return detail::StructureValidator(mod, fn).run();
}

inline std::vector<Diagnostic> validateStructure(const Module &mod) {
  std::vector<Diagnostic> all;
  for (auto &fn : mod.functions) {
    auto d = validateStructure(mod, fn);
    all.insert(all.end(), d.begin(), d.end());
  }
  return all;
}

} // namespace hirc

#endif
