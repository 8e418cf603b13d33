#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "hirc/passes.hpp"
#include "hirc/printer.hpp"

using namespace hirc;
using hirc_test::parseKernel;

namespace {

Module parsed(const std::string &src) {
  auto r = parse(src, "pass.hir");
  CAPTURE(renderDiagnostics(r.diags));
  REQUIRE(r.ok());
  return std::move(r.module);
}

std::vector<PassReport> runClean(Module &mod,
                                 const std::vector<std::string> &passes) {
  std::vector<Diagnostic> diags;
  auto reports = runPipeline(mod, passes, diags);
  CAPTURE(renderDiagnostics(diags));
  REQUIRE_FALSE(hasErrors(diags));
  return reports;
}

const Operation *findOp(const Function &fn, Opcode oc) {
  const Operation *found = nullptr;
  walkOps(fn, [&](const Operation &op, auto &) {
    if (op.op == oc && !found)
      found = &op;
  });
  return found;
}

size_t countOpcode(const Function &fn, Opcode oc) {
  size_t n = 0;
  walkOps(fn, [&](const Operation &op, auto &) { n += op.op == oc; });
  return n;
}

} // namespace

TEST_CASE("constprop folds constant expressions and identities") {
  Module mod = parsed(
      "def @f(%x : i32 delay 0) -> (i32 delay 0, i32 delay 0) at %t {\n"
      "  %c = constant 3\n"
      "  %a = add %c, 4 : i32 at %t\n"     // -> 7
      "  %b = mult %a, 2 : i32 at %t\n"    // -> 14
      "  %p = mult %x, 1 : i32 at %t\n"    // -> %x
      "  %q = add %p, 0 : i32 at %t\n"     // -> %x
      "  %z = mult %x, 0 : i32 at %t\n"    // -> 0
      "  %r = add %q, %z : i32 at %t\n"    // -> add %x, 0 -> %x (2nd round)
      "  return %r, %b at %t\n"
      "}\n");
  runClean(mod, {"constprop", "constprop"});
  const Function &f = mod.functions[0];
  // Everything folds away; only the return remains.
  REQUIRE(countOps(f.body) == 1);
  REQUIRE(f.body[0].op == Opcode::Return);
  CHECK(f.constValue(f.body[0].operands[1]) == 14);
  CHECK(f.val(f.body[0].operands[0]).name == "x");
}

TEST_CASE("constprop respects datapath wrap-around") {
  Module mod = parsed("def @f() -> (i8 delay 0) at %t {\n"
                      "  %a = add 100, 100 : i8 at %t\n"
                      "  return %a at %t\n"
                      "}\n");
  runClean(mod, {"constprop"});
  const Function &f = mod.functions[0];
  // The folded literal is the masked 8-bit word (200 == -56 as i8).
  CHECK(f.constValue(f.body[0].operands[0]) == 200);
}

TEST_CASE("cse merges identical ops at the same instant only") {
  Module mod = parsed("def @f(%x : i32 delay 0) -> (i32 delay 1) at %t {\n"
                      "  %a = add %x, 1 : i32 at %t\n"
                      "  %b = add %x, 1 : i32 at %t\n"
                      "  %s = sub %a, %b : i32 at %t\n"
                      "  %sd = delay %s by 1 at %t\n"
                      "  %c = add %sd, 1 : i32 at %t offset 1\n"
                      "  return %c at %t offset 1\n"
                      "}\n");
  auto reports = runClean(mod, {"cse"});
  CHECK(reports[0].merged == 1); // %b into %a; %c differs by instant
  const Function &f = mod.functions[0];
  CHECK(countOpcode(f, Opcode::Add) == 2);
  const Operation *sub = findOp(f, Opcode::Sub);
  REQUIRE(sub);
  CHECK(sub->operands[0] == sub->operands[1]);
}

TEST_CASE("cse merges duplicate reads of one port") {
  Module mod = parsed("def @f(%A : memref<8xi32, [packed], r>) -> (i32 delay 1) at %t {\n"
                      "  %a = mem_read %A[3] : i32 at %t\n"
                      "  %b = mem_read %A[3] : i32 at %t\n"
                      "  %s = add %a, %b : i32 at %t offset 1\n"
                      "  return %s at %t offset 1\n"
                      "}\n");
  auto reports = runClean(mod, {"cse"});
  CHECK(reports[0].merged == 1);
  CHECK(countOpcode(mod.functions[0], Opcode::MemRead) == 1);
}

TEST_CASE("strength reduction turns iv multiplies into counters") {
  Module mod = parsed(
      "def @f(%B : memref<64xi32, [packed], w>) at %t {\n"
      "  for %i : i32 = 0 to 16 step 1 iter_time %ti at %t {\n"
      "    %m = mult %i, 4 : i32 at %ti\n"
      "    %md = delay %m by 1 at %ti\n"
      "    %id = delay %i by 1 at %ti\n"
      "    mem_write %md to %B[%id] at %ti offset 1\n"
      "    yield at %ti offset 1\n"
      "  } yield_result %td\n"
      "  return at %td\n"
      "}\n");
  runClean(mod, {"strength_reduce"});
  const Function &f = mod.functions[0];
  CHECK(countOpcode(f, Opcode::Mult) == 0);
  const Operation *loop = findOp(f, Opcode::For);
  REQUIRE(loop);
  REQUIRE(loop->counters.size() == 1);
  CHECK(loop->counters[0].init == 0);
  CHECK(loop->counters[0].step == 4);
  CHECK(loop->counters[0].width == 32);
  // The counter result feeds the same consumers the multiply did.
  const Operation *d = findOp(f, Opcode::Delay);
  REQUIRE(d);
  CHECK(d->operands[0] == loop->counters[0].result);
}

TEST_CASE("narrow precision sizes counters to their bounds") {
  const int64_t ubs[] = {15, 16, 255, 256};
  const int want[] = {4, 5, 8, 9};
  for (int i = 0; i < 4; ++i) {
    int64_t ub = ubs[i];
    Module mod = parsed(
        "def @f(%B : memref<" + std::to_string(ub) +
        "xi32, [packed], w>) at %t {\n"
        "  for %i : i32 = 0 to " + std::to_string(ub) +
        " step 1 iter_time %ti at %t {\n"
        "    %id = delay %i by 1 at %ti\n"
        "    mem_write %id to %B[%id] at %ti offset 1\n"
        "    yield at %ti offset 1\n"
        "  } yield_result %td\n"
        "  return at %td\n"
        "}\n");
    runClean(mod, {"narrow_precision"});
    const Operation *loop = findOp(mod.functions[0], Opcode::For);
    REQUIRE(loop);
    CAPTURE(ub);
    CHECK(mod.functions[0].val(loop->inductionVar).type.width == want[i]);
  }
}

TEST_CASE("delay dedup rewrites the 2,5 pair into a 2+3 chain") {
  auto r = parseKernel("delays_share.hir");
  REQUIRE(r.ok());
  Module mod = std::move(r.module);
  runClean(mod, {"dedup_time_and_delays"});
  const Function &f = mod.functions[0];
  std::vector<const Operation *> delays;
  walkOps(f, [&](const Operation &op, auto &) {
    if (op.op == Opcode::Delay)
      delays.push_back(&op);
  });
  REQUIRE(delays.size() == 2);
  int64_t total = delays[0]->amount + delays[1]->amount;
  CHECK(total == 5);
  // The long delay taps the short one.
  CHECK(delays[1]->operands[0] == delays[0]->results[0]);
  CHECK(delays[1]->amount == 3);
  CHECK(delays[1]->sched->offset == 2);
}

TEST_CASE("equivalent derived time variables merge") {
  Module mod = parsed("def @f(%x : i32 delay 0) -> (i32 delay 2) at %t {\n"
                      "  %t1 = time %t offset 2\n"
                      "  %t2 = time %t offset 2\n"
                      "  %xd = delay %x by 2 at %t\n"
                      "  %a = add %xd, 1 : i32 at %t1\n"
                      "  %b = add %a, 0 : i32 at %t2\n"
                      "  return %b at %t\n"
                      "}\n");
  auto reports = runClean(mod, {"dedup_time_and_delays"});
  CHECK(reports[0].merged == 1);
  CHECK(countOpcode(mod.functions[0], Opcode::TimeDef) == 1);
}

TEST_CASE("full pipeline keeps every corpus kernel verifiable") {
  for (const char *k :
       {"transpose.hir", "stencil1d.hir", "histogram.hir", "gemm.hir",
        "conv2d.hir", "fifo.hir", "unroll4.hir", "task_parallel.hir",
        "delays_share.hir"}) {
    auto r = parseKernel(k);
    CAPTURE(k);
    REQUIRE(r.ok());
    Module mod = std::move(r.module);
    std::vector<Diagnostic> diags;
    runPipeline(mod, allPassNames(), diags);
    CAPTURE(renderDiagnostics(diags));
    CHECK_FALSE(hasErrors(diags));
    // The optimized module still round-trips through text.
    auto rt = parse(print(mod), "rt.hir");
    CAPTURE(print(mod), renderDiagnostics(rt.diags));
    CHECK(rt.ok());
    CHECK(structurallyEqual(mod, rt.module));
  }
}

TEST_CASE("a pipeline that breaks invariants is reported") {
  Module mod = parsed("def @f(%x : i32 delay 0) -> (i32 delay 0) at %t {\n"
                      "  return %x at %t\n"
                      "}\n");
  std::vector<Diagnostic> diags;
  runPipeline(mod, {"no_such_pass"}, diags);
  REQUIRE(hasErrors(diags));
  CHECK(diags[0].cls == "unknown-pass");
}
