#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "hirc/verifier.hpp"

using namespace hirc;
using hirc_test::parseKernel;

namespace {

std::vector<Diagnostic> verifyKernel(const std::string &name) {
  auto r = parseKernel(name);
  CAPTURE(name, renderDiagnostics(r.diags));
  REQUIRE(r.ok());
  return verify(r.module);
}

} // namespace

TEST_CASE("clean corpus kernels verify without diagnostics") {
  for (const char *k :
       {"transpose.hir", "stencil1d.hir", "histogram.hir", "gemm.hir",
        "conv2d.hir", "fifo.hir", "unroll4.hir", "task_parallel.hir",
        "delays_share.hir"}) {
    auto diags = verifyKernel(k);
    CAPTURE(k, renderDiagnostics(diags));
    CHECK(diags.empty());
  }
}

TEST_CASE("stale iteration value reported exactly once at the mem_write") {
  auto diags = verifyKernel("err_add.hir");
  CAPTURE(renderDiagnostics(diags));
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].severity == Severity::Error);
  CHECK(diags[0].cls == "stale-iteration-value");
  CHECK(diags[0].loc.begin.line == 8); // the mem_write
  CHECK(diags[0].loc.begin.col >= 1);
}

TEST_CASE("pipeline imbalance reported exactly once at the adder") {
  auto diags = verifyKernel("err_mac.hir");
  CAPTURE(renderDiagnostics(diags));
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].severity == Severity::Error);
  CHECK(diags[0].cls == "pipeline-imbalance");
  CHECK(diags[0].loc.begin.line == 8); // the add
  CHECK(diags[0].loc.begin.col >= 1);
}

TEST_CASE("timing mismatch reported exactly once") {
  auto diags = verifyKernel("err_timing.hir");
  CAPTURE(renderDiagnostics(diags));
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].cls == "timing-mismatch");
}

TEST_CASE("port conflict reported exactly once") {
  auto diags = verifyKernel("err_conflict.hir");
  CAPTURE(renderDiagnostics(diags));
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].cls == "port-conflict");
}

TEST_CASE("for loops with a zero initiation interval are rejected") {
  auto r = parse("def @z(%A : memref<4xi32, [packed], w>) at %t {\n"
                 "  for %i : i32 = 0 to 4 step 1 iter_time %ti at %t {\n"
                 "    mem_write %i to %A[%i] at %ti\n"
                 "    yield at %ti\n"
                 "  }\n"
                 "  return at %t offset 9\n"
                 "}\n",
                 "z.hir");
  REQUIRE(r.ok());
  auto diags = verify(r.module);
  bool found = false;
  for (auto &d : diags)
    found |= d.cls == "zero-ii" && d.severity == Severity::Error;
  CAPTURE(renderDiagnostics(diags));
  CHECK(found);
}

TEST_CASE("variable initiation intervals downgrade staleness to a warning") {
  // The inner loop's completion anchors the outer yield, so the outer II
  // is data dependent and the late use cannot be proven stale.
  auto r = parse(
      "def @w(%A : memref<4x4xi32, [packed, packed], r>, %n : i32 delay 0) at %t {\n"
      "  for %i : i32 = 0 to 4 step 1 iter_time %ti at %t {\n"
      "    %y = add %i, 1 : i32 at %ti\n"
      "    for %j : i32 = 0 to %n step 1 iter_time %tj at %ti {\n"
      "      %v = mem_read %A[%i, %j] : i32 at %tj\n"
      "      yield at %tj offset 1\n"
      "    } yield_result %tjd\n"
      "    %z = add %y, 1 : i32 at %ti offset 1\n"
      "    yield at %tjd\n"
      "  }\n"
      "  return at %t offset 99\n"
      "}\n",
      "w.hir");
  CAPTURE(renderDiagnostics(r.diags));
  REQUIRE(r.ok());
  auto diags = verify(r.module);
  CAPTURE(renderDiagnostics(diags));
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].severity == Severity::Warning);
  CHECK(diags[0].cls == "stale-iteration-value");
}

TEST_CASE("loop timing analysis matches hand computation") {
  auto r = parseKernel("stencil1d.hir");
  REQUIRE(r.ok());
  const Function &f = r.module.functions[0];
  FnAnalysis an(r.module, f);
  REQUIRE(f.body[0].op == Opcode::For);
  const LoopTiming &lt = an.loopTiming(f.body[0]);
  CHECK(lt.iiConst);
  CHECK(lt.ii == 1);
  CHECK(lt.tripConst);
  CHECK(lt.trip == 64);
  CHECK(lt.latencyConst);
  CHECK(lt.bodyLatency == 2);
  CHECK(lt.completionConst);
  CHECK(lt.completion == 1 + 63 * 1 + 2);
}

TEST_CASE("nested loop completion composes through completion anchors") {
  auto r = parseKernel("gemm.hir");
  REQUIRE(r.ok());
  const Function &f = r.module.functions[0];
  FnAnalysis an(r.module, f);
  const Operation &iLoop = f.body[0];
  const Operation &jLoop = iLoop.body[0];
  const Operation &kLoop = jLoop.body[0];
  CHECK(an.loopTiming(kLoop).completion == 1 + 15 * 2 + 2);  // 33
  CHECK(an.loopTiming(jLoop).completion == 1 + 15 * 33 + 33); // 529
  CHECK(an.loopTiming(iLoop).completion == 1 + 15 * 529 + 529);
  // The function-level completion anchor resolves back to the entry.
  CanonicalInstant done =
      an.deepResolve(resolveTime(f, {iLoop.completionTime, 0}));
  CHECK(done.root == f.rootTime);
  CHECK(done.offset == 1 + 15 * 529 + 529);
}

TEST_CASE("deep delays that span iterations warn") {
  auto r = parse("def @d(%A : memref<8xi32, [packed], r>) at %t {\n"
                 "  for %i : i32 = 0 to 8 step 1 iter_time %ti at %t {\n"
                 "    %x = mem_read %A[%i] : i32 at %ti\n"
                 "    %y = delay %x by 3 at %ti offset 1\n"
                 "    yield at %ti offset 1\n"
                 "  }\n"
                 "  return at %t offset 12\n"
                 "}\n",
                 "d.hir");
  REQUIRE(r.ok());
  auto diags = verify(r.module);
  CAPTURE(renderDiagnostics(diags));
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].severity == Severity::Warning);
  CHECK(diags[0].cls == "stale-iteration-value");
}
