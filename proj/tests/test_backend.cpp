#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "helpers.hpp"
#include "hirc/backend.hpp"
#include "hirc/passes.hpp"

using namespace hirc;
using hirc_test::parseKernel;
using json = nlohmann::json;

namespace {

BackendResult emitKernel(const std::string &file,
                         const BackendOptions &opts = {}) {
  auto r = parseKernel(file);
  REQUIRE(r.ok());
  BackendResult res = emitVerilog(r.module, opts);
  CAPTURE(renderDiagnostics(res.diags));
  return res;
}

} // namespace

TEST_CASE("every corpus kernel lowers to Verilog") {
  for (const char *k :
       {"transpose.hir", "stencil1d.hir", "histogram.hir", "gemm.hir",
        "conv2d.hir", "fifo.hir", "unroll4.hir", "task_parallel.hir",
        "delays_share.hir"}) {
    CAPTURE(k);
    BackendResult res = emitKernel(k);
    REQUIRE(res.ok);
    CHECK(res.verilog.find("module ") != std::string::npos);
    CHECK(res.verilog.find("endmodule") != std::string::npos);
  }
}

TEST_CASE("emission is deterministic byte for byte") {
  for (const char *k : {"gemm.hir", "task_parallel.hir", "unroll4.hir"}) {
    CAPTURE(k);
    BackendResult a = emitKernel(k);
    BackendResult b = emitKernel(k);
    REQUIRE(a.ok);
    REQUIRE(b.ok);
    CHECK(a.verilog == b.verilog);
    CHECK(a.plan == b.plan);
    CHECK(a.report == b.report);
  }
}

TEST_CASE("the lowering plan mirrors canonical schedule instants") {
  for (const char *k : {"transpose.hir", "gemm.hir", "fifo.hir",
                        "conv2d.hir", "unroll4.hir"}) {
    CAPTURE(k);
    auto r = parseKernel(k);
    REQUIRE(r.ok());
    BackendResult res = emitVerilog(r.module);
    REQUIRE(res.ok);
    json plan = json::parse(res.plan);
    for (auto &pf : plan["functions"]) {
      const Function *fn = r.module.find(pf["name"].get<std::string>());
      REQUIRE(fn);
      // The plan lists scheduled ops in walk order; audit each entry
      // against an independent resolution of its schedule.
      std::vector<const Operation *> sched;
      walkOps(*fn, [&](const Operation &op, auto &) {
        if (op.sched)
          sched.push_back(&op);
      });
      REQUIRE(pf["ops"].size() == sched.size());
      for (size_t i = 0; i < sched.size(); ++i) {
        CanonicalInstant ci = resolveTime(*fn, *sched[i]->sched);
        REQUIRE(ci.valid);
        CAPTURE(pf["ops"][i].dump());
        CHECK(pf["ops"][i]["root"].get<std::string>() ==
              fn->val(ci.root).name);
        CHECK(pf["ops"][i]["depth"].get<int64_t>() == ci.offset);
        CHECK(pf["ops"][i]["line"].get<int>() == sched[i]->loc.begin.line);
      }
    }
  }
}

TEST_CASE("shared delay taps shrink the register count from 7 to 5") {
  auto r = parseKernel("delays_share.hir");
  REQUIRE(r.ok());
  BackendResult before = emitVerilog(r.module);
  REQUIRE(before.ok);
  CHECK(json::parse(before.report)["functions"][0]["registers"] == 7);

  std::vector<Diagnostic> diags;
  runPipeline(r.module, {"dedup_time_and_delays"}, diags);
  REQUIRE_FALSE(hasErrors(diags));
  BackendResult after = emitVerilog(r.module);
  REQUIRE(after.ok);
  CHECK(json::parse(after.report)["functions"][0]["registers"] == 5);
}

TEST_CASE("narrowed counters keep their width in the resource report") {
  const int64_t ubs[] = {15, 16, 255, 256};
  const int want[] = {4, 5, 8, 9};
  for (int i = 0; i < 4; ++i) {
    auto r = parse(
        "def @f(%B : memref<" + std::to_string(ubs[i]) +
            "xi32, [packed], w>) at %t {\n"
            "  for %i : i32 = 0 to " + std::to_string(ubs[i]) +
            " step 1 iter_time %ti at %t {\n"
            "    %id = delay %i by 1 at %ti\n"
            "    mem_write %id to %B[%id] at %ti offset 1\n"
            "    yield at %ti offset 1\n"
            "  } yield_result %td\n"
            "  return at %td\n"
            "}\n",
        "cnt.hir");
    REQUIRE(r.ok());
    std::vector<Diagnostic> diags;
    runPipeline(r.module, {"narrow_precision"}, diags);
    REQUIRE_FALSE(hasErrors(diags));
    BackendResult res = emitVerilog(r.module);
    REQUIRE(res.ok);
    json cnts = json::parse(res.report)["functions"][0]["counters"];
    REQUIRE(cnts.size() == 1);
    CAPTURE(ubs[i], cnts.dump());
    CHECK(cnts[0]["width"].get<int>() == want[i]);
  }
}

TEST_CASE("--top restricts emission to one function and its callees") {
  BackendResult res = emitKernel("task_parallel.hir", {"stencilB", ""});
  REQUIRE(res.ok);
  CHECK(res.verilog.find("module stencilB") != std::string::npos);
  CHECK(res.verilog.find("module stencilA") == std::string::npos);
  CHECK(res.verilog.find("module task_overlap") == std::string::npos);

  BackendResult all = emitKernel("task_parallel.hir", {"task_overlap", ""});
  REQUIRE(all.ok);
  // Callee modules precede their instantiation sites.
  size_t a = all.verilog.find("module stencilA");
  size_t b = all.verilog.find("module stencilB");
  size_t t = all.verilog.find("module task_overlap");
  REQUIRE(a != std::string::npos);
  REQUIRE(b != std::string::npos);
  REQUIRE(t != std::string::npos);
  CHECK(a < t);
  CHECK(b < t);
  CHECK(all.verilog.find("module task_sequential") == std::string::npos);
}

TEST_CASE("ram style attribute is forwarded to internal memories") {
  BackendResult res = emitKernel("fifo.hir", {"", "block"});
  REQUIRE(res.ok);
  CHECK(res.verilog.find("(* ram_style = \"block\" *)") !=
        std::string::npos);
}

TEST_CASE("assertions are fenced behind an ifdef") {
  BackendResult res = emitKernel("gemm.hir");
  REQUIRE(res.ok);
  CHECK(res.verilog.find("`ifdef HIRC_ASSERT") != std::string::npos);
  CHECK(res.verilog.find("$error") != std::string::npos);
}

TEST_CASE("dynamic loop bounds are rejected for hardware generation") {
  auto r = parse("def @f(%n : i32 delay 0, %B : memref<8xi32, [packed], "
                 "w>) at %t {\n"
                 "  for %i : i32 = 0 to %n step 1 iter_time %ti at %t {\n"
                 "    %id = delay %i by 1 at %ti\n"
                 "    mem_write %id to %B[%id] at %ti offset 1\n"
                 "    yield at %ti offset 1\n"
                 "  } yield_result %td\n"
                 "  return at %td\n"
                 "}\n",
                 "dyn.hir");
  REQUIRE(r.ok());
  BackendResult res = emitVerilog(r.module);
  CHECK_FALSE(res.ok);
  REQUIRE(hasErrors(res.diags));
  CHECK(res.diags[0].cls == "backend-non-static");
}

TEST_CASE("unrolled lanes appear once per lane with constant banks") {
  BackendResult res = emitKernel("unroll4.hir");
  REQUIRE(res.ok);
  CHECK(res.verilog.find("// lane 0") != std::string::npos);
  CHECK(res.verilog.find("// lane 3") != std::string::npos);
  CHECK(res.verilog.find("A_b3_addr") != std::string::npos);
}
