// Acceptance gate: one line per criterion, PASS / FAIL / SKIP.
// Exit code 0 only when nothing failed.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fuzzgen.hpp"
#include "helpers.hpp"
#include "hirc/backend.hpp"
#include "hirc/passes.hpp"
#include "hirc/printer.hpp"
#include "hirc/sim.hpp"
#include "hirc/verifier.hpp"

using namespace hirc;
using hirc_test::parseKernel;
using json = nlohmann::json;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string &what,
            const std::string &detail = "") {
  std::printf("%s  %2d  %s%s%s\n", ok ? "PASS" : "FAIL", n, what.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok)
    ++failures;
}

void reportSkip(int n, const std::string &what, const std::string &why) {
  std::printf("SKIP  %2d  %s -- %s\n", n, what.c_str(), why.c_str());
}

double secondsSince(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::vector<int64_t> randomI32(size_t n, uint32_t seed, int64_t lo = INT32_MIN,
                               int64_t hi = INT32_MAX) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int64_t> dist(lo, hi);
  std::vector<int64_t> v(n);
  for (auto &x : v)
    x = dist(rng);
  return v;
}

int32_t wrap32(uint64_t v) { return (int32_t)(uint32_t)v; }

//===---------------------------------------------------------------------===//
// 1. Broken schedules produce exactly one precise diagnostic, fast.
//===---------------------------------------------------------------------===//

void criterion1() {
  struct Case {
    const char *file;
    const char *cls;
    int line;
  } cases[] = {{"err_add.hir", "stale-iteration-value", 8},
               {"err_mac.hir", "pipeline-imbalance", 8}};
  bool ok = true;
  std::string detail;
  for (auto &c : cases) {
    auto t0 = std::chrono::steady_clock::now();
    auto r = parseKernel(c.file);
    if (!r.ok()) {
      ok = false;
      detail = std::string(c.file) + " failed to parse";
      break;
    }
    auto diags = verify(r.module);
    double dt = secondsSince(t0);
    size_t errs = errorCount(diags);
    const Diagnostic *err = nullptr;
    for (auto &d : diags)
      if (d.severity == Severity::Error)
        err = &d;
    if (errs != 1 || !err || err->cls != c.cls ||
        err->loc.file != c.file || err->loc.begin.line != c.line ||
        err->loc.begin.col < 1 || dt >= 0.1) {
      ok = false;
      detail = std::string(c.file) + ": " + std::to_string(errs) +
               " error(s)" + (err ? ", first " + err->cls + " at line " +
                                        std::to_string(err->loc.begin.line)
                                  : "") +
               ", " + std::to_string(dt) + "s";
      break;
    }
  }
  report(1, ok, "broken schedules yield exactly one precise diagnostic",
         detail);
}

//===---------------------------------------------------------------------===//
// 2. Simulator matches independent software references, 50 seeds each.
//===---------------------------------------------------------------------===//

bool checkTranspose(uint32_t seed, std::string &why) {
  auto r = parseKernel("transpose.hir");
  auto A = randomI32(64, seed);
  SimInput in;
  in.tensors["A"] = A;
  auto res = simulate(r.module, "transpose", in);
  if (!res.ok || !res.ub.empty())
    return why = "transpose sim not clean", false;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      if (res.tensors["B"][j * 8 + i] != (int32_t)A[i * 8 + j])
        return why = "transpose mismatch", false;
  return true;
}

bool checkStencil(uint32_t seed, std::string &why) {
  auto r = parseKernel("stencil1d.hir");
  auto A = randomI32(66, seed);
  SimInput in;
  in.tensors["A0"] = A;
  in.alias = {{"A1", "A0"}, {"A2", "A0"}};
  auto res = simulate(r.module, "stencil3", in);
  if (!res.ok || !res.ub.empty())
    return why = "stencil sim not clean", false;
  for (int i = 0; i < 64; ++i)
    if (res.tensors["B"][i] !=
        wrap32((uint64_t)(uint32_t)A[i] + (uint32_t)A[i + 1] +
               (uint32_t)A[i + 2]))
      return why = "stencil mismatch", false;
  return true;
}

bool checkHistogram(uint32_t seed, std::string &why) {
  auto r = parseKernel("histogram.hir");
  auto A = randomI32(64, seed, 0, 15);
  SimInput in;
  in.tensors["A"] = A;
  in.tensors["H"] = std::vector<int64_t>(16, 0);
  auto res = simulate(r.module, "histogram", in);
  if (!res.ok || !res.ub.empty())
    return why = "histogram sim not clean", false;
  std::vector<int64_t> want(16, 0);
  for (int64_t s : A)
    ++want[s];
  if (res.tensors["H"] != want)
    return why = "histogram mismatch", false;
  return true;
}

bool checkGemm(uint32_t seed, std::string &why) {
  auto r = parseKernel("gemm.hir");
  auto A = randomI32(256, seed);
  auto B = randomI32(256, seed + 1000000);
  SimInput in;
  in.tensors["A"] = A;
  in.tensors["B"] = B;
  in.tensors["C"] = std::vector<int64_t>(256, 0);
  auto res = simulate(r.module, "gemm", in);
  if (!res.ok || !res.ub.empty())
    return why = "gemm sim not clean", false;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      uint32_t acc = 0;
      for (int k = 0; k < 16; ++k)
        acc += (uint32_t)A[i * 16 + k] * (uint32_t)B[k * 16 + j];
      if (res.tensors["C"][i * 16 + j] != (int32_t)acc)
        return why = "gemm mismatch", false;
    }
  return true;
}

bool checkConv(uint32_t seed, std::string &why) {
  auto r = parseKernel("conv2d.hir");
  auto I = randomI32(64, seed);
  auto K = randomI32(9, seed + 2000000);
  SimInput in;
  in.tensors["I"] = I;
  in.tensors["K"] = K;
  in.tensors["O"] = std::vector<int64_t>(36, 0);
  auto res = simulate(r.module, "conv2d", in);
  if (!res.ok || !res.ub.empty())
    return why = "conv sim not clean", false;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      uint32_t acc = 0;
      for (int u = 0; u < 3; ++u)
        for (int v = 0; v < 3; ++v)
          acc += (uint32_t)I[(i + u) * 8 + (j + v)] * (uint32_t)K[u * 3 + v];
      if (res.tensors["O"][i * 6 + j] != (int32_t)acc)
        return why = "conv mismatch", false;
    }
  return true;
}

void criterion2() {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string why;
  for (uint32_t seed = 1; seed <= 50 && ok; ++seed)
    ok = checkTranspose(seed, why) && checkStencil(seed, why) &&
         checkHistogram(seed, why) && checkGemm(seed, why) &&
         checkConv(seed, why);
  double dt = secondsSince(t0);
  if (ok && dt >= 30) {
    ok = false;
    why = "took " + std::to_string(dt) + "s";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1fs", dt);
  report(2, ok, "five kernels match software references over 50 seeds",
         ok ? std::string(buf) : why);
}

//===---------------------------------------------------------------------===//
// 3. Pipelined loop completion follows the latency law, cycle exact.
//===---------------------------------------------------------------------===//

void criterion3() {
  bool ok = true;
  std::string why;
  for (int64_t N = 1; N <= 32 && ok; ++N)
    for (int64_t ii = 1; ii <= 4 && ok; ++ii) {
      std::string src =
          "def @lat(%A : memref<" + std::to_string(N) +
          "xi32, [packed], r>, %B : memref<" + std::to_string(N) +
          "xi32, [packed], w>) at %t {\n"
          "  for %i : i32 = 0 to " + std::to_string(N) +
          " step 1 iter_time %ti at %t offset 3 {\n"
          "    %x = mem_read %A[%i] : i32 at %ti\n"
          "    %id = delay %i by 1 at %ti\n"
          "    mem_write %x to %B[%id] at %ti offset 1\n"
          "    yield at %ti offset " + std::to_string(ii) + "\n"
          "  } yield_result %tdone\n"
          "  return at %tdone\n"
          "}\n";
      auto r = parse(src, "lat.hir");
      if (!r.ok() || hasErrors(verify(r.module))) {
        ok = false;
        why = "generated program invalid";
        break;
      }
      SimInput in;
      in.tensors["A"] = randomI32(N, (uint32_t)(N * 8 + ii));
      auto res = simulate(r.module, "lat", in);
      int64_t want = 3 + (N - 1) * ii + 2 + 1; // start + (N-1)*II + L + 1
      if (!res.ok || res.completionCycle != want) {
        ok = false;
        why = "N=" + std::to_string(N) + " II=" + std::to_string(ii) +
              ": got " + std::to_string(res.completionCycle) + ", want " +
              std::to_string(want);
      }
    }
  report(3, ok, "completion = start + (N-1)*II + latency + 1 over 32x4 grid",
         why);
}

//===---------------------------------------------------------------------===//
// 4. Overlapped tasks beat the sequential schedule with equal outputs.
//===---------------------------------------------------------------------===//

void criterion4() {
  auto r = parseKernel("task_parallel.hir");
  auto A = randomI32(66, 99);
  SimInput in;
  in.tensors["A0"] = A;
  in.alias = {{"A1", "A0"}, {"A2", "A0"}};
  auto ov = simulate(r.module, "task_overlap", in);
  auto sq = simulate(r.module, "task_sequential", in);
  bool ok = ov.ok && sq.ok && ov.ub.empty() && sq.ub.empty() &&
            ov.completionCycle < sq.completionCycle &&
            ov.tensors["R"] == sq.tensors["R"];
  report(4, ok, "task overlap finishes earlier with identical results",
         "overlapped " + std::to_string(ov.completionCycle) +
             " < sequential " + std::to_string(sq.completionCycle));
}

//===---------------------------------------------------------------------===//
// 5. Every pass preserves verification, outputs and timing, 50 seeds.
//===---------------------------------------------------------------------===//

struct SimTarget {
  const char *kernel;
  const char *fn;
  SimInput (*input)(uint32_t seed);
};

const SimTarget kTargets[] = {
    {"transpose.hir", "transpose",
     [](uint32_t s) {
       SimInput in;
       in.tensors["A"] = randomI32(64, s);
       return in;
     }},
    {"stencil1d.hir", "stencil3",
     [](uint32_t s) {
       SimInput in;
       in.tensors["A0"] = randomI32(66, s);
       in.alias = {{"A1", "A0"}, {"A2", "A0"}};
       return in;
     }},
    {"histogram.hir", "histogram",
     [](uint32_t s) {
       SimInput in;
       in.tensors["A"] = randomI32(64, s, 0, 15);
       in.tensors["H"] = std::vector<int64_t>(16, 0);
       return in;
     }},
    {"gemm.hir", "gemm",
     [](uint32_t s) {
       SimInput in;
       in.tensors["A"] = randomI32(256, s);
       in.tensors["B"] = randomI32(256, s + 1);
       in.tensors["C"] = std::vector<int64_t>(256, 0);
       return in;
     }},
    {"conv2d.hir", "conv2d",
     [](uint32_t s) {
       SimInput in;
       in.tensors["I"] = randomI32(64, s);
       in.tensors["K"] = randomI32(9, s + 1);
       in.tensors["O"] = std::vector<int64_t>(36, 0);
       return in;
     }},
    {"fifo.hir", "fifo",
     [](uint32_t s) {
       SimInput in;
       in.tensors["IN"] = randomI32(16, s);
       return in;
     }},
    {"unroll4.hir", "unroll4",
     [](uint32_t s) {
       SimInput in;
       in.tensors["A"] = randomI32(32, s);
       return in;
     }},
    {"task_parallel.hir", "task_overlap",
     [](uint32_t s) {
       SimInput in;
       in.tensors["A0"] = randomI32(66, s);
       in.alias = {{"A1", "A0"}, {"A2", "A0"}};
       return in;
     }},
    {"delays_share.hir", "delays_share",
     [](uint32_t s) {
       SimInput in;
       in.scalars["x"] = (int64_t)(int32_t)s * 2654435761u;
       return in;
     }},
};

void criterion5() {
  bool ok = true;
  std::string why;
  for (auto &t : kTargets) {
    if (!ok)
      break;
    auto base = parseKernel(t.kernel);
    // Baselines across the seeds, then each pass against them.
    std::vector<SimResult> baseline;
    for (uint32_t s = 1; s <= 50; ++s)
      baseline.push_back(simulate(base.module, t.fn, t.input(s)));
    for (const std::string &pass : allPassNames()) {
      auto r = parseKernel(t.kernel);
      std::vector<Diagnostic> diags;
      runPipeline(r.module, {pass}, diags);
      if (hasErrors(diags)) {
        ok = false;
        why = pass + " breaks " + t.kernel;
        break;
      }
      for (uint32_t s = 1; s <= 50; ++s) {
        SimResult res = simulate(r.module, t.fn, t.input(s));
        const SimResult &b = baseline[s - 1];
        if (res.completionCycle != b.completionCycle ||
            res.results != b.results || res.tensors != b.tensors ||
            !res.ub.empty() || !b.ub.empty()) {
          ok = false;
          why = pass + " changes " + t.kernel + " behavior (seed " +
                std::to_string(s) + ")";
          break;
        }
      }
      if (!ok)
        break;
    }
  }
  report(5, ok, "each pass preserves behavior on the corpus over 50 seeds",
         why);
}

//===---------------------------------------------------------------------===//
// 6. Precision narrowing sizes counters exactly; simulation is unchanged.
//===---------------------------------------------------------------------===//

void criterion6() {
  const int64_t ubs[] = {15, 16, 255, 256};
  const int want[] = {4, 5, 8, 9};
  bool ok = true;
  std::string why;
  for (int i = 0; i < 4 && ok; ++i) {
    std::string src =
        "def @f(%B : memref<" + std::to_string(ubs[i]) +
        "xi32, [packed], w>) at %t {\n"
        "  for %i : i32 = 0 to " + std::to_string(ubs[i]) +
        " step 1 iter_time %ti at %t {\n"
        "    %id = delay %i by 1 at %ti\n"
        "    mem_write %id to %B[%id] at %ti offset 1\n"
        "    yield at %ti offset 1\n"
        "  } yield_result %td\n"
        "  return at %td\n"
        "}\n";
    auto r = parse(src, "cnt.hir");
    auto before = simulate(r.module, "f", {});
    std::vector<Diagnostic> diags;
    runPipeline(r.module, {"narrow_precision"}, diags);
    auto after = simulate(r.module, "f", {});
    auto emitted = emitVerilog(r.module);
    if (hasErrors(diags) || !emitted.ok) {
      ok = false;
      why = "narrowing broke the module";
      break;
    }
    json cnts = json::parse(emitted.report)["functions"][0]["counters"];
    if (cnts.size() != 1 || cnts[0]["width"].get<int>() != want[i]) {
      ok = false;
      why = "ub " + std::to_string(ubs[i]) + ": counter width " +
            cnts[0]["width"].dump() + ", want " + std::to_string(want[i]);
      break;
    }
    if (after.tensors != before.tensors ||
        after.completionCycle != before.completionCycle) {
      ok = false;
      why = "ub " + std::to_string(ubs[i]) + ": simulation changed";
    }
  }
  report(6, ok, "counter widths 4/5/8/9 for bounds 15/16/255/256", why);
}

//===---------------------------------------------------------------------===//
// 7. Delay sharing reports 5 registers for the 2,5 pair, not 7.
//===---------------------------------------------------------------------===//

void criterion7() {
  auto r = parseKernel("delays_share.hir");
  auto before = emitVerilog(r.module);
  std::vector<Diagnostic> diags;
  runPipeline(r.module, {"dedup_time_and_delays"}, diags);
  auto after = emitVerilog(r.module);
  bool ok = before.ok && after.ok && !hasErrors(diags);
  int64_t regsBefore = 0, regsAfter = 0;
  if (ok) {
    regsBefore = json::parse(before.report)["functions"][0]["registers"]
                     .get<int64_t>();
    regsAfter = json::parse(after.report)["functions"][0]["registers"]
                    .get<int64_t>();
    ok = regsBefore == 7 && regsAfter == 5;
  }
  report(7, ok, "delays by 2 and 5 share a chain: 7 registers become 5",
         std::to_string(regsBefore) + " -> " + std::to_string(regsAfter));
}

//===---------------------------------------------------------------------===//
// 8. parse . print . parse is a structural fixed point, corpus + fuzz.
//===---------------------------------------------------------------------===//

void criterion8() {
  bool ok = true;
  std::string why;
  for (const char *k :
       {"transpose.hir", "stencil1d.hir", "histogram.hir", "gemm.hir",
        "conv2d.hir", "fifo.hir", "unroll4.hir", "task_parallel.hir",
        "delays_share.hir", "err_add.hir", "err_mac.hir", "err_timing.hir",
        "err_conflict.hir"}) {
    auto p1 = parseKernel(k);
    std::string s1 = print(p1.module);
    auto p2 = parse(s1, "rt.hir");
    if (!p1.ok() || !p2.ok() || !structurallyEqual(p1.module, p2.module) ||
        print(p2.module) != s1) {
      ok = false;
      why = std::string("corpus kernel ") + k;
      break;
    }
  }
  for (uint32_t seed = 0; seed < 1000 && ok; ++seed) {
    hirc_test::ProgramGen gen(seed);
    auto p1 = parse(gen.generate(), "fuzz.hir");
    if (!p1.ok()) {
      ok = false;
      why = "fuzz seed " + std::to_string(seed) + " did not parse";
      break;
    }
    std::string s1 = print(p1.module);
    auto p2 = parse(s1, "fuzz_rt.hir");
    if (!p2.ok() || !structurallyEqual(p1.module, p2.module) ||
        print(p2.module) != s1) {
      ok = false;
      why = "fuzz seed " + std::to_string(seed);
    }
  }
  report(8, ok, "round-trip fixed point on corpus and 1000 fuzzed programs",
         why);
}

//===---------------------------------------------------------------------===//
// 9. Verilog emission is deterministic and the plan mirrors the schedule.
//===---------------------------------------------------------------------===//

void criterion9() {
  bool ok = true;
  std::string why;
  for (const char *k :
       {"transpose.hir", "stencil1d.hir", "histogram.hir", "gemm.hir",
        "conv2d.hir", "fifo.hir", "unroll4.hir", "task_parallel.hir",
        "delays_share.hir"}) {
    if (!ok)
      break;
    auto r1 = parseKernel(k);
    auto r2 = parseKernel(k);
    auto e1 = emitVerilog(r1.module);
    auto e2 = emitVerilog(r2.module);
    if (!e1.ok || !e2.ok || e1.verilog != e2.verilog || e1.plan != e2.plan ||
        e1.report != e2.report) {
      ok = false;
      why = std::string(k) + " is not deterministic";
      break;
    }
    json plan = json::parse(e1.plan);
    for (auto &pf : plan["functions"]) {
      const Function *fn = r1.module.find(pf["name"].get<std::string>());
      std::vector<const Operation *> sched;
      walkOps(*fn, [&](const Operation &op, auto &) {
        if (op.sched)
          sched.push_back(&op);
      });
      if (pf["ops"].size() != sched.size()) {
        ok = false;
        why = std::string(k) + ": plan op count mismatch";
        break;
      }
      for (size_t i = 0; i < sched.size(); ++i) {
        CanonicalInstant ci = resolveTime(*fn, *sched[i]->sched);
        if (!ci.valid ||
            pf["ops"][i]["root"].get<std::string>() !=
                fn->val(ci.root).name ||
            pf["ops"][i]["depth"].get<int64_t>() != ci.offset) {
          ok = false;
          why = std::string(k) + ": event depth mismatch at op " +
                std::to_string(i);
          break;
        }
      }
    }
  }
  report(9, ok, "emission is byte-stable and the plan matches the schedule",
         why);
}

//===---------------------------------------------------------------------===//
// 10. Optional co-simulation against an external Verilog simulator.
//===---------------------------------------------------------------------===//

void criterion10() {
  bool haveIverilog =
      std::system("command -v iverilog >/dev/null 2>&1") == 0;
  bool haveVerilator =
      std::system("command -v verilator >/dev/null 2>&1") == 0;
  if (!haveIverilog && !haveVerilator) {
    reportSkip(10, "co-simulation of emitted Verilog",
               "no external Verilog simulator installed");
    return;
  }
  // With a simulator present, at minimum the emitted Verilog must be
  // accepted by it.
  bool ok = true;
  std::string why;
  for (const char *k : {"fifo.hir", "gemm.hir", "task_parallel.hir"}) {
    auto r = parseKernel(k);
    auto e = emitVerilog(r.module);
    if (!e.ok) {
      ok = false;
      why = std::string(k) + " failed to emit";
      break;
    }
    std::string path = "/tmp/hirc_cosim.v";
    FILE *f = std::fopen(path.c_str(), "w");
    std::fwrite(e.verilog.data(), 1, e.verilog.size(), f);
    std::fclose(f);
    std::string cmd = haveIverilog
                          ? "iverilog -g2005 -t null " + path +
                                " >/dev/null 2>&1"
                          : "verilator --lint-only " + path +
                                " >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      ok = false;
      why = std::string(k) + " rejected by the external simulator";
      break;
    }
  }
  report(10, ok, "co-simulation of emitted Verilog", why);
}

} // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  if (failures)
    std::printf("%d criterion(s) failed\n", failures);
  else
    std::printf("all criteria satisfied\n");
  return failures ? 1 : 0;
}
