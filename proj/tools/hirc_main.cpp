#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hirc/backend.hpp"
#include "hirc/parser.hpp"
#include "hirc/passes.hpp"
#include "hirc/printer.hpp"
#include "hirc/sim.hpp"
#include "hirc/vcd.hpp"
#include "hirc/verifier.hpp"

using json = nlohmann::ordered_json;

namespace {

struct Phase {
  std::string name;
  double ms = 0;
};

class Timer {
public:
  explicit Timer(bool enabled) : enabled(enabled) {}

  template <typename F> auto time(const std::string &name, F &&f) {
    auto t0 = std::chrono::steady_clock::now();
    auto r = f();
    auto t1 = std::chrono::steady_clock::now();
    phases.push_back(
        {name, std::chrono::duration<double, std::milli>(t1 - t0).count()});
    return r;
  }

  ~Timer() {
    if (!enabled)
      return;
    std::cerr << "timing:\n";
    for (auto &p : phases)
      std::cerr << "  " << p.name << ": " << p.ms << " ms\n";
  }

private:
  bool enabled;
  std::vector<Phase> phases;
};

void printDiags(const std::vector<hirc::Diagnostic> &diags, bool jsonMode) {
  if (!jsonMode) {
    std::cerr << hirc::renderDiagnostics(diags);
    return;
  }
  for (auto &d : diags) {
    json j = {{"severity",
               d.severity == hirc::Severity::Error ? "error" : "warning"},
              {"class", d.cls},
              {"file", d.loc.file},
              {"line", d.loc.begin.line},
              {"col", d.loc.begin.col},
              {"message", d.message}};
    std::cerr << j.dump() << "\n";
  }
}

int readFileOrDie(const std::string &path, std::string &out) {
  std::ifstream f(path);
  if (!f) {
    std::cerr << "error: cannot open '" << path << "'\n";
    return 2;
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  out = ss.str();
  return 0;
}

int writeFileOrDie(const std::string &path, const std::string &data) {
  if (path.empty() || path == "-") {
    std::cout << data;
    return 0;
  }
  std::ofstream f(path);
  if (!f) {
    std::cerr << "error: cannot write '" << path << "'\n";
    return 2;
  }
  f << data;
  return 0;
}

// Parse + structure validation + schedule verification. Returns exit code;
// 0 means `mod` holds a verified module.
int loadAndVerify(const std::string &path, bool jsonDiags, Timer &timer,
                  hirc::Module &mod, bool *hadWarnings = nullptr) {
  std::string src;
  if (int rc = readFileOrDie(path, src))
    return rc;
  auto pr = timer.time("parse", [&] { return hirc::parse(src, path); });
  if (!pr.ok()) {
    printDiags(pr.diags, jsonDiags);
    return 1;
  }
  mod = std::move(pr.module);
  auto diags = timer.time("verify", [&] { return hirc::verify(mod); });
  printDiags(diags, jsonDiags);
  if (hadWarnings)
    *hadWarnings = !diags.empty();
  return hirc::hasErrors(diags) ? 1 : 0;
}

hirc::SimInput loadSimInput(const json &j) {
  hirc::SimInput in;
  if (j.contains("scalars"))
    for (auto &[k, v] : j["scalars"].items())
      in.scalars[k] = v.get<int64_t>();
  if (j.contains("tensors"))
    for (auto &[k, v] : j["tensors"].items())
      in.tensors[k] = v.get<std::vector<int64_t>>();
  if (j.contains("alias"))
    for (auto &[k, v] : j["alias"].items())
      in.alias[k] = v.get<std::string>();
  if (j.contains("ports"))
    for (auto &p : j["ports"])
      in.ports.push_back({p["port"].get<std::string>(),
                          p["cycle"].get<int64_t>(),
                          p["index"].get<std::vector<int64_t>>(),
                          p["value"].get<int64_t>()});
  if (j.contains("max_cycles"))
    in.maxCycles = j["max_cycles"].get<int64_t>();
  return in;
}

json simResultToJson(const hirc::SimResult &res) {
  json out;
  out["ok"] = res.ok;
  out["completion_cycle"] = res.completionCycle;
  out["cycles"] = res.cyclesRun;
  out["results"] = res.results;
  json tensors = json::object();
  for (auto &[name, data] : res.tensors)
    tensors[name] = data;
  out["tensors"] = std::move(tensors);
  json ub = json::array();
  for (auto &u : res.ub)
    ub.push_back({{"kind", u.kind},
                  {"cycle", u.cycle},
                  {"detail", u.detail},
                  {"file", u.loc.file},
                  {"line", u.loc.begin.line},
                  {"col", u.loc.begin.col}});
  out["ub"] = std::move(ub);
  return out;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"hirc: compiler toolkit for explicitly scheduled hardware "
               "kernels"};
  app.require_subcommand(1);
  // Let --json-diagnostics / --time appear after the subcommand too.
  app.fallthrough();
  bool jsonDiags = false;
  bool showTime = false;
  app.add_flag("--json-diagnostics", jsonDiags,
               "print diagnostics as JSON, one object per line");
  app.add_flag("--time", showTime, "print per-phase timing to stderr");

  std::string file;

  auto *check = app.add_subcommand(
      "check", "parse and verify a module's schedule");
  check->add_option("file", file)->required();

  auto *opt = app.add_subcommand("opt", "run optimization passes");
  std::string passList, optOut;
  bool printReport = false;
  opt->add_option("file", file)->required();
  opt->add_option("--passes", passList,
                  "comma separated pass list (default: all)");
  opt->add_option("-o,--output", optOut, "output file (default stdout)");
  opt->add_flag("--print-report", printReport,
                "print per-pass rewrite counts to stderr");

  auto *emit = app.add_subcommand("emit", "emit synthesizable Verilog");
  std::string emitOut, planOut, reportOut, top, ramStyle;
  emit->add_option("file", file)->required();
  emit->add_option("-o,--output", emitOut, "Verilog output (default stdout)");
  emit->add_option("--emit-plan", planOut, "write the lowering plan JSON");
  emit->add_option("--report", reportOut, "write the resource report JSON");
  emit->add_option("--top", top, "emit only this function and its callees");
  emit->add_option("--ram-style", ramStyle,
                   "ram_style attribute for internal memories");

  auto *sim = app.add_subcommand("sim", "simulate a function cycle by cycle");
  std::string fnName, inputPath, simOut, tracePath, traceCsvPath;
  int64_t maxCycles = -1;
  sim->add_option("file", file)->required();
  sim->add_option("--fn", fnName, "function to run (default: sole function)");
  sim->add_option("--input", inputPath, "input JSON");
  sim->add_option("-o,--output", simOut, "result JSON (default stdout)");
  sim->add_option("--trace", tracePath, "write a VCD waveform");
  sim->add_option("--trace-csv", traceCsvPath, "write the trace as CSV");
  sim->add_option("--max-cycles", maxCycles, "simulation cycle budget");

  CLI11_PARSE(app, argc, argv);
  Timer timer(showTime);
  hirc::Module mod;

  if (*check)
    return loadAndVerify(file, jsonDiags, timer, mod);

  if (*opt) {
    if (int rc = loadAndVerify(file, jsonDiags, timer, mod))
      return rc;
    std::vector<std::string> passes;
    if (passList.empty()) {
      passes = hirc::allPassNames();
    } else {
      std::stringstream ss(passList);
      for (std::string p; std::getline(ss, p, ',');)
        if (!p.empty())
          passes.push_back(p);
    }
    std::vector<hirc::Diagnostic> diags;
    auto reports = timer.time(
        "opt", [&] { return hirc::runPipeline(mod, passes, diags); });
    printDiags(diags, jsonDiags);
    if (hirc::hasErrors(diags))
      return 1;
    if (printReport)
      for (auto &r : reports)
        std::cerr << r.pass << ": removed " << r.removed << ", rewritten "
                  << r.rewritten << ", merged " << r.merged << "\n";
    return writeFileOrDie(optOut, hirc::print(mod));
  }

  if (*emit) {
    if (int rc = loadAndVerify(file, jsonDiags, timer, mod))
      return rc;
    hirc::BackendOptions bo{top, ramStyle};
    auto res =
        timer.time("emit", [&] { return hirc::emitVerilog(mod, bo); });
    printDiags(res.diags, jsonDiags);
    if (!res.ok)
      return 1;
    if (!planOut.empty())
      if (int rc = writeFileOrDie(planOut, res.plan))
        return rc;
    if (!reportOut.empty())
      if (int rc = writeFileOrDie(reportOut, res.report))
        return rc;
    return writeFileOrDie(emitOut, res.verilog);
  }

  if (*sim) {
    if (int rc = loadAndVerify(file, jsonDiags, timer, mod))
      return rc;
    hirc::SimInput in;
    if (!inputPath.empty()) {
      std::string text;
      if (int rc = readFileOrDie(inputPath, text))
        return rc;
      json j = json::parse(text, nullptr, false);
      if (j.is_discarded()) {
        std::cerr << "error: '" << inputPath << "' is not valid JSON\n";
        return 2;
      }
      in = loadSimInput(j);
      if (fnName.empty() && j.contains("function"))
        fnName = j["function"].get<std::string>();
    }
    if (maxCycles > 0)
      in.maxCycles = maxCycles;
    in.trace = !tracePath.empty() || !traceCsvPath.empty();
    if (fnName.empty()) {
      for (auto &f : mod.functions)
        if (!f.isExtern) {
          if (!fnName.empty()) {
            std::cerr << "error: multiple functions; pick one with --fn\n";
            return 2;
          }
          fnName = f.name;
        }
    }
    auto res = timer.time(
        "sim", [&] { return hirc::simulate(mod, fnName, in); });
    printDiags(res.diags, jsonDiags);
    if (!tracePath.empty()) {
      std::ofstream f(tracePath);
      hirc::writeVcd(f, res.trace);
    }
    if (!traceCsvPath.empty()) {
      std::ofstream f(traceCsvPath);
      hirc::writeTraceCsv(f, res.trace);
    }
    if (int rc = writeFileOrDie(simOut, simResultToJson(res).dump(2) + "\n"))
      return rc;
    return res.ok ? 0 : 1;
  }

  return 2;
}
