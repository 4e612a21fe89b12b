// semilab command line: verify, evolve, resolvent, report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semilab/errors.hpp"
#include "semilab/harness.hpp"
#include "semilab/parallel.hpp"
#include "semilab/suites.hpp"

namespace fs = std::filesystem;
using namespace semilab;

namespace {

void print_report(const VerificationReport& report) {
  for (const auto& c : report.checks) {
    std::printf("%s  %-36s residual=%-12.6g tolerance=%-12.6g", c.pass ? "PASS" : "FAIL", c.identity.c_str(),
                c.residual, c.tolerance);
    if (c.stderr) std::printf(" stderr=%.3g", *c.stderr);
    if (!c.note.empty()) std::printf("  [%s]", c.note.c_str());
    std::printf("\n");
  }
  std::printf("%zu checks, %zu passed, %zu failed\n", report.checks.size(), report.passed(), report.failed());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semilab: Monte Carlo and closed-form checks for Galerkin-truncated stochastic evolution equations"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "semilab-out";
  std::optional<int> threads;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "scenario file (structured text)");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override run.seed");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads (default: SEMILAB_THREADS, else all cores)")
        ->check(CLI::PositiveNumber);
  };

  std::vector<std::string> suites;
  auto* verify = app.add_subcommand("verify", "run verification suites and write a report");
  verify->add_option("suites", suites, "suite names (default: the config's list, else all)");
  add_common(verify, true);

  auto* evolve = app.add_subcommand("evolve", "evolve delta_x0 over the run grid and write snapshots");
  add_common(evolve, true);

  double tolerance = 1e-8;
  auto* resolvent = app.add_subcommand("resolvent", "resolvent of the default test-function bank at x0");
  add_common(resolvent, true);
  resolvent->add_option("--tolerance", tolerance, "truncation tail tolerance")->capture_default_str();

  auto* report_cmd = app.add_subcommand("report", "summarize report.json in --out and refresh plot data");
  add_common(report_cmd, false);

  auto* list = app.add_subcommand("suites", "list suite names in execution order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigFailure;
  }

  try {
    if (threads) set_thread_count(*threads);
    if (list->parsed()) {
      for (const auto& name : suite_names()) std::printf("%s\n", name.c_str());
      return kAllPass;
    }
    if (report_cmd->parsed()) {
      const fs::path dir(out_dir);
      const VerificationReport report = report_from_json(nlohmann::json::parse(read_text(dir / "report.json")));
      emit_plotdata(report, dir / "plotdata");
      print_report(report);
      return exit_code(report);
    }

    ScenarioConfig config = load_config(config_path);
    if (seed) config.run.seed = *seed;
    const fs::path dir(out_dir);

    if (verify->parsed()) {
      for (const auto& name : suites)
        if (!is_suite_name(name)) throw ConfigError("suites", "unknown suite '" + name + "'");
      const VerificationReport report = run_scenario(config, suites);
      write_outputs(dir, config, report);
      print_report(report);
      return exit_code(report);
    }
    if (evolve->parsed()) {
      run_evolve(dir, config);
      std::printf("wrote %s\n", (dir / "moments.csv").c_str());
      return kAllPass;
    }
    if (resolvent->parsed()) {
      run_resolvent(dir, config, tolerance);
      std::printf("wrote %s\n", (dir / "resolvent.json").c_str());
      return kAllPass;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kSomeFail;
  }
  return kAllPass;
}
