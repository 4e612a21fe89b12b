#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semilab/config.hpp"
#include "semilab/report.hpp"

namespace semilab {

enum ExitCode : int { kAllPass = 0, kSomeFail = 1, kConfigFailure = 2 };

/// Runs the selected suites (default: the config's list, else all) in the fixed suite order.
/// A suite that throws is recorded as a failed `<suite>/error` check and the run continues.
VerificationReport run_scenario(const ScenarioConfig& config, std::vector<std::string> selection = {});

int exit_code(const VerificationReport& report);

/// config.json, report.json, timings.json, plotdata/ and manifest.json under `dir`.
void write_outputs(const std::filesystem::path& dir, const ScenarioConfig& config, const VerificationReport& report);

/// Evolves delta_x0 (run.particles copies) over the run's grid and writes moments.csv plus up to
/// nine snapshots (CSV with a JSON sidecar) under `dir`.
void run_evolve(const std::filesystem::path& dir, const ScenarioConfig& config);

/// R(lambda, K) f(x0) for every default-bank function, written to resolvent.json and resolvent.csv.
void run_resolvent(const std::filesystem::path& dir, const ScenarioConfig& config, double tolerance = 1e-8);

}  // namespace semilab
