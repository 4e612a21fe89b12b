#include "semilab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "semilab/errors.hpp"
#include "semilab/random.hpp"
#include "semilab/suites.hpp"

namespace semilab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t suite_seed(std::uint64_t seed, const std::string& name) {
  const auto& names = suite_names();
  const auto index = static_cast<std::uint64_t>(std::find(names.begin(), names.end(), name) - names.begin());
  return derive_seed(seed, index + 1);
}

std::string format_double(double value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

}  // namespace

VerificationReport run_scenario(const ScenarioConfig& config, std::vector<std::string> selection) {
  if (selection.empty()) selection = config.suites;
  if (selection.empty()) selection = suite_names();
  for (const auto& name : selection)
    if (!is_suite_name(name)) throw ConfigError("suites", "unknown suite '" + name + "'");

  VerificationReport report;
  report.config_digest = sha256_hex(serialize_config(config));
  report.seed = config.run.seed;
  const GalerkinModel model = build_model(config.model);
  for (const auto& name : suite_names()) {
    if (std::find(selection.begin(), selection.end(), name) == selection.end()) continue;
    const std::uint64_t seed = suite_seed(config.run.seed, name);
    const auto start = std::chrono::steady_clock::now();
    std::vector<CheckRecord> records;
    try {
      records = run_suite(name, config, model, seed);
    } catch (const std::exception& e) {
      CheckRecord failed;
      failed.identity = name + "/error";
      failed.paper_ref = "suite completed without error";
      failed.residual = std::numeric_limits<double>::infinity();
      failed.tolerance = 0.0;
      failed.pass = false;
      failed.seed = seed;
      failed.note = e.what();
      records.push_back(std::move(failed));
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    for (auto& r : records) {
      r.runtime_ms = ms;
      report.checks.push_back(std::move(r));
    }
  }
  return report;
}

int exit_code(const VerificationReport& report) { return report.all_pass() ? kAllPass : kSomeFail; }

void write_outputs(const fs::path& dir, const ScenarioConfig& config, const VerificationReport& report) {
  std::vector<fs::path> files;
  write_text(dir / "config.json", serialize_config(config));
  files.push_back(dir / "config.json");
  write_text(dir / "report.json", to_json(report).dump(2) + "\n");
  files.push_back(dir / "report.json");
  write_text(dir / "timings.json", timings_json(report).dump(2) + "\n");
  files.push_back(dir / "timings.json");
  for (auto& f : emit_plotdata(report, dir / "plotdata")) files.push_back(f);
  write_manifest(dir, files);
}

void run_evolve(const fs::path& dir, const ScenarioConfig& config) {
  const GalerkinModel model = build_model(config.model);
  const std::uint64_t seed = derive_seed(config.run.seed, 0xE70u);
  const SemigroupHandle handle = build_handle(model, config.run, seed);
  const Vector x0 = start_point(config.run, model.dim());
  const ParticleMeasure mu0 = ParticleMeasure::dirac(x0, config.run.particles, "delta_x0");
  const MeasureTrajectory trajectory = evolve_measure(handle, mu0, time_grid(config.run), seed);

  std::vector<fs::path> files;
  emit_plotdata(trajectory, dir / "moments.csv");
  files.push_back(dir / "moments.csv");
  const std::size_t K = trajectory.times.size();
  const std::size_t stride = std::max<std::size_t>(1, (K - 1 + 7) / 8);
  std::vector<std::size_t> picked;
  for (std::size_t k = 0; k < K; k += stride) picked.push_back(k);
  if (picked.back() != K - 1) picked.push_back(K - 1);
  for (std::size_t k : picked) {
    const std::string name = "snapshots/t" + std::to_string(k);
    std::ostringstream body;
    write_measure_csv(body, trajectory.snapshots[k]);
    write_text(dir / (name + ".csv"), body.str());
    const json sidecar = {{"time", trajectory.times[k]},
                          {"label", trajectory.snapshots[k].label()},
                          {"particles", trajectory.snapshots[k].size()},
                          {"total_variation_bound", trajectory.snapshots[k].total_variation()},
                          {"seed_lineage", {{"run_seed", config.run.seed}, {"evolve_seed", seed}}},
                          {"handle", trajectory.handle}};
    write_text(dir / (name + ".json"), sidecar.dump(2) + "\n");
    files.push_back(dir / (name + ".csv"));
    files.push_back(dir / (name + ".json"));
  }
  write_text(dir / "config.json", serialize_config(config));
  files.push_back(dir / "config.json");
  write_manifest(dir, files);
}

void run_resolvent(const fs::path& dir, const ScenarioConfig& config, double tolerance) {
  const GalerkinModel model = build_model(config.model);
  const std::uint64_t seed = derive_seed(config.run.seed, 0x7E5u);
  const SemigroupHandle handle = build_handle(model, config.run, seed);
  const double lambda =
      config.run.lambda.value_or(std::max(0.0, model.omega() + model.M() * model.lipschitz()) + 1.0);
  const Vector x0 = start_point(config.run, model.dim());
  json rows = json::array();
  std::ostringstream csv;
  csv << "phi,value,stderr,tail_bound,horizon,norm_bound\n";
  const auto bank = default_bank(model.dim());
  for (std::size_t b = 0; b < bank.size(); ++b) {
    const ResolventResult r = resolvent_apply(handle, lambda, bank[b], x0, tolerance);
    const double bound = bank[b].sup_bound() / lambda;
    rows.push_back({{"phi", b},
                    {"value", r.value},
                    {"stderr", r.stderr},
                    {"tail_bound", r.tail_bound},
                    {"horizon", r.horizon},
                    {"norm_bound", bound}});
    csv << b << ',' << format_double(r.value) << ',' << format_double(r.stderr) << ','
        << format_double(r.tail_bound) << ',' << format_double(r.horizon) << ',' << format_double(bound) << '\n';
  }
  const json out = {{"lambda", lambda}, {"tolerance", tolerance}, {"handle", handle.describe()}, {"results", rows}};
  write_text(dir / "resolvent.json", out.dump(2) + "\n");
  write_text(dir / "resolvent.csv", csv.str());
  write_text(dir / "config.json", serialize_config(config));
  write_manifest(dir, {dir / "resolvent.json", dir / "resolvent.csv", dir / "config.json"});
}

}  // namespace semilab
