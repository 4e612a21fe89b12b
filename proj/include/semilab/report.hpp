#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semilab/measure.hpp"

namespace semilab {

/// Tabular data attached to a check, written out by emit_plotdata.
struct Series {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  bool empty() const { return rows.empty(); }
};

/// One verified identity. pass <=> residual <= tolerance; for stochastic checks the tolerance
/// already contains the 3 * stderr allowance.
struct CheckRecord {
  std::string identity;
  std::string paper_ref;  // the formula being checked
  double residual = 0.0;
  double tolerance = 0.0;
  std::optional<double> stderr;
  bool pass = false;
  std::uint64_t seed = 0;
  double runtime_ms = 0.0;
  std::string note;
  Series series;
};

struct VerificationReport {
  std::string config_digest;  // SHA-256 of the canonical config text
  std::uint64_t seed = 0;
  std::vector<CheckRecord> checks;

  std::size_t passed() const;
  std::size_t failed() const { return checks.size() - passed(); }
  bool all_pass() const { return failed() == 0; }
};

/// Timing fields are left out so the text depends only on (config, seed).
nlohmann::json to_json(const VerificationReport& report);
VerificationReport report_from_json(const nlohmann::json& j);
nlohmann::json timings_json(const VerificationReport& report);

/// One CSV per check with a series plus checks.csv (identity,residual,tolerance,stderr,pass);
/// an empty report yields a header-only checks.csv. Returns the files written.
std::vector<std::filesystem::path> emit_plotdata(const VerificationReport& report, const std::filesystem::path& dir);

/// Per-time moments t,mean_1..mean_d,second_1..second_d of a measure trajectory.
void emit_plotdata(const MeasureTrajectory& trajectory, const std::filesystem::path& file);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& file);

void write_text(const std::filesystem::path& file, const std::string& text);
std::string read_text(const std::filesystem::path& file);

/// manifest.json listing every file (relative path, bytes, sha256) in sorted order.
void write_manifest(const std::filesystem::path& dir, std::vector<std::filesystem::path> files);

}  // namespace semilab
