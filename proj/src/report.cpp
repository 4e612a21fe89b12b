#include "semilab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "semilab/errors.hpp"

namespace semilab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

// JSON has no infinities; they are written as strings.
json number(double value) {
  if (std::isfinite(value)) return value;
  return format_double(value);
}

double number_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw IoError("report: expected a number");
}

std::string file_name(const std::string& identity) {
  std::string out;
  for (char c : identity) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out;
}

void write_csv(const fs::path& file, const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << columns[k];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << row[k];
    out << '\n';
  }
  write_text(file, out.str());
}

}  // namespace

std::size_t VerificationReport::passed() const {
  return static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(), [](const auto& c) { return c.pass; }));
}

json to_json(const VerificationReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks) {
    json entry = {{"identity", c.identity},     {"paper_ref", c.paper_ref}, {"residual", number(c.residual)},
                  {"tolerance", number(c.tolerance)}, {"pass", c.pass},          {"seed", c.seed}};
    entry["stderr"] = c.stderr ? number(*c.stderr) : json(nullptr);
    if (!c.note.empty()) entry["note"] = c.note;
    checks.push_back(std::move(entry));
  }
  return {{"schema", "semilab.report/1"},
          {"config_sha256", report.config_digest},
          {"seed", report.seed},
          {"checks", std::move(checks)},
          {"summary", {{"total", report.checks.size()}, {"passed", report.passed()}, {"failed", report.failed()}}}};
}

VerificationReport report_from_json(const json& j) {
  try {
    VerificationReport report;
    report.config_digest = j.at("config_sha256").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("checks")) {
      CheckRecord record;
      record.identity = c.at("identity").get<std::string>();
      record.paper_ref = c.at("paper_ref").get<std::string>();
      record.residual = number_from(c.at("residual"));
      record.tolerance = number_from(c.at("tolerance"));
      if (!c.at("stderr").is_null()) record.stderr = number_from(c.at("stderr"));
      record.pass = c.at("pass").get<bool>();
      record.seed = c.at("seed").get<std::uint64_t>();
      if (c.contains("note")) record.note = c.at("note").get<std::string>();
      report.checks.push_back(std::move(record));
    }
    return report;
  } catch (const json::exception& e) {
    throw IoError(std::string("report: malformed report: ") + e.what());
  }
}

json timings_json(const VerificationReport& report) {
  json out = json::object();
  for (const auto& c : report.checks) out[c.identity] = c.runtime_ms;
  return {{"runtime_ms", std::move(out)}};
}

std::vector<fs::path> emit_plotdata(const VerificationReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("plotdata: cannot create '" + dir.string() + "': " + ec.message());
  std::vector<fs::path> written;
  std::vector<std::vector<std::string>> summary;
  for (const auto& c : report.checks) {
    summary.push_back({c.identity, format_double(c.residual), format_double(c.tolerance),
                       c.stderr ? format_double(*c.stderr) : "", c.pass ? "1" : "0"});
    if (c.series.empty()) continue;
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : c.series.rows) {
      std::vector<std::string> cells;
      for (double v : row) cells.push_back(format_double(v));
      rows.push_back(std::move(cells));
    }
    const fs::path file = dir / (file_name(c.identity) + ".csv");
    write_csv(file, c.series.columns, rows);
    written.push_back(file);
  }
  const fs::path checks = dir / "checks.csv";
  write_csv(checks, {"identity", "residual", "tolerance", "stderr", "pass"}, summary);
  written.push_back(checks);
  return written;
}

void emit_plotdata(const MeasureTrajectory& trajectory, const fs::path& file) {
  trajectory.validate();
  const int d = trajectory.snapshots.front().dim();
  std::vector<std::string> columns{"t"};
  for (int j = 1; j <= d; ++j) columns.push_back("mean_" + std::to_string(j));
  for (int j = 1; j <= d; ++j) columns.push_back("second_" + std::to_string(j));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < trajectory.times.size(); ++k) {
    const ParticleMeasure& mu = trajectory.snapshots[k];
    const Vector mean = mu.particles().transpose() * mu.weights();
    const Vector second = mu.particles().cwiseAbs2().transpose() * mu.weights();
    std::vector<std::string> row{format_double(trajectory.times[k])};
    for (int j = 0; j < d; ++j) row.push_back(format_double(mean(j)));
    for (int j = 0; j < d; ++j) row.push_back(format_double(second(j)));
    rows.push_back(std::move(row));
  }
  write_csv(file, columns, rows);
}

std::string sha256_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1)
    throw IoError("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& file) { return sha256_hex(read_text(file)); }

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
  }
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + file.string() + "'");
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read '" + file.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_manifest(const fs::path& dir, std::vector<fs::path> files) {
  std::vector<std::string> names;
  for (const auto& f : files) names.push_back(fs::relative(f, dir).generic_string());
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  json entries = json::array();
  for (const auto& name : names) {
    const std::string bytes = read_text(dir / name);
    entries.push_back({{"path", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }
  write_text(dir / "manifest.json", json{{"files", std::move(entries)}}.dump(2) + "\n");
}

}  // namespace semilab
