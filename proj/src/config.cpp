#include "semilab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "semilab/errors.hpp"
#include "semilab/random.hpp"
#include "semilab/suites.hpp"

namespace semilab {

namespace {

using nlohmann::json;
using Path = std::vector<std::string>;

std::string path_string(const Path& path) {
  std::string out;
  for (const auto& p : path) {
    if (!p.empty() && p.front() == '[') {
      out += p;
    } else {
      if (!out.empty()) out += '.';
      out += p;
    }
  }
  return out;
}

// Finds the line of the deepest existing prefix of `path` in well-formed JSON text.
class Locator {
 public:
  explicit Locator(const std::string& text) : s_(text) {}

  int line_of(const Path& path) {
    pos_ = 0;
    line_ = 1;
    best_ = 1;
    find(path, 0);
    return best_;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
      if (s_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string read_string() {
    std::string out;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\') ++pos_;
      if (pos_ < s_.size()) out += s_[pos_++];
    }
    ++pos_;
    return out;
  }

  void skip_value() {
    skip_ws();
    if (pos_ >= s_.size()) return;
    const char c = s_[pos_];
    if (c == '"') {
      read_string();
      return;
    }
    if (c == '{' || c == '[') {
      int depth = 0;
      while (pos_ < s_.size()) {
        const char d = s_[pos_];
        if (d == '"') {
          read_string();
          continue;
        }
        if (d == '\n') ++line_;
        if (d == '{' || d == '[') ++depth;
        if (d == '}' || d == ']') --depth;
        ++pos_;
        if (depth == 0) return;
      }
      return;
    }
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '}' &&
           !std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
  }

  void find(const Path& path, std::size_t depth) {
    skip_ws();
    if (depth == path.size() || pos_ >= s_.size()) return;
    const char c = s_[pos_];
    if (c == '{') {
      ++pos_;
      while (true) {
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] == '}') return;
        const int key_line = line_;
        const std::string key = read_string();
        skip_ws();
        ++pos_;  // ':'
        if (key == path[depth]) {
          best_ = key_line;
          find(path, depth + 1);
          return;
        }
        skip_value();
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
      }
    }
    if (c == '[') {
      ++pos_;
      for (int index = 0;; ++index) {
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] == ']') return;
        if ("[" + std::to_string(index) + "]" == path[depth]) {
          best_ = line_;
          find(path, depth + 1);
          return;
        }
        skip_value();
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
      }
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int best_ = 1;
};

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const Path& path, const std::string& message) const {
    Locator locator(text_);
    throw ConfigError(path_string(path), message, locator.line_of(path));
  }

  void expect_object(const json& j, const Path& path) const {
    if (!j.is_object()) fail(path, "expected an object");
  }

  void check_keys(const json& j, const Path& path, std::initializer_list<const char*> allowed) const {
    expect_object(j, path);
    for (const auto& item : j.items()) {
      const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
      if (!known) fail(extend(path, item.key()), "unknown field");
    }
  }

  const json& require(const json& j, const Path& path, const char* key) const {
    if (!j.contains(key)) fail(path, std::string("missing field '") + key + "'");
    return j.at(key);
  }

  double number(const json& j, const Path& path, double lo, double hi, bool open_lo = false) const {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v) || v < lo || v > hi || (open_lo && v == lo)) {
      std::ostringstream msg;
      msg << "value " << v << " outside " << (open_lo ? "(" : "[") << lo << ", " << hi << "]";
      fail(path, msg.str());
    }
    return v;
  }

  int integer(const json& j, const Path& path, long lo, long hi) const {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    const auto v = j.get<long long>();
    if (v < lo || v > hi)
      fail(path, "value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
  }

  std::uint64_t unsigned64(const json& j, const Path& path) const {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
    fail(path, "expected a non-negative integer");
  }

  bool boolean(const json& j, const Path& path) const {
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
  }

  std::string string(const json& j, const Path& path, std::initializer_list<const char*> choices) const {
    if (!j.is_string()) fail(path, "expected a string");
    const auto v = j.get<std::string>();
    if (choices.size() == 0) return v;
    for (const char* c : choices)
      if (v == c) return v;
    std::string list;
    for (const char* c : choices) list += std::string(list.empty() ? "" : ", ") + c;
    fail(path, "unknown value '" + v + "' (expected one of: " + list + ")");
  }

  Vector vector(const json& j, const Path& path, int size) const {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    if (size >= 0 && static_cast<int>(j.size()) != size)
      fail(path, "expected " + std::to_string(size) + " entries, got " + std::to_string(j.size()));
    Vector out(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
      out(static_cast<Eigen::Index>(i)) = number(j[i], index(path, i), -1e300, 1e300);
    return out;
  }

  Matrix matrix(const json& j, const Path& path, int dim) const {
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
      fail(path, "expected " + std::to_string(dim) + " rows");
    Matrix out(dim, dim);
    for (int r = 0; r < dim; ++r) out.row(r) = vector(j[static_cast<std::size_t>(r)], index(path, r), dim).transpose();
    return out;
  }

  static Path extend(Path path, const std::string& key) {
    path.push_back(key);
    return path;
  }
  static Path index(Path path, std::size_t i) {
    path.push_back("[" + std::to_string(i) + "]");
    return path;
  }

 private:
  const std::string& text_;
};

MatrixSpec parse_matrix(const Reader& r, const json& j, const Path& path, int dim, bool covariance) {
  MatrixSpec spec;
  if (j.is_array()) {
    spec.preset = "matrix";
    spec.entries = r.matrix(j, path, dim);
    return spec;
  }
  r.check_keys(j, path, {"preset", "scale", "values", "seed"});
  spec.preset = r.string(r.require(j, path, "preset"), Reader::extend(path, "preset"),
                         {"identity", "diagonal", "heat", "random"});
  if (j.contains("scale")) spec.scale = r.number(j.at("scale"), Reader::extend(path, "scale"), -1e6, 1e6);
  if (spec.preset == "diagonal") {
    spec.values = r.vector(r.require(j, path, "values"), Reader::extend(path, "values"), dim);
  } else if (j.contains("values")) {
    r.fail(Reader::extend(path, "values"), "only the diagonal preset takes values");
  }
  if (j.contains("seed")) spec.seed = r.unsigned64(j.at("seed"), Reader::extend(path, "seed"));
  if (covariance && spec.preset == "random" && spec.scale < 0.0)
    r.fail(Reader::extend(path, "scale"), "a random covariance needs scale >= 0");
  return spec;
}

json matrix_to_json(const MatrixSpec& spec) {
  if (spec.preset == "matrix") {
    json rows = json::array();
    for (Eigen::Index i = 0; i < spec.entries.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < spec.entries.cols(); ++k) row.push_back(spec.entries(i, k));
      rows.push_back(std::move(row));
    }
    return rows;
  }
  json out = {{"preset", spec.preset}, {"scale", spec.scale}};
  if (spec.preset == "diagonal") {
    json values = json::array();
    for (Eigen::Index i = 0; i < spec.values.size(); ++i) values.push_back(spec.values(i));
    out["values"] = std::move(values);
  }
  if (spec.preset == "random") out["seed"] = spec.seed;
  return out;
}

std::shared_ptr<const Drift> build_drift(const DriftSpec& spec, int dim) {
  if (spec.preset == "zero") return std::make_shared<ZeroDrift>(dim);
  const Matrix B = build_matrix(spec.B, dim, false);
  if (spec.preset == "linear") return std::make_shared<LinearClippedDrift>(B, spec.cap);
  if (spec.preset == "tanh") return std::make_shared<TanhDrift>(spec.scale, B);
  throw ConfigError("model.drift.preset", "unknown drift preset '" + spec.preset + "'");
}

}  // namespace

// ---------------------------------------------------------------------------------------------

Matrix build_matrix(const MatrixSpec& spec, int dim, bool covariance) {
  if (spec.preset == "matrix") {
    if (spec.entries.rows() != dim || spec.entries.cols() != dim)
      throw ConfigError("matrix", "entries must be " + std::to_string(dim) + " x " + std::to_string(dim));
    return spec.entries;
  }
  if (spec.preset == "identity") return spec.scale * Matrix::Identity(dim, dim);
  if (spec.preset == "diagonal") {
    if (spec.values.size() != dim) throw ConfigError("values", "expected " + std::to_string(dim) + " entries");
    return spec.values.asDiagonal();
  }
  if (spec.preset == "heat") {
    Matrix out = Matrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) out(k, k) = -spec.scale * std::pow((k + 1) * std::numbers::pi, 2);
    return out;
  }
  if (spec.preset == "random") {
    NormalStream normals(spec.seed, 0);
    Matrix G(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int k = 0; k < dim; ++k) G(i, k) = normals();
    if (covariance) {
      const Matrix S = G * G.transpose();
      return spec.scale * S / S.trace();
    }
    return spec.scale * G / LinearOperator(G).operator_norm();
  }
  throw ConfigError("preset", "unknown matrix preset '" + spec.preset + "'");
}

GalerkinModel build_model(const ModelSpec& spec) {
  const Matrix A = build_matrix(spec.A, spec.dim, false);
  const Matrix Q = build_matrix(spec.Q, spec.dim, true);
  auto drift = build_drift(spec.drift, spec.dim);
  if (spec.lipschitz && *spec.lipschitz < drift->lipschitz())
    throw ConfigError("model.L_F", "L_F is below the drift preset's Lipschitz constant " +
                                       std::to_string(drift->lipschitz()));
  return GalerkinModel(LinearOperator(A), CovarianceOperator(Q), std::move(drift), spec.M, spec.omega);
}

GalerkinModel ou_part(const GalerkinModel& model) {
  return GalerkinModel(model.A(), model.Q(), std::make_shared<ZeroDrift>(model.dim()), model.M(), model.omega());
}

SemigroupHandle build_handle(const GalerkinModel& model, const RunSpec& run, std::uint64_t seed) {
  const bool exact = run.method == "exact" || (run.method == "auto" && model.is_ou());
  if (exact) {
    if (!model.is_ou()) throw ConfigError("run.method", "the exact method needs the zero drift");
    return SemigroupHandle(model, ExactOU{run.samples}, seed);
  }
  return SemigroupHandle::monte_carlo(model, run.dt, run.samples, seed);
}

std::vector<double> time_grid(const RunSpec& run) {
  std::vector<double> out(static_cast<std::size_t>(run.t_steps) + 1);
  for (int k = 0; k <= run.t_steps; ++k) out[static_cast<std::size_t>(k)] = run.t_max * k / run.t_steps;
  return out;
}

Vector start_point(const RunSpec& run, int dim) { return run.x0.size() == 0 ? Vector::Zero(dim) : run.x0; }

ScenarioConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto byte = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
    throw ConfigError("", std::string("malformed structured text: ") + e.what(), line);
  }
  const Reader r(text);
  r.check_keys(root, {}, {"schema", "model", "run", "suites"});
  const std::string schema = r.string(r.require(root, {}, "schema"), {"schema"}, {});
  if (schema != kScenarioSchema)
    r.fail({"schema"}, "unsupported schema '" + schema + "' (expected " + kScenarioSchema + ")");

  ScenarioConfig config;

  // model
  const Path mp{"model"};
  const json& mj = r.require(root, {}, "model");
  r.check_keys(mj, mp, {"dim", "A", "Q", "drift", "M", "omega", "L_F"});
  ModelSpec& model = config.model;
  model.dim = r.integer(r.require(mj, mp, "dim"), Reader::extend(mp, "dim"), 1, 64);
  model.A = parse_matrix(r, r.require(mj, mp, "A"), Reader::extend(mp, "A"), model.dim, false);
  model.Q = parse_matrix(r, r.require(mj, mp, "Q"), Reader::extend(mp, "Q"), model.dim, true);
  if (mj.contains("drift")) {
    const Path dp = Reader::extend(mp, "drift");
    const json& dj = mj.at("drift");
    r.check_keys(dj, dp, {"preset", "scale", "cap", "B"});
    model.drift.preset = r.string(r.require(dj, dp, "preset"), Reader::extend(dp, "preset"), {"zero", "linear", "tanh"});
    if (dj.contains("scale")) model.drift.scale = r.number(dj.at("scale"), Reader::extend(dp, "scale"), -1e6, 1e6);
    if (dj.contains("cap")) model.drift.cap = r.number(dj.at("cap"), Reader::extend(dp, "cap"), 0.0, 1e6, true);
    if (dj.contains("B")) model.drift.B = parse_matrix(r, dj.at("B"), Reader::extend(dp, "B"), model.dim, false);
  }
  if (mj.contains("M")) model.M = r.number(mj.at("M"), Reader::extend(mp, "M"), 1.0, 1e6);
  if (mj.contains("omega")) model.omega = r.number(mj.at("omega"), Reader::extend(mp, "omega"), -1e6, 1e6);
  if (mj.contains("L_F")) model.lipschitz = r.number(mj.at("L_F"), Reader::extend(mp, "L_F"), 0.0, 1e6);

  // run
  RunSpec& run = config.run;
  if (root.contains("run")) {
    const Path rp{"run"};
    const json& rj = root.at("run");
    r.check_keys(rj, rp,
                 {"seed", "method", "dt", "samples", "particles", "samples_per_particle", "instances", "trials", "t_max",
                  "t_steps", "dims", "random_models", "refine", "lambda", "x0", "tolerances"});
    auto field = [&](const char* key) { return Reader::extend(rp, key); };
    if (rj.contains("seed")) run.seed = r.unsigned64(rj.at("seed"), field("seed"));
    if (rj.contains("method"))
      run.method = r.string(rj.at("method"), field("method"), {"auto", "exact", "monte_carlo"});
    if (rj.contains("dt")) run.dt = r.number(rj.at("dt"), field("dt"), 0.0, 10.0, true);
    if (rj.contains("samples")) run.samples = r.integer(rj.at("samples"), field("samples"), 2, 100000000);
    if (rj.contains("particles")) run.particles = r.integer(rj.at("particles"), field("particles"), 1, 10000000);
    if (rj.contains("samples_per_particle"))
      run.samples_per_particle = r.integer(rj.at("samples_per_particle"), field("samples_per_particle"), 1, 10000);
    if (rj.contains("instances")) run.instances = r.integer(rj.at("instances"), field("instances"), 0, 100000);
    if (rj.contains("trials")) run.trials = r.integer(rj.at("trials"), field("trials"), 1, 100000);
    if (rj.contains("t_max")) run.t_max = r.number(rj.at("t_max"), field("t_max"), 0.0, 1000.0, true);
    if (rj.contains("t_steps")) run.t_steps = r.integer(rj.at("t_steps"), field("t_steps"), 1, 100000);
    if (rj.contains("dims")) {
      const json& dj = rj.at("dims");
      if (!dj.is_array() || dj.empty()) r.fail(field("dims"), "expected a non-empty array of dimensions");
      run.dims.clear();
      for (std::size_t i = 0; i < dj.size(); ++i)
        run.dims.push_back(r.integer(dj[i], Reader::index(field("dims"), i), 1, 64));
    }
    if (rj.contains("random_models")) run.random_models = r.boolean(rj.at("random_models"), field("random_models"));
    if (rj.contains("refine")) run.refine = r.boolean(rj.at("refine"), field("refine"));
    if (rj.contains("lambda")) run.lambda = r.number(rj.at("lambda"), field("lambda"), 0.0, 1e6, true);
    if (rj.contains("x0")) run.x0 = r.vector(rj.at("x0"), field("x0"), model.dim);
    if (rj.contains("tolerances")) {
      const json& tj = rj.at("tolerances");
      r.expect_object(tj, field("tolerances"));
      for (const auto& item : tj.items()) {
        const Path tp = Reader::extend(field("tolerances"), item.key());
        const auto slash = item.key().find('/');
        const std::string suite = item.key().substr(0, slash);
        if (slash == std::string::npos || !is_suite_name(suite))
          r.fail(tp, "tolerance keys are '<suite>/<check>' with a known suite");
        run.tolerances[item.key()] = r.number(item.value(), tp, 0.0, 1e6);
      }
    }
  }

  // suites
  if (root.contains("suites")) {
    const json& sj = root.at("suites");
    if (!sj.is_array()) r.fail({"suites"}, "expected an array of suite names");
    for (std::size_t i = 0; i < sj.size(); ++i) {
      const Path sp = Reader::index({"suites"}, i);
      const std::string name = r.string(sj[i], sp, {});
      if (!is_suite_name(name)) r.fail(sp, "unknown suite '" + name + "'");
      if (std::find(config.suites.begin(), config.suites.end(), name) != config.suites.end())
        r.fail(sp, "suite '" + name + "' listed twice");
      config.suites.push_back(name);
    }
  }

  try {
    const GalerkinModel built = build_model(model);
    build_handle(built, run, 0);
  } catch (const ConfigError& e) {
    const Path where = e.field().rfind("run.", 0) == 0 ? Path{"run", e.field().substr(4)} : mp;
    r.fail(where, e.what());
  } catch (const std::exception& e) {
    r.fail(mp, e.what());
  }
  return config;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

json to_json(const ScenarioConfig& config) {
  const ModelSpec& m = config.model;
  json model = {{"dim", m.dim},
                {"A", matrix_to_json(m.A)},
                {"Q", matrix_to_json(m.Q)},
                {"drift",
                 {{"preset", m.drift.preset},
                  {"scale", m.drift.scale},
                  {"cap", m.drift.cap},
                  {"B", matrix_to_json(m.drift.B)}}}};
  if (m.M) model["M"] = *m.M;
  if (m.omega) model["omega"] = *m.omega;
  if (m.lipschitz) model["L_F"] = *m.lipschitz;

  const RunSpec& r = config.run;
  json run = {{"seed", r.seed},
              {"method", r.method},
              {"dt", r.dt},
              {"samples", r.samples},
              {"particles", r.particles},
              {"samples_per_particle", r.samples_per_particle},
              {"instances", r.instances},
              {"trials", r.trials},
              {"t_max", r.t_max},
              {"t_steps", r.t_steps},
              {"dims", r.dims},
              {"random_models", r.random_models},
              {"refine", r.refine}};
  if (r.lambda) run["lambda"] = *r.lambda;
  if (r.x0.size() > 0) run["x0"] = std::vector<double>(r.x0.data(), r.x0.data() + r.x0.size());
  json tolerances = json::object();
  for (const auto& [k, v] : r.tolerances) tolerances[k] = v;
  run["tolerances"] = std::move(tolerances);

  return {{"schema", kScenarioSchema}, {"model", std::move(model)}, {"run", std::move(run)}, {"suites", config.suites}};
}

std::string serialize_config(const ScenarioConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace semilab
