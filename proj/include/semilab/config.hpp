#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semilab/linalg.hpp"
#include "semilab/model.hpp"
#include "semilab/sde.hpp"

namespace semilab {

inline constexpr const char* kScenarioSchema = "semilab.scenario/1";

/// A matrix given entry-wise or by a named preset.
///   matrix    explicit entries
///   identity  scale * I
///   diagonal  diag(values)
///   heat      diag(-scale * (k pi)^2), k = 1..d (Dirichlet Laplacian modes)
///   random    seeded: a Gaussian matrix rescaled to operator norm `scale`, or for covariances
///             L L^T rescaled to trace `scale`
struct MatrixSpec {
  std::string preset = "identity";
  double scale = 1.0;
  Vector values;
  Matrix entries;
  std::uint64_t seed = 0;
};

struct DriftSpec {
  std::string preset = "zero";  // zero | linear | tanh
  double scale = 1.0;           // tanh amplitude
  double cap = 1.0;             // linear clipping level
  MatrixSpec B;                 // coupling matrix
};

struct ModelSpec {
  int dim = 1;
  MatrixSpec A;
  MatrixSpec Q;
  DriftSpec drift;
  std::optional<double> M;
  std::optional<double> omega;
  std::optional<double> lipschitz;  // L_F; must not undercut the preset's own constant
};

struct RunSpec {
  std::uint64_t seed = 1;
  std::string method = "auto";  // auto | exact | monte_carlo
  double dt = 0.01;
  int samples = 100000;
  int particles = 100000;
  int samples_per_particle = 4;
  int instances = 0;  // 0: each suite's own default
  int trials = 100;
  double t_max = 1.0;
  int t_steps = 64;
  std::vector<int> dims{1, 2, 4};
  bool random_models = false;
  bool refine = false;
  std::optional<double> lambda;
  Vector x0;  // empty: origin
  std::map<std::string, double> tolerances;
};

struct ScenarioConfig {
  ModelSpec model;
  RunSpec run;
  std::vector<std::string> suites;
};

/// Parses structured text. Errors carry the offending field and its line.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

nlohmann::json to_json(const ScenarioConfig& config);
/// Canonical text: every field written, defaults included, two-space indentation.
std::string serialize_config(const ScenarioConfig& config);

Matrix build_matrix(const MatrixSpec& spec, int dim, bool covariance);
GalerkinModel build_model(const ModelSpec& spec);
/// The model with its drift removed.
GalerkinModel ou_part(const GalerkinModel& model);
/// Handle for the run's method: exact needs F = 0; auto picks exact iff F = 0.
SemigroupHandle build_handle(const GalerkinModel& model, const RunSpec& run, std::uint64_t seed);

/// The run's t-grid 0, t_max / t_steps, ..., t_max.
std::vector<double> time_grid(const RunSpec& run);
Vector start_point(const RunSpec& run, int dim);

}  // namespace semilab
