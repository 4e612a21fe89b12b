#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "semilab/linalg.hpp"
#include "semilab/model.hpp"
#include "semilab/stats.hpp"
#include "semilab/testfn.hpp"

namespace semilab {

struct ExactOU {
  int n_samples = 10000;  // only used when the handle is asked for samples
};

struct MonteCarlo {
  double dt = 1e-2;
  int n_samples = 10000;
};

/// Evaluator for P_t: the closed-form OU action (F = 0 only) or Monte Carlo over exponential-Euler
/// mild solutions. Sample i of every evaluation uses Philox stream i of `seed`, so two
/// evaluations with the same handle share their noise (common random numbers).
class SemigroupHandle {
 public:
  using Method = std::variant<ExactOU, MonteCarlo>;

  SemigroupHandle(GalerkinModel model, Method method, std::uint64_t seed = 0);

  static SemigroupHandle exact_ou(GalerkinModel model, std::uint64_t seed = 0);
  static SemigroupHandle monte_carlo(GalerkinModel model, double dt, int n_samples, std::uint64_t seed);

  const GalerkinModel& model() const { return model_; }
  const Method& method() const { return method_; }
  std::uint64_t seed() const { return seed_; }
  bool is_exact() const { return std::holds_alternative<ExactOU>(method_); }
  /// Step size; infinity for the exact handle (steps go straight to the requested times).
  double dt() const;
  int n_samples() const;

  SemigroupHandle with_seed(std::uint64_t seed) const;
  std::string describe() const;

 private:
  GalerkinModel model_;
  Method method_;
  std::uint64_t seed_;
};

struct TrajectoryRow {
  std::int64_t sample = 0;
  std::int64_t step = 0;
  double time = 0.0;
  Vector x;
};

struct TrajectoryRecord {
  int dim = 0;
  std::vector<TrajectoryRow> rows;
};

/// Columnar text: header `sample,step,time,x_1,...,x_d`, doubles in shortest round-trip form.
void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record);
TrajectoryRecord read_trajectory_csv(std::istream& in);

struct PathState {
  double time = 0.0;
  Matrix positions;  // n x d, row i is sample i
  std::uint64_t seed = 0;
  std::optional<TrajectoryRecord> trajectory;
};

/// Exponential Euler for the mild equation:
///   X_{k+1} = e^{hA} X_k + e^{hA} F(X_k) h + xi_k,  xi_k ~ N(0, Q_h) drawn exactly.
/// Full steps of size dt, then a final partial step when T/dt is not an integer.
PathState simulate_mild(const GalerkinModel& model, const Vector& x, double T, double dt, int n, std::uint64_t seed,
                        bool record_trajectory = false);

/// One exponential-Euler step for a single state with a given N(0, Q_h) increment; the building
/// block of the simulator, exposed for coupling studies.
Vector exponential_euler_step(const GalerkinModel& model, const Vector& x, double h, const Vector& increment);

/// Row-wise paths started from `starts` (n x d), observed at the sorted times `times`. Row i uses
/// stream `stream_offset + i`. dt may be infinity, in which case each step goes straight to the
/// next observation time (exact for F = 0). `observe(k, begin, block)` receives the rows
/// [begin, begin + block.rows()) at times[k]; calls for different blocks may run concurrently.
void simulate_paths(const GalerkinModel& model, const Matrix& starts, const std::vector<double>& times, double dt,
                    std::uint64_t seed, std::uint64_t stream_offset,
                    const std::function<void(std::size_t, std::size_t, const Matrix&)>& observe);

/// Endpoints X(t, x) of the handle's n_samples paths (exact Gaussian transition for ExactOU).
Matrix sample_endpoints(const SemigroupHandle& handle, const Vector& x, double t);

/// P_t phi(x) = E phi(X(t, x)). Exact handles apply the closed form; stderr is then 0.
Estimate transition_apply(const SemigroupHandle& handle, const TestFunction& phi, double t, const Vector& x);
Estimate transition_apply(const SemigroupHandle& handle, const BoundTestFunction& phi, double t, const Vector& x);

/// t -> P_t phi(x) on a sorted time grid; Monte Carlo handles use one set of paths for all times.
std::vector<Estimate> transition_orbit(const SemigroupHandle& handle, const BoundTestFunction& phi,
                                       const std::vector<double>& times, const Vector& x);

/// Per-path values phi(X(t_k, x)), n_samples x K (Monte Carlo handles only).
Matrix sample_orbit(const SemigroupHandle& handle, const BoundTestFunction& phi, const std::vector<double>& times,
                    const Vector& x);

struct ContinuityRow {
  double time = 0.0;
  double mean_square = 0.0;
  double stderr = 0.0;
};

/// E|X(t0 + delta) - X(t0)|^2 on the delta grid, with both times read from the same paths.
std::vector<ContinuityRow> stochastic_continuity_check(const SemigroupHandle& handle, const Vector& x, double t0,
                                                       const std::vector<double>& deltas);

struct FirstVariation {
  Matrix positions;  // X(T, x), n x d
  Matrix tangents;   // eta^h(T, x), n x d
};

/// eta_{k+1} = e^{hA} (eta_k + h DF(X_k)[eta_k]) along the same paths simulate_mild produces for
/// this seed.
FirstVariation first_variation(const GalerkinModel& model, const Vector& x, const Vector& h, double T, double dt,
                               int n, std::uint64_t seed);

/// <D P_t f(x), h> = E <Df(X(t, x)), eta^h(t, x)>.
Estimate gradient_transition(const SemigroupHandle& handle, const TestFunction& f, double t, const Vector& x,
                             const Vector& h);

}  // namespace semilab
