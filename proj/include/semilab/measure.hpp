#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "semilab/linalg.hpp"
#include "semilab/model.hpp"
#include "semilab/sde.hpp"
#include "semilab/stats.hpp"
#include "semilab/testfn.hpp"

namespace semilab {

/// Weighted particles sum_i w_i delta_{x_i}; weights may be signed.
class ParticleMeasure {
 public:
  ParticleMeasure(Matrix particles, Vector weights, std::string label = "");

  /// `copies` copies of x with weight 1/copies each.
  static ParticleMeasure dirac(const Vector& x, int copies = 1, std::string label = "dirac");
  /// Equal weights 1/n.
  static ParticleMeasure empirical(Matrix particles, std::string label = "empirical");

  int size() const { return static_cast<int>(particles_.rows()); }
  int dim() const { return static_cast<int>(particles_.cols()); }
  const Matrix& particles() const { return particles_; }
  const Vector& weights() const { return weights_; }
  const std::string& label() const { return label_; }

  /// Compensated sum of the weights.
  double total_mass() const;
  /// sum |w_i|: an upper bound for the total variation of the represented measure.
  double total_variation() const;
  bool is_probability(double tolerance = 1e-12) const;

  /// \int phi d mu.
  double integrate(const BoundTestFunction& phi) const;

 private:
  Matrix particles_;
  Vector weights_;
  std::string label_;
};

/// Snapshots mu_{t_k} on a strictly increasing grid starting at 0.
struct MeasureTrajectory {
  std::vector<double> times;
  std::vector<ParticleMeasure> snapshots;
  std::string handle;
  std::uint64_t seed = 0;

  void validate() const;
};

/// P_t^* mu: every particle spawns `samples_per_particle` endpoints of X(t, x_i), each carrying
/// w_i / samples_per_particle. Endpoint (i, k) uses stream i * samples_per_particle + k.
ParticleMeasure dual_pushforward(const SemigroupHandle& handle, const ParticleMeasure& mu, double t,
                                 int samples_per_particle, std::uint64_t seed);

/// One path per particle through the grid (a chain of one-sample pushforwards).
MeasureTrajectory evolve_measure(const SemigroupHandle& handle, const ParticleMeasure& initial,
                                 const std::vector<double>& times, std::uint64_t seed);

enum class DualityMode { SharedSamples, IndependentSamples };

struct DualityResult {
  double lhs = 0.0;  // \int phi d(P_t^* mu)
  double rhs = 0.0;  // \int P_t phi d mu
  double lhs_stderr = 0.0;
  double rhs_stderr = 0.0;
  double residual = 0.0;
  double combined_stderr = 0.0;
};

/// Shared mode integrates phi over one pushforward in two summation orders. Independent mode
/// estimates the right side with transition_apply under seeds derived from `rhs_seed`.
DualityResult duality_check(const SemigroupHandle& handle, const TestFunction& phi, const ParticleMeasure& mu,
                            double t, int samples_per_particle, std::uint64_t seed, DualityMode mode,
                            std::uint64_t rhs_seed = 0);

/// Per-time integrals of every bank function phi and of K_0 phi against mu_t.
struct BankMoments {
  std::vector<double> times;
  Matrix mean;                // K x B: \int phi d mu_{t_k}
  Matrix generator;           // K x B: \int K_0 phi d mu_{t_k}
  Matrix generator_stderr;    // K x B
};

struct MeasureResidual {
  std::vector<double> times;
  Matrix mean;
  Matrix generator;
  Matrix generator_stderr;
  Matrix integral;  // trapezoid \int_0^{t_k} g
  Matrix residual;  // |m(t_k) - m(0) - integral|

  double max_residual() const { return residual.cwiseAbs().maxCoeff(); }
};

/// Evaluates a bank on weighted point blocks, sharing kernels between real and imaginary parts.
class BankEvaluator {
 public:
  BankEvaluator(const std::vector<TestFunction>& bank, const GalerkinModel& model);

  std::size_t size() const { return functions_.size(); }
  const BoundTestFunction& function(std::size_t b) const { return functions_[b]; }

  /// Adds to per-function sums: sum w phi, sum w K0phi, sum w^2 K0phi, sum w^2 (K0phi)^2, sum w^2.
  struct Sums {
    Vector value, generator, generator_w2, generator_sq_w2;
    double weight_sq = 0.0;
    explicit Sums(std::size_t bank = 0);
    void merge(const Sums& other);
  };
  void accumulate(const Matrix& points, const Vector& weights, Sums& sums) const;

 private:
  const GalerkinModel& model_;
  std::vector<BoundTestFunction> functions_;
  std::vector<std::shared_ptr<const ExponentialKernel>> kernels_;
  std::vector<std::vector<std::size_t>> kernel_index_;  // per function, per term
};

BankMoments bank_moments(const MeasureTrajectory& trajectory, const std::vector<TestFunction>& bank,
                         const GalerkinModel& model);

/// Same moments as evolve_measure followed by bank_moments, without keeping the snapshots.
BankMoments evolve_bank_moments(const SemigroupHandle& handle, const ParticleMeasure& initial,
                                const std::vector<double>& times, const std::vector<TestFunction>& bank,
                                std::uint64_t seed);

/// residual_k = |m(t_k) - m(0) - \int_0^{t_k} g|, trapezoid rule on the snapshot grid.
MeasureResidual measure_equation_residual(const BankMoments& moments);
MeasureResidual measure_equation_residual(const MeasureTrajectory& trajectory, const std::vector<TestFunction>& bank,
                                          const GalerkinModel& model);

struct ResolventResult {
  double value = 0.0;
  double stderr = 0.0;
  double tail_bound = 0.0;  // e^{-lambda T} ||f|| / lambda
  double horizon = 0.0;     // truncation time T
};

/// \int_0^T e^{-lambda t} P_t f(x) dt with T chosen so the tail bound is <= tolerance / 2.
/// Requires lambda > max(0, omega + M L_F). quad_steps = 0 picks the panel count from lambda T.
ResolventResult resolvent_apply(const SemigroupHandle& handle, double lambda, const TestFunction& f, const Vector& x,
                                double tolerance = 1e-8, int quad_steps = 0);

/// Same integral for s -> P_{s + shift} f(x), i.e. R_shift applied to the resolvent.
ResolventResult resolvent_apply_shifted(const SemigroupHandle& handle, double lambda, const TestFunction& f,
                                        const Vector& x, double shift, double tolerance = 1e-8, int quad_steps = 0);

/// u(t, x) = -\int_0^{T - t} P_s phi(x) ds; u(T, x) = 0 exactly.
Estimate backward_solution(const SemigroupHandle& handle, const TestFunction& phi, double T, double t,
                           const Vector& x, int quad_steps = 16);

/// CSV `weight,x_1,...,x_d` with shortest round-trip doubles.
void write_measure_csv(std::ostream& out, const ParticleMeasure& mu);
ParticleMeasure read_measure_csv(std::istream& in, std::string label = "");

}  // namespace semilab
