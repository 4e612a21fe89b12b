#include "semilab/measure.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include "semilab/errors.hpp"
#include "semilab/parallel.hpp"
#include "semilab/quadrature.hpp"
#include "semilab/random.hpp"

namespace semilab {

namespace {

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

double parse_double(const std::string& token) {
  double value = 0.0;
  const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
  if (result.ec != std::errc() || result.ptr != token.data() + token.size())
    throw IoError("measure csv: bad number '" + token + "'");
  return value;
}

// Neumaier summation.
double compensated_sum(const Vector& v) {
  double sum = 0.0, carry = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double x = v(i);
    const double t = sum + x;
    carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + carry;
}

void check_grid(const std::vector<double>& times, const char* where) {
  if (times.empty() || times.front() != 0.0) throw InputError(std::string(where) + ": time grid must start at 0");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]) || !std::isfinite(times[k]))
      throw InputError(std::string(where) + ": time grid must be strictly increasing and finite");
}

void check_mu(const GalerkinModel& model, const ParticleMeasure& mu, const char* where) {
  if (mu.dim() != model.dim()) throw ContractViolation(std::string(where) + ": measure dimension differs from the model");
}

Matrix model_drift_rows(const GalerkinModel& model, const Matrix& points) {
  Matrix drifts = points * model.A().matrix().transpose();
  if (!model.drift().is_zero()) {
    Matrix F;
    model.drift().apply_rows(points, F);
    drifts += F;
  }
  return drifts;
}

// Integrals over [0, T] of s -> P_{s + shift} f(x) against a weight, node by node.
struct OrbitIntegral {
  double value = 0.0;
  double stderr = 0.0;
};

OrbitIntegral integrate_orbit(const SemigroupHandle& handle, const BoundTestFunction& f, const Vector& x,
                              const QuadratureRule& rule, double shift, const std::vector<double>& node_weights) {
  std::vector<double> times(rule.size());
  for (std::size_t k = 0; k < rule.size(); ++k) times[k] = rule.nodes[k] + shift;
  if (handle.is_exact()) {
    double sum = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k)
      sum += node_weights[k] * f.ou_transform(handle.model(), times[k]).eval(x);
    return {sum, 0.0};
  }
  const Matrix samples = sample_orbit(handle, f, times, x);
  const Eigen::Map<const Vector> w(node_weights.data(), static_cast<Eigen::Index>(node_weights.size()));
  const Vector per_path = samples * w;
  Moments m;
  for (Eigen::Index i = 0; i < per_path.size(); ++i) m.add(per_path(i));
  return {m.mean(), m.stderr()};
}

}  // namespace

// ---------------------------------------------------------------------------------------------

ParticleMeasure::ParticleMeasure(Matrix particles, Vector weights, std::string label)
    : particles_(std::move(particles)), weights_(std::move(weights)), label_(std::move(label)) {
  if (particles_.rows() == 0) throw InputError("measure: no particles");
  if (weights_.size() != particles_.rows()) throw InputError("measure: weight count differs from particle count");
  if (!particles_.allFinite() || !weights_.allFinite()) throw InputError("measure: non-finite particle or weight");
}

ParticleMeasure ParticleMeasure::dirac(const Vector& x, int copies, std::string label) {
  if (copies < 1) throw InputError("dirac: copies must be >= 1");
  return ParticleMeasure(x.transpose().replicate(copies, 1), Vector::Constant(copies, 1.0 / copies), std::move(label));
}

ParticleMeasure ParticleMeasure::empirical(Matrix particles, std::string label) {
  const auto n = particles.rows();
  if (n == 0) throw InputError("measure: no particles");
  return ParticleMeasure(std::move(particles), Vector::Constant(n, 1.0 / static_cast<double>(n)), std::move(label));
}

double ParticleMeasure::total_mass() const { return compensated_sum(weights_); }

double ParticleMeasure::total_variation() const { return compensated_sum(weights_.cwiseAbs()); }

bool ParticleMeasure::is_probability(double tolerance) const {
  return (weights_.array() >= 0.0).all() && std::abs(total_mass() - 1.0) <= tolerance;
}

double ParticleMeasure::integrate(const BoundTestFunction& phi) const {
  if (phi.dim() != dim()) throw ContractViolation("integrate: dimension mismatch");
  if (phi.is_constant()) return phi.constant_term() * total_mass();
  Vector values;
  phi.eval_varying(particles_, values);
  return weights_.dot(values) + phi.constant_term() * total_mass();
}

void MeasureTrajectory::validate() const {
  check_grid(times, "measure trajectory");
  if (snapshots.size() != times.size()) throw ContractViolation("measure trajectory: one snapshot per time required");
}

// ---------------------------------------------------------------------------------------------

ParticleMeasure dual_pushforward(const SemigroupHandle& handle, const ParticleMeasure& mu, double t,
                                 int samples_per_particle, std::uint64_t seed) {
  check_mu(handle.model(), mu, "dual_pushforward");
  if (!std::isfinite(t) || t < 0.0) throw InputError("dual_pushforward: t must be finite and >= 0");
  if (samples_per_particle < 1) throw InputError("dual_pushforward: samples_per_particle must be >= 1");
  const int m = samples_per_particle;
  const Eigen::Index n = mu.size();
  Matrix starts(n * m, mu.dim());
  Vector weights(n * m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < m; ++k) {
      starts.row(i * m + k) = mu.particles().row(i);
      weights(i * m + k) = mu.weights()(i) / m;
    }
  Matrix out(starts.rows(), starts.cols());
  simulate_paths(handle.model(), starts, {t}, handle.dt(), seed, 0,
                 [&](std::size_t, std::size_t begin, const Matrix& X) {
                   out.middleRows(static_cast<Eigen::Index>(begin), X.rows()) = X;
                 });
  return ParticleMeasure(std::move(out), std::move(weights), mu.label());
}

MeasureTrajectory evolve_measure(const SemigroupHandle& handle, const ParticleMeasure& initial,
                                 const std::vector<double>& times, std::uint64_t seed) {
  check_mu(handle.model(), initial, "evolve_measure");
  check_grid(times, "evolve_measure");
  std::vector<Matrix> states(times.size(), Matrix(initial.size(), initial.dim()));
  simulate_paths(handle.model(), initial.particles(), times, handle.dt(), seed, 0,
                 [&](std::size_t k, std::size_t begin, const Matrix& X) {
                   states[k].middleRows(static_cast<Eigen::Index>(begin), X.rows()) = X;
                 });
  MeasureTrajectory out;
  out.times = times;
  out.handle = handle.describe();
  out.seed = seed;
  out.snapshots.reserve(times.size());
  for (auto& s : states) out.snapshots.emplace_back(std::move(s), initial.weights(), initial.label());
  return out;
}

DualityResult duality_check(const SemigroupHandle& handle, const TestFunction& phi_spec, const ParticleMeasure& mu,
                            double t, int samples_per_particle, std::uint64_t seed, DualityMode mode,
                            std::uint64_t rhs_seed) {
  const BoundTestFunction phi = bind(phi_spec, handle.model());
  const int m = samples_per_particle;
  if (mode == DualityMode::IndependentSamples && m < 2)
    throw InputError("duality_check: independent mode needs samples_per_particle >= 2");
  const ParticleMeasure pushed = dual_pushforward(handle, mu, t, m, seed);
  Vector values;
  phi.eval_varying(pushed.particles(), values);
  const double c = phi.constant_term();
  const Eigen::Index n = mu.size();

  DualityResult r;
  double lhs = 0.0;
  for (Eigen::Index j = 0; j < values.size(); ++j) lhs += pushed.weights()(j) * values(j);
  r.lhs = lhs + c * pushed.total_mass();

  // Per-particle sample means and variances of phi(X(t, x_i)).
  Vector group_mean(n), group_var(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Moments g;
    for (int k = 0; k < m; ++k) g.add(values(i * m + k));
    group_mean(i) = g.mean();
    group_var(i) = g.variance();
  }
  const Vector& w = mu.weights();
  if (m >= 2) {
    r.lhs_stderr = std::sqrt(w.cwiseAbs2().dot(group_var) / m);
  } else {
    const double mean = w.dot(group_mean) / mu.total_mass();
    r.lhs_stderr = std::sqrt(w.cwiseAbs2().dot((group_mean.array() - mean).square().matrix()));
  }

  if (mode == DualityMode::SharedSamples) {
    r.rhs = w.dot(group_mean) + c * mu.total_mass();
    r.rhs_stderr = r.lhs_stderr;
    r.residual = std::abs(r.lhs - r.rhs);
    r.combined_stderr = 0.0;
    return r;
  }

  double rhs = 0.0, var = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Estimate e = transition_apply(handle.with_seed(derive_seed(rhs_seed, static_cast<std::uint64_t>(i))), phi, t,
                                        mu.particles().row(i).transpose());
    rhs += w(i) * (e.value - c);
    var += w(i) * w(i) * e.stderr * e.stderr;
  }
  r.rhs = rhs + c * mu.total_mass();
  r.rhs_stderr = std::sqrt(var);
  r.residual = std::abs(r.lhs - r.rhs);
  r.combined_stderr = std::hypot(r.lhs_stderr, r.rhs_stderr);
  return r;
}

// ---------------------------------------------------------------------------------------------

BankEvaluator::Sums::Sums(std::size_t bank)
    : value(Vector::Zero(static_cast<Eigen::Index>(bank))),
      generator(Vector::Zero(static_cast<Eigen::Index>(bank))),
      generator_w2(Vector::Zero(static_cast<Eigen::Index>(bank))),
      generator_sq_w2(Vector::Zero(static_cast<Eigen::Index>(bank))) {}

void BankEvaluator::Sums::merge(const Sums& other) {
  value += other.value;
  generator += other.generator;
  generator_w2 += other.generator_w2;
  generator_sq_w2 += other.generator_sq_w2;
  weight_sq += other.weight_sq;
}

BankEvaluator::BankEvaluator(const std::vector<TestFunction>& bank, const GalerkinModel& model) : model_(model) {
  KernelBinder binder(model);
  for (const auto& f : bank) {
    functions_.push_back(binder.bind(f));
    std::vector<std::size_t> index;
    for (const auto& term : functions_.back().terms()) {
      std::size_t k = 0;
      while (k < kernels_.size() && kernels_[k] != term.kernel) ++k;
      if (k == kernels_.size()) kernels_.push_back(term.kernel);
      index.push_back(k);
    }
    kernel_index_.push_back(std::move(index));
  }
}

void BankEvaluator::accumulate(const Matrix& points, const Vector& weights, Sums& sums) const {
  const Matrix drifts = model_drift_rows(model_, points);
  std::vector<ComplexVector> values(kernels_.size()), generators(kernels_.size());
  for (std::size_t k = 0; k < kernels_.size(); ++k) kernels_[k]->evaluate(points, values[k], &drifts, &generators[k]);

  const Eigen::Index n = points.rows();
  const Vector w2 = weights.cwiseAbs2();
  const double mass = weights.sum();
  sums.weight_sq += w2.sum();
  Vector v(n), g(n);
  for (std::size_t b = 0; b < functions_.size(); ++b) {
    const auto& terms = functions_[b].terms();
    v.setZero();
    g.setZero();
    for (std::size_t j = 0; j < terms.size(); ++j) {
      const std::size_t k = kernel_index_[b][j];
      if (terms[j].part == Part::Real) {
        v += terms[j].coefficient * values[k].real();
        g += terms[j].coefficient * generators[k].real();
      } else {
        v += terms[j].coefficient * values[k].imag();
        g += terms[j].coefficient * generators[k].imag();
      }
    }
    const auto e = static_cast<Eigen::Index>(b);
    sums.value(e) += weights.dot(v) + functions_[b].constant_term() * mass;
    sums.generator(e) += weights.dot(g);
    sums.generator_w2(e) += w2.dot(g);
    sums.generator_sq_w2(e) += w2.dot(g.cwiseAbs2());
  }
}

namespace {

void store_moments(const BankEvaluator::Sums& s, double mass, Eigen::Index k, BankMoments& out) {
  for (Eigen::Index b = 0; b < s.value.size(); ++b) {
    out.mean(k, b) = s.value(b);
    out.generator(k, b) = s.generator(b);
    const double gbar = s.generator(b) / mass;
    const double var = s.generator_sq_w2(b) - 2.0 * gbar * s.generator_w2(b) + gbar * gbar * s.weight_sq;
    out.generator_stderr(k, b) = std::sqrt(std::max(0.0, var));
  }
}

BankMoments empty_moments(const std::vector<double>& times, std::size_t bank) {
  BankMoments out;
  out.times = times;
  const auto K = static_cast<Eigen::Index>(times.size());
  const auto B = static_cast<Eigen::Index>(bank);
  out.mean = Matrix::Zero(K, B);
  out.generator = Matrix::Zero(K, B);
  out.generator_stderr = Matrix::Zero(K, B);
  return out;
}

}  // namespace

BankMoments bank_moments(const MeasureTrajectory& trajectory, const std::vector<TestFunction>& bank,
                         const GalerkinModel& model) {
  trajectory.validate();
  const BankEvaluator evaluator(bank, model);
  BankMoments out = empty_moments(trajectory.times, bank.size());
  for (std::size_t k = 0; k < trajectory.snapshots.size(); ++k) {
    const ParticleMeasure& mu = trajectory.snapshots[k];
    check_mu(model, mu, "bank_moments");
    const auto n = static_cast<std::size_t>(mu.size());
    std::vector<BankEvaluator::Sums> partial(chunk_count(n), BankEvaluator::Sums(bank.size()));
    parallel_chunks(n, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
      const auto b = static_cast<Eigen::Index>(begin);
      const auto m = static_cast<Eigen::Index>(end - begin);
      evaluator.accumulate(mu.particles().middleRows(b, m), mu.weights().segment(b, m), partial[chunk]);
    });
    BankEvaluator::Sums total(bank.size());
    for (const auto& p : partial) total.merge(p);
    store_moments(total, mu.total_mass(), static_cast<Eigen::Index>(k), out);
  }
  return out;
}

BankMoments evolve_bank_moments(const SemigroupHandle& handle, const ParticleMeasure& initial,
                                const std::vector<double>& times, const std::vector<TestFunction>& bank,
                                std::uint64_t seed) {
  check_mu(handle.model(), initial, "evolve_bank_moments");
  check_grid(times, "evolve_bank_moments");
  const BankEvaluator evaluator(bank, handle.model());
  const auto n = static_cast<std::size_t>(initial.size());
  std::vector<std::vector<BankEvaluator::Sums>> partial(
      times.size(), std::vector<BankEvaluator::Sums>(chunk_count(n), BankEvaluator::Sums(bank.size())));
  simulate_paths(handle.model(), initial.particles(), times, handle.dt(), seed, 0,
                 [&](std::size_t k, std::size_t begin, const Matrix& X) {
                   evaluator.accumulate(X, initial.weights().segment(static_cast<Eigen::Index>(begin), X.rows()),
                                        partial[k][begin / kChunkSize]);
                 });
  BankMoments out = empty_moments(times, bank.size());
  const double mass = initial.total_mass();
  for (std::size_t k = 0; k < times.size(); ++k) {
    BankEvaluator::Sums total(bank.size());
    for (const auto& p : partial[k]) total.merge(p);
    store_moments(total, mass, static_cast<Eigen::Index>(k), out);
  }
  return out;
}

MeasureResidual measure_equation_residual(const BankMoments& moments) {
  if (moments.times.size() < 2) throw InputError("measure_equation_residual: need at least 2 snapshots");
  check_grid(moments.times, "measure_equation_residual");
  MeasureResidual r;
  r.times = moments.times;
  r.mean = moments.mean;
  r.generator = moments.generator;
  r.generator_stderr = moments.generator_stderr;
  r.integral = Matrix::Zero(moments.mean.rows(), moments.mean.cols());
  for (Eigen::Index k = 1; k < r.integral.rows(); ++k) {
    const double h = moments.times[static_cast<std::size_t>(k)] - moments.times[static_cast<std::size_t>(k) - 1];
    r.integral.row(k) = r.integral.row(k - 1) + 0.5 * h * (r.generator.row(k - 1) + r.generator.row(k));
  }
  r.residual = ((r.mean.rowwise() - r.mean.row(0)) - r.integral).cwiseAbs();
  return r;
}

MeasureResidual measure_equation_residual(const MeasureTrajectory& trajectory, const std::vector<TestFunction>& bank,
                                          const GalerkinModel& model) {
  if (trajectory.snapshots.size() < 2) throw InputError("measure_equation_residual: need at least 2 snapshots");
  return measure_equation_residual(bank_moments(trajectory, bank, model));
}

// ---------------------------------------------------------------------------------------------

ResolventResult resolvent_apply(const SemigroupHandle& handle, double lambda, const TestFunction& f, const Vector& x,
                                double tolerance, int quad_steps) {
  return resolvent_apply_shifted(handle, lambda, f, x, 0.0, tolerance, quad_steps);
}

ResolventResult resolvent_apply_shifted(const SemigroupHandle& handle, double lambda, const TestFunction& f_spec,
                                        const Vector& x, double shift, double tolerance, int quad_steps) {
  const GalerkinModel& model = handle.model();
  const double threshold = std::max(0.0, model.omega() + model.M() * model.lipschitz());
  if (!std::isfinite(lambda) || !(lambda > threshold))
    throw InputError("resolvent_apply: lambda must exceed max(0, omega + M L_F) = " + format_double(threshold));
  if (!(tolerance > 0.0)) throw InputError("resolvent_apply: tolerance must be > 0");
  if (quad_steps < 0) throw InputError("resolvent_apply: quad_steps must be >= 0");
  if (!std::isfinite(shift) || shift < 0.0) throw InputError("resolvent_apply: shift must be >= 0");
  if (x.size() != model.dim()) throw ContractViolation("resolvent_apply: dimension mismatch");

  const BoundTestFunction f = bind(f_spec, model);
  const double norm = f.sup_bound();
  ResolventResult r;
  if (norm == 0.0) return r;
  r.horizon = std::max(0.0, std::log(2.0 * norm / (lambda * tolerance)) / lambda);
  r.tail_bound = std::exp(-lambda * r.horizon) * norm / lambda;
  if (r.horizon == 0.0) return r;
  const int panels = quad_steps > 0 ? quad_steps : std::max(32, static_cast<int>(std::ceil(4.0 * lambda * r.horizon)));
  const QuadratureRule rule = composite_gauss_legendre(0.0, r.horizon, panels, 8);
  std::vector<double> weights(rule.size());
  for (std::size_t k = 0; k < rule.size(); ++k) weights[k] = rule.weights[k] * std::exp(-lambda * rule.nodes[k]);
  const OrbitIntegral integral = integrate_orbit(handle, f, x, rule, shift, weights);
  r.value = integral.value;
  r.stderr = integral.stderr;
  return r;
}

Estimate backward_solution(const SemigroupHandle& handle, const TestFunction& phi_spec, double T, double t,
                           const Vector& x, int quad_steps) {
  if (!std::isfinite(T) || T < 0.0) throw InputError("backward_solution: T must be finite and >= 0");
  if (!std::isfinite(t) || t < 0.0 || t > T) throw InputError("backward_solution: t must lie in [0, T]");
  if (quad_steps < 1) throw InputError("backward_solution: quad_steps must be >= 1");
  if (x.size() != handle.model().dim()) throw ContractViolation("backward_solution: dimension mismatch");
  if (t == T) return {0.0, 0.0};
  const BoundTestFunction phi = bind(phi_spec, handle.model());
  const QuadratureRule rule = composite_gauss_legendre(0.0, T - t, quad_steps, 8);
  const OrbitIntegral integral = integrate_orbit(handle, phi, x, rule, 0.0, rule.weights);
  return {-integral.value, integral.stderr};
}

// ---------------------------------------------------------------------------------------------

void write_measure_csv(std::ostream& out, const ParticleMeasure& mu) {
  out << "weight";
  for (int j = 1; j <= mu.dim(); ++j) out << ",x_" << j;
  out << '\n';
  for (int i = 0; i < mu.size(); ++i) {
    out << format_double(mu.weights()(i));
    for (int j = 0; j < mu.dim(); ++j) out << ',' << format_double(mu.particles()(i, j));
    out << '\n';
  }
  if (!out) throw IoError("measure csv: write failed");
}

ParticleMeasure read_measure_csv(std::istream& in, std::string label) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("measure csv: missing header");
  std::vector<std::string> names;
  {
    std::istringstream header(line);
    std::string token;
    while (std::getline(header, token, ',')) names.push_back(token);
  }
  if (names.size() < 2 || names[0] != "weight") throw IoError("measure csv: unexpected header '" + line + "'");
  const int d = static_cast<int>(names.size()) - 1;
  for (int j = 0; j < d; ++j)
    if (names[static_cast<std::size_t>(j) + 1] != "x_" + std::to_string(j + 1))
      throw IoError("measure csv: unexpected column '" + names[static_cast<std::size_t>(j) + 1] + "'");
  std::vector<double> flat;
  std::vector<double> weights;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    int count = 0;
    while (std::getline(fields, token, ',')) {
      (count == 0 ? weights : flat).push_back(parse_double(token));
      ++count;
    }
    if (count != d + 1) throw IoError("measure csv: wrong field count");
  }
  const auto n = static_cast<Eigen::Index>(weights.size());
  Matrix particles = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), n, d);
  return ParticleMeasure(std::move(particles), Eigen::Map<const Vector>(weights.data(), n), std::move(label));
}

}  // namespace semilab
