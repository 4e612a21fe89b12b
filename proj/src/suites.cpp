#include "semilab/suites.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "semilab/approx.hpp"
#include "semilab/config.hpp"
#include "semilab/errors.hpp"
#include "semilab/measure.hpp"
#include "semilab/ou.hpp"
#include "semilab/quadrature.hpp"
#include "semilab/random.hpp"
#include "semilab/report.hpp"

namespace semilab {

namespace {

// Everything a suite needs: config, model, seed, and the record builder.
class Context {
 public:
  Context(const ScenarioConfig& config, const GalerkinModel& model, std::uint64_t seed)
      : config(config), run(config.run), model(model), seed(seed) {}

  const ScenarioConfig& config;
  const RunSpec& run;
  const GalerkinModel& model;
  std::uint64_t seed;

  int instances(int fallback) const { return run.instances > 0 ? run.instances : fallback; }

  double tolerance(const std::string& identity, double fallback) const {
    const auto it = run.tolerances.find(identity);
    return it == run.tolerances.end() ? fallback : it->second;
  }

  CheckRecord record(std::string identity, std::string formula, double residual, double tolerance,
                     std::optional<double> stderr = std::nullopt) const {
    CheckRecord r;
    r.identity = std::move(identity);
    r.paper_ref = std::move(formula);
    r.residual = residual;
    r.tolerance = tolerance;
    r.stderr = stderr;
    r.pass = residual <= tolerance;
    r.seed = seed;
    return r;
  }
};

using Records = std::vector<CheckRecord>;

// Seeded instance generator; each instance gets its own stream.
class Sampler {
 public:
  Sampler(std::uint64_t seed, std::uint64_t stream) : engine_(seed, stream) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return normal_(engine_); }
  int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(engine_); }

  Vector normal_vector(int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v(i) = normal();
    return v;
  }

  Vector direction(int d, double lo, double hi) {
    Vector v = normal_vector(d);
    while (v.norm() == 0.0) v = normal_vector(d);
    return uniform(lo, hi) * v.normalized();
  }

  /// Operator norm uniform in [0, 2].
  Matrix drift_matrix(int d) {
    const Matrix G = [&] {
      Matrix m(d, d);
      for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) m(i, k) = normal();
      return m;
    }();
    const double norm = LinearOperator(G).operator_norm();
    return norm == 0.0 ? G : (uniform(0.0, 2.0) / norm) * G;
  }

  Matrix covariance(int d) {
    Matrix L(d, d);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) L(i, k) = normal();
    return L * L.transpose() / d;
  }

  Part part() { return index(2) == 0 ? Part::Real : Part::Imag; }

 private:
  Philox engine_;
  std::normal_distribution<double> normal_;
};

// OU model for instance i: random when the run asks for it, else the configured model without F.
GalerkinModel ou_instance(const Context& ctx, Sampler& s, int i, int max_dim = 64) {
  if (!ctx.run.random_models) return ou_part(ctx.model);
  std::vector<int> dims;
  for (int d : ctx.run.dims)
    if (d <= max_dim) dims.push_back(d);
  if (dims.empty()) throw InputError("no dimension in run.dims is <= " + std::to_string(max_dim));
  const int d = dims[static_cast<std::size_t>(i) % dims.size()];
  const Matrix A = s.drift_matrix(d);
  const Matrix Q = s.covariance(d);
  return GalerkinModel::ou(A, Q);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string describe(double value) {
  std::ostringstream out;
  out.precision(6);
  out << value;
  return out.str();
}

// ---------------------------------------------------------------------------------------------

Records ou_exact_suite(const Context& ctx) {
  const int n = ctx.instances(100);
  int misses = 0;
  double gh_error = 0.0;
  int gh_count = 0;
  Series mc{{"instance", "dim", "t", "exact", "estimate", "stderr"}, {}};
  for (int i = 0; i < n; ++i) {
    Sampler s(ctx.seed, static_cast<std::uint64_t>(i));
    const GalerkinModel model = ou_instance(ctx, s, i);
    const int d = model.dim();
    const double t = s.uniform(0.05, 2.0);
    const Vector h = s.direction(d, 0.2, 1.0);
    const Vector x = s.normal_vector(d);
    const Part part = s.part();
    const TestFunction phi = TestFunction::cylindrical(h, part);
    const double exact = take_part(ou_exact_cyl(model, t, h, x), part);
    const Estimate est = ou_apply(model, t, phi, x, ctx.run.samples, derive_seed(ctx.seed, 1000 + i));
    if (std::abs(est.value - exact) > 3.0 * est.stderr + 1e-12) ++misses;
    mc.rows.push_back({double(i), double(d), t, exact, est.value, est.stderr});
    if (model.covariance(t).rank() <= 3) {
      gh_error = std::max(gh_error, std::abs(ou_apply_quadrature(model, t, phi, x) - exact));
      ++gh_count;
    }
  }
  const auto allowed = static_cast<double>(n / 20);
  Records out;
  out.push_back(ctx.record("ou-exact/monte-carlo", "R_t e^{i<.,h>}(x) = exp(i<e^{tA}x,h> - <Q_t h,h>/2)",
                           double(misses), ctx.tolerance("ou-exact/monte-carlo", allowed)));
  out.back().note = "instances outside 3 stderr of the closed form, out of " + std::to_string(n);
  out.back().series = std::move(mc);
  if (gh_count > 0) {
    out.push_back(ctx.record("ou-exact/gauss-hermite",
                             "int e^{i<e^{tA}x + y, h>} N_{Q_t}(dy) = exp(i<e^{tA}x,h> - <Q_t h,h>/2)", gh_error,
                             ctx.tolerance("ou-exact/gauss-hermite", 1e-6)));
    out.back().note = std::to_string(gh_count) + " instances with rank(Q_t) <= 3";
  }
  return out;
}

Records covariance_suite(const Context& ctx) {
  const int n = ctx.instances(100);
  double worst = 0.0;
  Series series{{"instance", "dim", "s", "t", "max_abs_error"}, {}};
  for (int i = 0; i < n; ++i) {
    Sampler s(ctx.seed, static_cast<std::uint64_t>(i));
    const GalerkinModel model = ou_instance(ctx, s, i);
    const double a = s.uniform(0.0, 1.0);
    const double b = s.uniform(0.0, 1.0);
    const Matrix lhs = model.covariance(a + b).matrix();
    const Matrix flow = expm(model.A(), a);
    const Matrix rhs = model.covariance(a).matrix() + flow * model.covariance(b).matrix() * flow.transpose();
    const double err = (lhs - rhs).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    series.rows.push_back({double(i), double(model.dim()), a, b, err});
  }
  Records out{ctx.record("covariance/decomposition", "Q_{t+s} = Q_s + e^{sA} Q_t e^{sA*}", worst,
                         ctx.tolerance("covariance/decomposition", 1e-9))};
  out.back().series = std::move(series);
  return out;
}

Records shift_identity_suite(const Context& ctx) {
  const int n = ctx.instances(50);
  double worst = 0.0;
  Series series{{"instance", "dim", "t", "a", "residual"}, {}};
  for (int i = 0; i < n; ++i) {
    Sampler s(ctx.seed, static_cast<std::uint64_t>(i));
    const GalerkinModel model = ou_instance(ctx, s, i, 3);
    const int d = model.dim();
    const double t = s.uniform(0.05, 1.0);
    const double a = s.uniform(0.1, 1.5);
    const Vector h = s.direction(d, 0.2, 1.0);
    const Vector x = s.normal_vector(d);
    const double r = ou_shift_identity_check(model, t, a, h, x);
    worst = std::max(worst, r);
    series.rows.push_back({double(i), double(d), t, a, r});
  }
  Records out{ctx.record("shift-identity/residual", "R_t phi_{a,h} = phi_{a+t,h} - phi_{t,h}", worst,
                         ctx.tolerance("shift-identity/residual", 1e-8))};
  out.back().series = std::move(series);
  return out;
}

Records generator_suite(const Context& ctx) {
  const int n = ctx.instances(50);
  const double t1 = 1e-3, t2 = 5e-4;
  double worst = 0.0, worst_ratio = 0.0;
  Series series{{"t", "quotient", "closed_form", "abs_error"}, {}};
  for (int i = 0; i < n; ++i) {
    Sampler s(ctx.seed, static_cast<std::uint64_t>(i));
    const GalerkinModel model = ou_instance(ctx, s, i);
    const int d = model.dim();
    const double a = s.uniform(0.2, 1.5);
    const Vector h = s.direction(d, 0.2, 1.0);
    const Vector x = s.normal_vector(d);
    const BoundTestFunction phi = bind(TestFunction::ou_integral(a, h, s.part()), model);
    const SemigroupHandle handle = SemigroupHandle::exact_ou(model);
    const double closed = phi.kolmogorov(model, x);
    const double q1 = generator_quotient(handle, phi, x, t1).value;
    const double q2 = generator_quotient(handle, phi, x, t2).value;
    const double e1 = std::abs(q1 - closed), e2 = std::abs(q2 - closed);
    worst = std::max(worst, e1);
    worst_ratio = std::max(worst_ratio, e1 > 0.0 ? std::abs(e2 / e1 - 0.5) : std::numeric_limits<double>::infinity());
    series.rows.push_back({t1, q1, closed, e1});
    series.rows.push_back({t2, q2, closed, e2});
  }
  Records out;
  out.push_back(ctx.record("generator/quotient", "(R_t phi - phi)/t -> K_0 phi = (1/2)Tr[Q D^2 phi] + <Ax, D phi>",
                           worst, ctx.tolerance("generator/quotient", 1e-2)));
  out.back().note = "t = 1e-3";
  out.back().series = std::move(series);
  out.push_back(ctx.record("generator/first-order", "|(R_t phi - phi)/t - K_0 phi| = O(t)", worst_ratio,
                           ctx.tolerance("generator/first-order", 0.15)));
  out.back().note = "max |e(t/2)/e(t) - 1/2|; the ratio must lie in [0.35, 0.65]";
  return out;
}

Records drift_perturbation_suite(const Context& ctx) {
  const int n = ctx.instances(10);
  const double t = 1e-2;
  const int d = ctx.model.dim();
  Records out;
  for (int i = 0; i < n; ++i) {
    Sampler s(ctx.seed, static_cast<std::uint64_t>(i));
    const double a = s.uniform(0.2, 1.5);
    const Vector h = s.direction(d, 0.2, 1.0);
    const Vector x = s.normal_vector(d);
    const TestFunction phi = TestFunction::ou_integral(a, h, s.part());
    const SemigroupHandle handle = SemigroupHandle::monte_carlo(ctx.model, std::min(ctx.run.dt, t), ctx.run.samples,
                                                                derive_seed(ctx.seed, 1000 + i));
    const Estimate q = generator_quotient(handle, phi, x, t);
    const double closed = kolmogorov_apply(phi, ctx.model, x);
    const std::string id = "drift-perturbation/quotient#" + std::to_string(i);
    out.push_back(ctx.record(id, "K phi = L phi + <D phi, F>", std::abs(q.value - closed),
                             3.0 * q.stderr + ctx.tolerance("drift-perturbation/quotient", 2e-2), q.stderr));
    out.back().note = "t = 1e-2, tolerance 3 stderr + bias allowance";
    out.back().series = Series{{"t", "quotient", "closed_form", "abs_error"}, {{t, q.value, closed, out.back().residual}}};
  }
  return out;
}

Records measure_equation_suite(const Context& ctx) {
  const GalerkinModel& model = ctx.model;
  const SemigroupHandle handle = build_handle(model, ctx.run, ctx.seed);
  const Vector x = start_point(ctx.run, model.dim());
  const auto bank = default_bank(model.dim());

  auto run_once = [&](int particles, const RunSpec& run) {
    const ParticleMeasure mu0 = ParticleMeasure::dirac(x, particles);
    return measure_equation_residual(evolve_bank_moments(handle, mu0, time_grid(run), bank, ctx.seed));
  };
  const MeasureResidual base = run_once(ctx.run.particles, ctx.run);

  Series series{{"t", "phi", "mean", "generator", "integral", "residual"}, {}};
  std::vector<double> residuals;
  for (Eigen::Index k = 0; k < base.residual.rows(); ++k)
    for (Eigen::Index b = 0; b < base.residual.cols(); ++b) {
      series.rows.push_back({base.times[static_cast<std::size_t>(k)], double(b), base.mean(k, b), base.generator(k, b),
                             base.integral(k, b), base.residual(k, b)});
      if (k > 0) residuals.push_back(base.residual(k, b));
    }

  Records out;
  out.push_back(ctx.record("measure-equation/initial", "residual at t = 0", base.residual.row(0).maxCoeff(),
                           ctx.tolerance("measure-equation/initial", 0.0)));
  out.push_back(ctx.record("measure-equation/residual",
                           "int phi dmu_t - int phi dmu_0 = int_0^t int K_0 phi dmu_s ds (trapezoid)",
                           base.max_residual(), ctx.tolerance("measure-equation/residual", 5e-3)));
  out.back().note = std::to_string(bank.size()) + " bank functions, " + std::to_string(ctx.run.particles) +
                    " particles from delta_x0";
  out.back().series = std::move(series);

  if (ctx.run.refine) {
    RunSpec fine = ctx.run;
    fine.t_steps *= 2;
    const MeasureResidual refined = run_once(4 * ctx.run.particles, fine);
    std::vector<double> fine_residuals;
    for (Eigen::Index k = 1; k < refined.residual.rows(); ++k)
      for (Eigen::Index b = 0; b < refined.residual.cols(); ++b) fine_residuals.push_back(refined.residual(k, b));
    const double m0 = median(residuals), m1 = median(fine_residuals);
    out.push_back(ctx.record("measure-equation/refinement", "median residual ratio under 4x particles, 2x grid",
                             m0 > 0.0 ? m1 / m0 : std::numeric_limits<double>::infinity(),
                             ctx.tolerance("measure-equation/refinement", std::pow(2.0, -0.4))));
    out.back().note = "median " + describe(m0) + " -> " + describe(m1) + ", observed order " +
                      describe(std::log2(m0 / m1)) + " (>= 0.4 required)";
  }
  return out;
}

Records stationary_suite(const Context& ctx) {
  const GalerkinModel& model = ctx.model;
  if (!model.is_ou()) throw InputError("stationary: the model must have F = 0");
  const CovarianceOperator S = solve_lyapunov(model.A(), model.Q());
  const Matrix& A = model.A().matrix();
  const double lyapunov = (A * S.matrix() + S.matrix() * A.transpose() + model.Q().matrix()).cwiseAbs().maxCoeff();

  const int n = ctx.run.particles;
  const std::vector<Vector> draws = gaussian_sample(S, n, derive_seed(ctx.seed, 1));
  Matrix points(n, model.dim());
  for (int i = 0; i < n; ++i) points.row(i) = draws[static_cast<std::size_t>(i)].transpose();
  const ParticleMeasure mu0 = ParticleMeasure::empirical(std::move(points), "stationary");
  const SemigroupHandle handle = build_handle(model, ctx.run, ctx.seed);
  const auto bank = default_bank(model.dim());
  const BankMoments moments = evolve_bank_moments(handle, mu0, time_grid(ctx.run), bank, derive_seed(ctx.seed, 2));

  double worst = 0.0, worst_stderr = 0.0;
  Series series{{"t", "phi", "generator", "stderr", "z"}, {}};
  for (Eigen::Index k = 0; k < moments.generator.rows(); ++k)
    for (Eigen::Index b = 0; b < moments.generator.cols(); ++b) {
      const double g = moments.generator(k, b), se = moments.generator_stderr(k, b);
      const double z = se > 0.0 ? std::abs(g) / se : (g == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
      if (z > worst) {
        worst = z;
        worst_stderr = se;
      }
      series.rows.push_back({moments.times[static_cast<std::size_t>(k)], double(b), g, se, z});
    }
  Records out;
  out.push_back(ctx.record("stationary/lyapunov", "A S + S A* + Q = 0", lyapunov,
                           ctx.tolerance("stationary/lyapunov", 1e-10)));
  out.push_back(ctx.record("stationary/generator", "int K_0 phi dmu = 0 for the invariant law", worst,
                           ctx.tolerance("stationary/generator", 3.0), worst_stderr));
  out.back().note = "max |int K_0 phi dmu_s| / stderr over bank and grid";
  out.back().series = std::move(series);
  return out;
}

Records duality_suite(const Context& ctx) {
  const GalerkinModel& model = ctx.model;
  const int d = model.dim();
  const int trials = ctx.run.trials;
  const int m = ctx.run.samples_per_particle;
  const SemigroupHandle handle = build_handle(model, ctx.run, ctx.seed);
  int misses = 0;
  double shared_worst = 0.0;
  Series series{{"trial", "lhs", "rhs", "residual", "combined_stderr"}, {}};
  for (int i = 0; i < trials; ++i) {
    Sampler s(ctx.seed, static_cast<std::uint64_t>(i));
    const int particles = 16;
    Matrix points(particles, d);
    Vector weights(particles);
    for (int p = 0; p < particles; ++p) {
      points.row(p) = s.normal_vector(d).transpose();
      weights(p) = s.uniform(0.1, 1.0);
    }
    weights /= weights.sum();
    const ParticleMeasure mu(points, weights, "trial");
    const TestFunction phi = TestFunction::cylindrical(s.direction(d, 0.2, 1.0), s.part());
    const double t = s.uniform(0.1, 1.0);
    const std::uint64_t seed = derive_seed(ctx.seed, 2 * static_cast<std::uint64_t>(i) + 1);
    const DualityResult shared = duality_check(handle, phi, mu, t, m, seed, DualityMode::SharedSamples);
    shared_worst = std::max(shared_worst, shared.residual);
    if (m >= 2) {
      const DualityResult ind = duality_check(handle, phi, mu, t, m, seed, DualityMode::IndependentSamples,
                                              derive_seed(ctx.seed, 2 * static_cast<std::uint64_t>(i) + 2));
      if (!(ind.residual <= 3.0 * ind.combined_stderr)) ++misses;
      series.rows.push_back({double(i), ind.lhs, ind.rhs, ind.residual, ind.combined_stderr});
    }
  }
  Records out;
  out.push_back(ctx.record("duality/shared", "<phi, P_t* mu> = <P_t phi, mu>, shared samples", shared_worst,
                           ctx.tolerance("duality/shared", 1e-12)));
  if (m < 2) {
    out.push_back(ctx.record("duality/independent", "<phi, P_t* mu> = <P_t phi, mu>, independent samples",
                             std::numeric_limits<double>::infinity(), 0.0));
    out.back().note = "run.samples_per_particle must be >= 2";
  } else {
    out.push_back(ctx.record("duality/independent", "<phi, P_t* mu> = <P_t phi, mu>, independent samples",
                             double(misses), ctx.tolerance("duality/independent", double(trials / 20))));
    out.back().note = "trials outside 3 combined stderr, out of " + std::to_string(trials);
    out.back().series = std::move(series);
  }
  return out;
}

Records resolvent_suite(const Context& ctx) {
  const GalerkinModel& model = ctx.model;
  const int d = model.dim();
  const double lambda = ctx.run.lambda.value_or(std::max(0.0, model.omega() + model.M() * model.lipschitz()) + 1.0);
  const SemigroupHandle handle = build_handle(model, ctx.run, ctx.seed);
  const Vector x0 = start_point(ctx.run, d);
  const double tol = 1e-8;

  Sampler s(ctx.seed, 0);
  const double c = s.uniform(-2.0, 2.0);
  const ResolventResult constant = resolvent_apply(handle, lambda, TestFunction::constant(c), x0, tol);

  double bound_excess = -std::numeric_limits<double>::infinity();
  double weak_worst = 0.0;
  const int n = ctx.instances(20);
  Series series{{"instance", "value", "bound", "weak_error"}, {}};
  for (int i = 0; i < n; ++i) {
    Sampler si(ctx.seed, 1 + static_cast<std::uint64_t>(i));
    const TestFunction f = TestFunction::cylindrical(si.direction(d, 0.2, 1.5), si.part());
    const Vector x = si.normal_vector(d);
    const SemigroupHandle h = handle.with_seed(derive_seed(ctx.seed, 1000 + i));
    const ResolventResult r = resolvent_apply(h, lambda, f, x, tol);
    const double bound = f.sup_bound() / lambda;
    bound_excess = std::max(bound_excess, std::abs(r.value) - bound);
    const Estimate q = generator_quotient(
        [&](double shift) {
          const ResolventResult rs = resolvent_apply_shifted(h, lambda, f, x, shift, tol);
          return Estimate{rs.value, rs.stderr};
        },
        1e-3);
    const double weak = std::abs(lambda * r.value - q.value - eval(f, model, x));
    weak_worst = std::max(weak_worst, weak);
    series.rows.push_back({double(i), r.value, bound, weak});
  }
  Records out;
  out.push_back(ctx.record("resolvent/constant", "R(lambda,K) c = c/lambda", std::abs(constant.value - c / lambda),
                           ctx.tolerance("resolvent/constant", tol)));
  out.back().note = "lambda = " + describe(lambda) + ", horizon " + describe(constant.horizon);
  out.push_back(ctx.record("resolvent/contraction", "|R(lambda,K) f| <= ||f||/lambda", bound_excess,
                           ctx.tolerance("resolvent/contraction", tol)));
  out.back().note = "max |R f(x)| - ||f||/lambda";
  out.back().series = std::move(series);
  out.push_back(ctx.record("resolvent/weak-identity", "(lambda I - K) R(lambda,K) f = f, t_small = 1e-3", weak_worst,
                           ctx.tolerance("resolvent/weak-identity", 5e-2)));
  return out;
}

Records first_variation_suite(const Context& ctx) {
  const GalerkinModel& model = ctx.model;
  const int d = model.dim();
  const double T = ctx.run.t_max;
  const int n = ctx.run.samples;
  Sampler s(ctx.seed, 0);
  const Vector h = s.direction(d, 0.5, 1.5);
  const Vector x = start_point(ctx.run, d);
  const std::uint64_t path_seed = derive_seed(ctx.seed, 1);

  const FirstVariation fv = first_variation(model, x, h, T, ctx.run.dt, n, path_seed);
  const double growth = model.omega() + model.M() * model.drift().derivative_bound();
  const double bound = model.M() * std::exp(growth * T) * h.norm();
  int violations = 0;
  double worst_ratio = 0.0;
  for (Eigen::Index i = 0; i < fv.tangents.rows(); ++i) {
    const double ratio = fv.tangents.row(i).norm() / bound;
    worst_ratio = std::max(worst_ratio, ratio);
    if (ratio > 1.0 + 1e-12) ++violations;
  }

  const TestFunction f = TestFunction::ou_integral(s.uniform(0.3, 1.0), s.direction(d, 0.3, 1.0), s.part());
  const SemigroupHandle handle = SemigroupHandle::monte_carlo(model, ctx.run.dt, n, path_seed);
  const Estimate grad = gradient_transition(handle, f, T, x, h);
  const BoundTestFunction fb = bind(f, model);
  const double eps = 1e-4;
  const Matrix plus = simulate_mild(model, x + eps * h, T, ctx.run.dt, n, path_seed).positions;
  const Matrix minus = simulate_mild(model, x - eps * h, T, ctx.run.dt, n, path_seed).positions;
  Vector vp, vm;
  fb.eval_varying(plus, vp);
  fb.eval_varying(minus, vm);
  const double fd = (vp - vm).mean() / (2.0 * eps);

  Records out;
  out.push_back(ctx.record("first-variation/pathwise-bound", "|eta^h(T)| <= M e^{(omega + M ||DF||) T} |h|",
                           double(violations), ctx.tolerance("first-variation/pathwise-bound", 0.0)));
  out.back().note = std::to_string(n) + " paths, max |eta|/bound = " + describe(worst_ratio);
  out.push_back(ctx.record("first-variation/gradient", "<D P_t f(x), h> = E <Df(X(t,x)), eta^h(t,x)>",
                           std::abs(grad.value - fd),
                           3.0 * grad.stderr + ctx.tolerance("first-variation/gradient", 1e-3), grad.stderr));
  out.back().note = "coupled central difference, eps = 1e-4";
  return out;
}

Records backward_suite(const Context& ctx) {
  const GalerkinModel model = ou_part(ctx.model);
  const int d = model.dim();
  const SemigroupHandle handle = SemigroupHandle::exact_ou(model);
  const double T = ctx.run.t_max;
  Sampler s(ctx.seed, 0);
  const TestFunction phi = TestFunction::ou_integral(s.uniform(0.3, 1.0), s.direction(d, 0.3, 1.0), s.part());
  const double norm = phi.sup_bound();
  auto u = [&](double t, const Vector& x) { return backward_solution(handle, phi, T, t, x).value; };

  std::vector<Vector> points;
  for (int i = 0; i < 6; ++i) points.push_back(s.normal_vector(d));

  double terminal = 0.0;
  for (const auto& x : points) terminal = std::max(terminal, std::abs(u(T, x)));

  const int grid = 8;
  double lipschitz = -std::numeric_limits<double>::infinity();
  for (const auto& x : points) {
    std::vector<double> values;
    for (int k = 0; k <= grid; ++k) values.push_back(u(T * k / grid, x));
    for (int a = 0; a <= grid; ++a)
      for (int b = a + 1; b <= grid; ++b)
        lipschitz = std::max(lipschitz, std::abs(values[static_cast<std::size_t>(a)] - values[static_cast<std::size_t>(b)]) -
                                            T * (b - a) / grid * norm);
  }

  // u_t by central difference in t, K_0 u by central differences in x.
  const double dt = 1e-4, dx = 1e-3;
  const Matrix& A = model.A().matrix();
  const Matrix& Q = model.Q().matrix();
  double pde = 0.0;
  Series series{{"t", "point", "u_t", "K0u", "phi", "residual"}, {}};
  for (std::size_t p = 0; p < 3; ++p) {
    const Vector& x = points[p];
    for (double frac : {0.25, 0.5, 0.75}) {
      const double t = frac * T;
      const double ut = (u(t + dt, x) - u(t - dt, x)) / (2.0 * dt);
      const double centre = u(t, x);
      Vector grad(d);
      Matrix hess(d, d);
      for (int i = 0; i < d; ++i) {
        Vector ei = Vector::Zero(d);
        ei(i) = dx;
        const double up = u(t, x + ei), um = u(t, x - ei);
        grad(i) = (up - um) / (2.0 * dx);
        hess(i, i) = (up - 2.0 * centre + um) / (dx * dx);
        for (int k = 0; k < i; ++k) {
          Vector ek = Vector::Zero(d);
          ek(k) = dx;
          hess(i, k) = hess(k, i) =
              (u(t, x + ei + ek) - u(t, x + ei - ek) - u(t, x - ei + ek) + u(t, x - ei - ek)) / (4.0 * dx * dx);
        }
      }
      const double k0u = 0.5 * (Q * hess).trace() + (A * x).dot(grad);
      const double value = eval(phi, model, x);
      const double r = std::abs(ut + k0u - value);
      pde = std::max(pde, r);
      series.rows.push_back({t, double(p), ut, k0u, value, r});
    }
  }
  Records out;
  out.push_back(ctx.record("backward/terminal", "u(T, x) = 0", terminal, ctx.tolerance("backward/terminal", 0.0)));
  out.push_back(ctx.record("backward/lipschitz", "||u(t) - u(s)|| <= |t - s| ||phi||", lipschitz,
                           ctx.tolerance("backward/lipschitz", 1e-8)));
  out.back().note = "max excess over sampled points and grid pairs";
  out.push_back(ctx.record("backward/pde", "u_t + K_0 u = phi", pde, ctx.tolerance("backward/pde", 1e-3)));
  out.back().series = std::move(series);
  return out;
}

Records bernstein_cesaro_suite(const Context& ctx) {
  const std::vector<int> orders{1, 2, 3, 5, 10, 20, 50, 100, 200};
  double unity = 0.0, affine = 0.0, monotone = 0.0;
  auto line = [](double s) { return 0.3 - 1.7 * s; };
  auto increasing = [](double s) { return std::tanh(3.0 * (s - 0.4)) + s * s * s; };
  for (int n : orders) {
    double previous = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 100; ++k) {
      const double t = k / 100.0;
      unity = std::max(unity, std::abs(bernstein_approx([](double) { return 1.0; }, n, t) - 1.0));
      affine = std::max(affine, std::abs(bernstein_approx(line, n, t) - line(t)));
      const double v = bernstein_approx(increasing, n, t);
      monotone = std::max(monotone, previous - v);
      previous = v;
    }
  }
  const double square = std::abs(bernstein_approx([](double s) { return s * s; }, 10, 0.5) - 0.275);

  const GalerkinModel model = ou_part(ctx.model);
  const int d = model.dim();
  const SemigroupHandle handle = SemigroupHandle::exact_ou(model);
  Sampler s(ctx.seed, 0);
  const Vector h = s.direction(d, 0.5, 1.0);
  const Vector x = s.normal_vector(d) + Vector::Constant(d, 1.0);
  const int n1 = 2;
  const QuadratureRule rule = composite_gauss_legendre(0.0, 1.0 / n1, 64, 8);
  double reference = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k)
    reference += rule.weights[k] * ou_exact_cyl(model, rule.nodes[k], h, x).real();
  reference *= n1;
  const TestFunction phi = TestFunction::cylindrical(h, Part::Real);
  Series series{{"n3", "cesaro", "reference", "abs_error"}, {}};
  std::vector<double> lx, ly;
  for (int n3 : {8, 16, 32, 64, 128, 256}) {
    const double v = cesaro_smooth(handle, phi, n1, n3, x).value;
    const double err = std::abs(v - reference);
    series.rows.push_back({double(n3), v, reference, err});
    lx.push_back(std::log(double(n3)));
    ly.push_back(std::log(err));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  const double slope = sxy / sxx;

  Records out;
  out.push_back(ctx.record("bernstein/partition-of-unity", "sum_k C(n,k) t^k (1-t)^{n-k} = 1", unity,
                           ctx.tolerance("bernstein/partition-of-unity", 1e-12)));
  out.push_back(ctx.record("bernstein/affine", "B_n(a + b s) = a + b s", affine, ctx.tolerance("bernstein/affine", 1e-12)));
  out.push_back(ctx.record("bernstein/square", "B_10(s^2)(0.5) = 0.275", square, ctx.tolerance("bernstein/square", 1e-12)));
  out.push_back(ctx.record("bernstein/monotone", "g increasing => B_n g increasing", monotone,
                           ctx.tolerance("bernstein/monotone", 0.0)));
  out.back().note = "largest decrease on a 101-point grid";
  out.push_back(ctx.record("cesaro/rate", "(1/n3) sum_i P_{i/(n1 n3)} phi -> n1 int_0^{1/n1} P_t phi dt at rate 1/n3",
                           std::abs(slope + 1.0), ctx.tolerance("cesaro/rate", 0.2)));
  out.back().note = "log-log slope " + describe(slope);
  out.back().series = std::move(series);
  return out;
}

using SuiteFn = Records (*)(const Context&);

const std::vector<std::pair<std::string, SuiteFn>>& registry() {
  static const std::vector<std::pair<std::string, SuiteFn>> suites{
      {"ou-exact", ou_exact_suite},
      {"covariance", covariance_suite},
      {"shift-identity", shift_identity_suite},
      {"generator", generator_suite},
      {"drift-perturbation", drift_perturbation_suite},
      {"measure-equation", measure_equation_suite},
      {"stationary", stationary_suite},
      {"duality", duality_suite},
      {"resolvent", resolvent_suite},
      {"first-variation", first_variation_suite},
      {"backward", backward_suite},
      {"bernstein-cesaro", bernstein_cesaro_suite},
  };
  return suites;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

bool is_suite_name(const std::string& name) {
  const auto& names = suite_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::vector<CheckRecord> run_suite(const std::string& name, const ScenarioConfig& config, const GalerkinModel& model,
                                   std::uint64_t seed) {
  for (const auto& [suite, fn] : registry())
    if (suite == name) return fn(Context(config, model, seed));
  throw InputError("unknown suite '" + name + "'");
}

}  // namespace semilab
