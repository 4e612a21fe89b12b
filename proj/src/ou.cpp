#include "semilab/ou.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "semilab/errors.hpp"
#include "semilab/parallel.hpp"
#include "semilab/quadrature.hpp"
#include "semilab/random.hpp"

namespace semilab {

namespace {

void check_time(double t, const char* where) {
  if (!std::isfinite(t) || t < 0.0) throw InputError(std::string(where) + ": t must be finite and >= 0");
}

void check_point(const GalerkinModel& model, const Vector& x, const char* where) {
  if (x.size() != model.dim()) throw ContractViolation(std::string(where) + ": dimension mismatch");
  if (!x.allFinite()) throw InputError(std::string(where) + ": non-finite point");
}

}  // namespace

Complex ou_exact_cyl(const GalerkinModel& model, double t, const Vector& h, const Vector& x) {
  check_time(t, "ou_exact_cyl");
  check_point(model, x, "ou_exact_cyl");
  if (h.size() != model.dim()) throw ContractViolation("ou_exact_cyl: frequency dimension mismatch");
  const double phase = expm_apply(model.A(), t, x).dot(h);
  const double variance = t == 0.0 ? 0.0 : model.covariance(t).quadratic_form(h);
  return std::exp(-0.5 * variance) * Complex(std::cos(phase), std::sin(phase));
}

Estimate ou_apply(const GalerkinModel& model, double t, const TestFunction& phi, const Vector& x, int n_samples,
                  std::uint64_t seed) {
  return ou_apply(model, t, bind(phi, model), x, n_samples, seed);
}

Estimate ou_apply(const GalerkinModel& model, double t, const BoundTestFunction& phi, const Vector& x, int n_samples,
                  std::uint64_t seed) {
  check_time(t, "ou_apply");
  check_point(model, x, "ou_apply");
  if (n_samples < 2) throw InputError("ou_apply: n_samples must be >= 2");
  if (phi.is_constant() || t == 0.0) return {phi.eval(x), 0.0};

  const int d = model.dim();
  const Vector mean = expm_apply(model.A(), t, x);
  const CovarianceOperator Qt = model.covariance(t);
  const auto n = static_cast<std::size_t>(n_samples);
  std::vector<Moments> partial(chunk_count(n));
  parallel_chunks(n, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    const auto m = static_cast<Eigen::Index>(end - begin);
    Matrix Z(m, d);
    for (Eigen::Index i = 0; i < m; ++i) {
      NormalStream normals(seed, begin + static_cast<std::size_t>(i));
      for (int j = 0; j < d; ++j) Z(i, j) = normals();
    }
    Matrix points = Z * Qt.factor().transpose();
    points.rowwise() += mean.transpose();
    Vector values;
    phi.eval_varying(points, values);
    for (Eigen::Index i = 0; i < m; ++i) partial[chunk].add(values(i));
  });
  Moments total;
  for (const auto& m : partial) total.merge(m);
  return {phi.constant_term() + total.mean(), total.stderr()};
}

double ou_apply_quadrature(const GalerkinModel& model, double t, const TestFunction& phi, const Vector& x,
                           int nodes_per_axis) {
  return ou_apply_quadrature(model, t, bind(phi, model), x, nodes_per_axis);
}

double ou_apply_quadrature(const GalerkinModel& model, double t, const BoundTestFunction& phi, const Vector& x,
                           int nodes_per_axis) {
  check_time(t, "ou_apply_quadrature");
  check_point(model, x, "ou_apply_quadrature");
  if (phi.is_constant() || t == 0.0) return phi.eval(x);

  const Vector mean = expm_apply(model.A(), t, x);
  const CovarianceOperator Qt = model.covariance(t);
  const double threshold = 1e-14 * std::max(1.0, Qt.eigenvalues().maxCoeff());
  std::vector<Vector> axes;
  for (Eigen::Index k = 0; k < Qt.eigenvalues().size(); ++k)
    if (Qt.eigenvalues()(k) > threshold) axes.push_back(std::sqrt(Qt.eigenvalues()(k)) * Qt.eigenvectors().col(k));
  if (axes.size() > 3)
    throw InputError("ou_apply_quadrature: tensor Gauss-Hermite needs rank(Q_t) <= 3, got " +
                     std::to_string(axes.size()));

  auto integrate = [&](int n) {
    const QuadratureRule& rule = gauss_hermite_normal(n);
    const auto nodes = static_cast<Eigen::Index>(rule.size());
    Eigen::Index total = 1;
    for (std::size_t k = 0; k < axes.size(); ++k) total *= nodes;
    Matrix points(total, model.dim());
    Vector weights(total);
    for (Eigen::Index idx = 0; idx < total; ++idx) {
      Vector p = mean;
      double w = 1.0;
      Eigen::Index rest = idx;
      for (const auto& axis : axes) {
        const auto node = static_cast<std::size_t>(rest % nodes);
        rest /= nodes;
        p += rule.nodes[node] * axis;
        w *= rule.weights[node];
      }
      points.row(idx) = p.transpose();
      weights(idx) = w;
    }
    Vector values;
    phi.eval_varying(points, values);
    return weights.dot(values);
  };

  if (nodes_per_axis > 0) return phi.constant_term() + integrate(nodes_per_axis);
  const int cap = axes.size() <= 2 ? 512 : 128;
  int n = 32;
  double value = integrate(n);
  while (n < cap) {
    const double refined = integrate(2 * n);
    n *= 2;
    const bool settled = std::abs(refined - value) <= 1e-13 * std::max(1.0, std::abs(refined));
    value = refined;
    if (settled) break;
  }
  return phi.constant_term() + value;
}

double ou_shift_identity_check(const GalerkinModel& model, double t, double a, const Vector& h, const Vector& x) {
  if (!(t > 0.0) || !(a > 0.0)) throw InputError("ou_shift_identity_check: t and a must be > 0");
  KernelBinder binder(model);
  const BoundTestFunction re = binder.bind(TestFunction::ou_integral(a, h, Part::Real));
  const BoundTestFunction im = binder.bind(TestFunction::ou_integral(a, h, Part::Imag));
  const Complex lhs(ou_apply_quadrature(model, t, re, x), ou_apply_quadrature(model, t, im, x));

  const auto upper = binder.kernel(OUIntegralFunction{a + t, h, Part::Real, 0});
  const auto lower = binder.kernel(OUIntegralFunction{t, h, Part::Real, 0});
  const Complex rhs = upper->value(x) - lower->value(x);
  return std::abs(lhs - rhs);
}

Estimate generator_quotient(const SemigroupHandle& handle, const TestFunction& phi, const Vector& x, double t) {
  return generator_quotient(handle, bind(phi, handle.model()), x, t);
}

Estimate generator_quotient(const SemigroupHandle& handle, const BoundTestFunction& phi, const Vector& x, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw InputError("generator_quotient: t must be > 0");
  if (phi.is_constant()) return {0.0, 0.0};
  if (handle.is_exact()) {
    // Node-by-node difference of the transformed kernels, so the quadrature error of phi cancels.
    const BoundTestFunction moved = phi.ou_transform(handle.model(), t);
    double diff = 0.0;
    for (std::size_t k = 0; k < phi.terms().size(); ++k) {
      const auto& before = phi.terms()[k];
      const auto& after = moved.terms()[k];
      diff += before.coefficient * take_part(after.kernel->value(x) - before.kernel->value(x), before.part);
    }
    return {diff / t, 0.0};
  }
  const Estimate pt = transition_apply(handle, phi, t, x);
  return {(pt.value - phi.eval(x)) / t, pt.stderr / t};
}

Estimate generator_quotient(const std::function<Estimate(double)>& orbit, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw InputError("generator_quotient: t must be > 0");
  const Estimate at_t = orbit(t);
  const Estimate at_0 = orbit(0.0);
  return {(at_t.value - at_0.value) / t, std::hypot(at_t.stderr, at_0.stderr) / t};
}

}  // namespace semilab
