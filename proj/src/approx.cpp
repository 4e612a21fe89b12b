#include "semilab/approx.hpp"

#include <cmath>

#include "semilab/errors.hpp"

namespace semilab {

double bernstein_approx(const std::function<double(double)>& g, int n, double t) {
  if (n < 1) throw InputError("bernstein_approx: n must be >= 1");
  if (!(t >= 0.0 && t <= 1.0)) throw InputError("bernstein_approx: t must lie in [0, 1]");
  if (t == 0.0) return g(0.0);
  if (t == 1.0) return g(1.0);
  const double log_t = std::log(t);
  const double log_s = std::log1p(-t);
  const double log_n = std::lgamma(n + 1.0);
  double sum = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double log_w = log_n - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * log_t + (n - k) * log_s;
    sum += std::exp(log_w) * g(static_cast<double>(k) / n);
  }
  return sum;
}

Estimate cesaro_smooth(const SemigroupHandle& handle, const TestFunction& phi_spec, int n1, int n3, const Vector& x) {
  if (n1 < 1 || n3 < 1) throw InputError("cesaro_smooth: n1 and n3 must be >= 1");
  const BoundTestFunction phi = bind(phi_spec, handle.model());
  std::vector<double> times(static_cast<std::size_t>(n3));
  for (int i = 1; i <= n3; ++i) times[static_cast<std::size_t>(i) - 1] = static_cast<double>(i) / (double(n1) * n3);
  if (handle.is_exact() || phi.is_constant()) {
    const std::vector<Estimate> orbit = transition_orbit(handle, phi, times, x);
    double sum = 0.0;
    for (const auto& e : orbit) sum += e.value;
    return {sum / n3, 0.0};
  }
  const Matrix samples = sample_orbit(handle, phi, times, x);
  const Vector per_path = samples.rowwise().mean();
  Moments m;
  for (Eigen::Index i = 0; i < per_path.size(); ++i) m.add(per_path(i));
  return m.estimate();
}

}  // namespace semilab
