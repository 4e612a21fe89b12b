#include "semilab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <utility>

#include <gsl/gsl_integration.h>

#include "semilab/errors.hpp"

namespace semilab {

namespace {

QuadratureRule build_legendre(int n) {
  std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)> table(
      gsl_integration_glfixed_table_alloc(static_cast<std::size_t>(n)), &gsl_integration_glfixed_table_free);
  if (!table) throw NumericalError("gauss_legendre: table allocation failed for n=" + std::to_string(n));
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = 0.0, w = 0.0;
    gsl_integration_glfixed_point(-1.0, 1.0, static_cast<std::size_t>(i), &x, &w, table.get());
    rule.nodes[i] = x;
    rule.weights[i] = w;
  }
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < n; ++i) pairs.emplace_back(rule.nodes[i], rule.weights[i]);
  std::sort(pairs.begin(), pairs.end());
  for (int i = 0; i < n; ++i) std::tie(rule.nodes[i], rule.weights[i]) = pairs[i];
  return rule;
}

QuadratureRule build_hermite(int n) {
  std::unique_ptr<gsl_integration_fixed_workspace, decltype(&gsl_integration_fixed_free)> ws(
      gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, static_cast<std::size_t>(n), 0.0, 1.0, 0.0, 0.0),
      &gsl_integration_fixed_free);
  if (!ws) throw NumericalError("gauss_hermite: workspace allocation failed for n=" + std::to_string(n));
  const double* x = gsl_integration_fixed_nodes(ws.get());
  const double* w = gsl_integration_fixed_weights(ws.get());
  // Physicists' weight exp(-u^2); Z = sqrt(2) u.
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double norm = 1.0 / std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = std::sqrt(2.0) * x[i];
    rule.weights[i] = w[i] * norm;
  }
  return rule;
}

template <typename Builder>
const QuadratureRule& cached(std::map<int, std::unique_ptr<QuadratureRule>>& cache, std::mutex& mutex, int n,
                             Builder build) {
  if (n < 1) throw InputError("quadrature rule needs at least one node");
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<QuadratureRule>(build(n));
  return *slot;
}

}  // namespace

const QuadratureRule& gauss_legendre(int n) {
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mutex;
  return cached(cache, mutex, n, build_legendre);
}

const QuadratureRule& gauss_hermite_normal(int n) {
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mutex;
  return cached(cache, mutex, n, build_hermite);
}

QuadratureRule composite_gauss_legendre(double a, double b, int panels, int order) {
  if (panels < 1) throw InputError("composite_gauss_legendre: panels must be >= 1");
  const QuadratureRule& base = gauss_legendre(order);
  QuadratureRule rule;
  rule.nodes.reserve(static_cast<std::size_t>(panels) * base.size());
  rule.weights.reserve(rule.nodes.capacity());
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double left = a + p * width;
    const double mid = left + 0.5 * width;
    for (std::size_t k = 0; k < base.size(); ++k) {
      rule.nodes.push_back(mid + 0.5 * width * base.nodes[k]);
      rule.weights.push_back(0.5 * width * base.weights[k]);
    }
  }
  return rule;
}

}  // namespace semilab
