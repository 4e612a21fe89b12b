#pragma once

#include <cstddef>
#include <vector>

namespace semilab {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss–Legendre rule on [-1, 1]. Rules are cached; the returned reference stays valid.
const QuadratureRule& gauss_legendre(int n);

/// n-point Gauss–Hermite rule for the standard normal law: sum_k w_k f(z_k) ~ E f(Z), sum w_k = 1.
const QuadratureRule& gauss_hermite_normal(int n);

/// `panels` equal panels on [a, b], each carrying an `order`-point Gauss–Legendre rule.
/// Nodes are returned in increasing order.
QuadratureRule composite_gauss_legendre(double a, double b, int panels, int order = 5);

}  // namespace semilab
