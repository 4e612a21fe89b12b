#pragma once

#include <functional>

#include "semilab/sde.hpp"
#include "semilab/stats.hpp"
#include "semilab/testfn.hpp"

namespace semilab {

/// sum_k C(n,k) t^k (1-t)^{n-k} g(k/n), binomial weights evaluated in log space.
double bernstein_approx(const std::function<double(double)>& g, int n, double t);

/// (1/n3) sum_{i=1}^{n3} P_{i/(n1 n3)} phi(x); tends to n1 \int_0^{1/n1} P_t phi(x) dt as n3 grows.
Estimate cesaro_smooth(const SemigroupHandle& handle, const TestFunction& phi, int n1, int n3, const Vector& x);

}  // namespace semilab
