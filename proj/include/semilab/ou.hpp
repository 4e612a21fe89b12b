#pragma once

#include <cstdint>
#include <functional>

#include "semilab/model.hpp"
#include "semilab/sde.hpp"
#include "semilab/stats.hpp"
#include "semilab/testfn.hpp"

namespace semilab {

/// R_t e^{i<.,h>}(x) = exp(i<e^{tA}x, h> - <Q_t h, h>/2) as (cos, sin) parts. F is ignored.
Complex ou_exact_cyl(const GalerkinModel& model, double t, const Vector& h, const Vector& x);

/// Monte Carlo estimate of R_t phi(x) = \int phi(e^{tA}x + y) N_{Q_t}(dy); draw i uses stream i.
Estimate ou_apply(const GalerkinModel& model, double t, const TestFunction& phi, const Vector& x, int n_samples,
                  std::uint64_t seed);
Estimate ou_apply(const GalerkinModel& model, double t, const BoundTestFunction& phi, const Vector& x, int n_samples,
                  std::uint64_t seed);

/// The same Gaussian integral by tensor Gauss–Hermite in the eigenbasis of Q_t restricted to its
/// nonzero eigenvalues. Deterministic; requires rank(Q_t) <= 3. nodes_per_axis = 0 doubles the
/// node count from 32 until the value settles.
double ou_apply_quadrature(const GalerkinModel& model, double t, const BoundTestFunction& phi, const Vector& x,
                           int nodes_per_axis = 0);
double ou_apply_quadrature(const GalerkinModel& model, double t, const TestFunction& phi, const Vector& x,
                           int nodes_per_axis = 0);

/// |R_t phi_{a,h}(x) - (phi_{a+t,h}(x) - phi_{t,h}(x))| for the complex OU-integral function,
/// with the left side integrated by Gauss–Hermite quadrature.
double ou_shift_identity_check(const GalerkinModel& model, double t, double a, const Vector& h, const Vector& x);

/// (P_t phi(x) - phi(x)) / t with the handle's evaluation method.
Estimate generator_quotient(const SemigroupHandle& handle, const TestFunction& phi, const Vector& x, double t);
Estimate generator_quotient(const SemigroupHandle& handle, const BoundTestFunction& phi, const Vector& x, double t);

/// (orbit(t) - orbit(0)) / t for a precomputed semigroup orbit s -> P_s g(x).
Estimate generator_quotient(const std::function<Estimate(double)>& orbit, double t);

}  // namespace semilab
