#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "semilab/ou.hpp"
#include "semilab/random.hpp"

using namespace semilab;

namespace {

Matrix random_matrix(int d, double norm, std::uint64_t seed) {
  NormalStream z(seed, 0);
  Matrix m(d, d);
  z.fill(m);
  return m * (norm / m.operatorNorm());
}

GalerkinModel random_ou(int d, std::uint64_t seed) {
  const Matrix L = random_matrix(d, 1.0, seed + 1);
  return GalerkinModel::ou(random_matrix(d, 2.0, seed), L * L.transpose());
}

Vector random_vector(int d, double scale, std::uint64_t seed) {
  NormalStream z(seed, 1);
  Vector v(d);
  z.fill(v);
  return scale * v;
}

}  // namespace

TEST(OuExact, TimeZeroIsTheExponential) {
  const auto model = random_ou(3, 1);
  const Vector h = random_vector(3, 1.0, 2), x = random_vector(3, 1.0, 3);
  const Complex value = ou_exact_cyl(model, 0.0, h, x);
  EXPECT_NEAR(value.real(), std::cos(h.dot(x)), 1e-15);
  EXPECT_NEAR(value.imag(), std::sin(h.dot(x)), 1e-15);
}

TEST(OuExact, BrownianScalar) {
  const auto model = GalerkinModel::ou(Matrix::Zero(1, 1), Matrix::Ones(1, 1));
  const Complex value = ou_exact_cyl(model, 2.0, Vector::Ones(1), Vector::Zero(1));
  EXPECT_NEAR(value.real(), std::exp(-1.0), 1e-14);
  EXPECT_NEAR(value.imag(), 0.0, 1e-15);
}

TEST(OuExact, SemigroupComposition) {
  for (int k = 0; k < 20; ++k) {
    const int d = 1 + k % 4;
    const auto model = random_ou(d, 100 + 2 * k);
    const Vector h = random_vector(d, 1.0, 200 + k), x = random_vector(d, 1.0, 300 + k);
    const double t = 0.3 + 0.05 * k, s = 0.7;
    // R_s e_h = exp(-<Q_s h,h>/2) e_{e^{sA*}h}, then apply R_t.
    const Vector g = expm(model.A(), s).transpose() * h;
    const double damp = std::exp(-0.5 * covariance_Qt(model.A(), model.Q(), s).quadratic_form(h));
    const Complex composed = damp * ou_exact_cyl(model, t, g, x);
    const Complex direct = ou_exact_cyl(model, t + s, h, x);
    EXPECT_LE(std::abs(composed - direct), 1e-10) << k;
  }
}

TEST(OuApply, MonteCarloWithinThreeSigma) {
  int misses = 0;
  for (int k = 0; k < 20; ++k) {
    const int d = 1 + k % 3;
    const auto model = random_ou(d, 400 + 2 * k);
    const Vector h = random_vector(d, 1.0, 500 + k), x = random_vector(d, 1.0, 600 + k);
    const double t = 0.1 + 0.09 * k;
    const Estimate est = ou_apply(model, t, TestFunction::cylindrical(h), x, 20000, 700 + k);
    if (std::abs(est.value - ou_exact_cyl(model, t, h, x).real()) > 3 * est.stderr) ++misses;
  }
  EXPECT_LE(misses, 2);
}

TEST(OuApply, ConstantIsExact) {
  const auto model = random_ou(2, 9);
  const Estimate est = ou_apply(model, 0.8, TestFunction::constant(2.5), random_vector(2, 1.0, 1), 1000, 3);
  EXPECT_EQ(est.value, 2.5);
  EXPECT_EQ(est.stderr, 0.0);
}

TEST(OuApply, Contraction) {
  const auto model = random_ou(2, 13);
  const TestFunction f = TestFunction::ou_integral(0.9, random_vector(2, 1.0, 14));
  const Estimate est = ou_apply(model, 1.0, f, random_vector(2, 1.0, 15), 5000, 16);
  EXPECT_LE(std::abs(est.value), f.sup_bound() + 3 * est.stderr);
}

TEST(OuApplyQuadrature, MatchesClosedForm) {
  for (int k = 0; k < 10; ++k) {
    const int d = 1 + k % 3;
    const auto model = random_ou(d, 800 + 2 * k);
    const Vector h = random_vector(d, 1.0, 900 + k), x = random_vector(d, 1.0, 1000 + k);
    const double t = 0.2 + 0.15 * k;
    EXPECT_NEAR(ou_apply_quadrature(model, t, TestFunction::cylindrical(h, Part::Imag), x),
                ou_exact_cyl(model, t, h, x).imag(), 1e-6);
  }
}

TEST(OuApplyQuadrature, DegenerateCovariance) {
  Matrix Q = Matrix::Zero(2, 2);
  Q(0, 0) = 1.0;
  const auto model = GalerkinModel::ou(Matrix::Zero(2, 2), Q);
  Vector h(2), x(2);
  h << 0.8, 0.5;
  x << 0.2, -0.4;
  EXPECT_NEAR(ou_apply_quadrature(model, 1.0, TestFunction::cylindrical(h), x), ou_exact_cyl(model, 1.0, h, x).real(),
              1e-12);
}

TEST(ShiftIdentity, ZeroModelIsExact) {
  const auto model = GalerkinModel::ou(Matrix::Zero(2, 2), Matrix::Zero(2, 2));
  EXPECT_LE(ou_shift_identity_check(model, 0.5, 1.0, random_vector(2, 1.0, 1), random_vector(2, 1.0, 2)), 1e-12);
}

TEST(ShiftIdentity, RandomInstances) {
  for (int k = 0; k < 10; ++k) {
    const int d = 1 + k % 3;
    const auto model = random_ou(d, 1100 + 2 * k);
    EXPECT_LE(ou_shift_identity_check(model, 0.1 + 0.1 * k, 0.5 + 0.05 * k, random_vector(d, 1.0, 1200 + k),
                                      random_vector(d, 1.0, 1300 + k)),
              1e-8)
        << k;
  }
}

TEST(ShiftIdentity, SmallTime) {
  const auto model = random_ou(2, 1400);
  EXPECT_LE(ou_shift_identity_check(model, 1e-8, 1.0, random_vector(2, 1.0, 1), random_vector(2, 1.0, 2)), 1e-8);
}

TEST(GeneratorQuotient, ConstantIsZero) {
  const auto handle = SemigroupHandle::exact_ou(random_ou(2, 1500));
  EXPECT_EQ(generator_quotient(handle, TestFunction::constant(4.0), random_vector(2, 1.0, 1), 1e-3).value, 0.0);
}

TEST(GeneratorQuotient, FirstOrderConvergence) {
  const auto model = random_ou(2, 1600);
  const auto handle = SemigroupHandle::exact_ou(model);
  const TestFunction f = TestFunction::ou_integral(0.8, random_vector(2, 1.0, 1601));
  const Vector x = random_vector(2, 1.0, 1602);
  const double closed = kolmogorov_apply(f, model, x);
  const double e1 = std::abs(generator_quotient(handle, f, x, 1e-3).value - closed);
  const double e2 = std::abs(generator_quotient(handle, f, x, 5e-4).value - closed);
  EXPECT_LE(e1, 1e-2);
  EXPECT_GE(e2 / e1, 0.35);
  EXPECT_LE(e2 / e1, 0.65);
}
