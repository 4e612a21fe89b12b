#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "semilab/errors.hpp"
#include "semilab/random.hpp"
#include "semilab/testfn.hpp"
#include "semilab/testfn_io.hpp"

using namespace semilab;

namespace {

// Taylor series with scaling and squaring; an oracle independent of the library's Padé path.
Matrix taylor_expm(const Matrix& M) {
  int squarings = 0;
  double norm = M.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.25) {
    norm /= 2;
    ++squarings;
  }
  const Matrix S = M / std::pow(2.0, squarings);
  Matrix term = Matrix::Identity(M.rows(), M.cols()), sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * S / k;
    sum += term;
  }
  for (int k = 0; k < squarings; ++k) sum = sum * sum;
  return sum;
}

Matrix random_matrix(int d, double norm, std::uint64_t seed) {
  NormalStream z(seed, 0);
  Matrix m(d, d);
  z.fill(m);
  return m * (norm / m.operatorNorm());
}

GalerkinModel random_ou(int d, std::uint64_t seed) {
  const Matrix L = random_matrix(d, 1.0, seed + 1);
  return GalerkinModel::ou(random_matrix(d, 1.5, seed), L * L.transpose());
}

Vector random_vector(int d, double scale, std::uint64_t seed) {
  NormalStream z(seed, 1);
  Vector v(d);
  z.fill(v);
  return scale * v;
}

// phi_{a,h} for d = 1 by composite Simpson with the scalar closed forms of e^{sA} and Q_s.
std::complex<double> scalar_ou_integral(double A, double Q, double a, double h, double x, int n = 20000) {
  auto f = [&](double s) {
    const double qs = std::abs(A) < 1e-14 ? Q * s : Q * (std::exp(2 * A * s) - 1) / (2 * A);
    return std::exp(std::complex<double>(-0.5 * qs * h * h, std::exp(A * s) * x * h));
  };
  const double step = a / n;
  std::complex<double> sum = f(0) + f(a);
  for (int k = 1; k < n; ++k) sum += (k % 2 ? 4.0 : 2.0) * f(k * step);
  return sum * step / 3.0;
}

}  // namespace

TEST(TestFunction, CylindricalEvaluation) {
  const auto model = random_ou(3, 1);
  const Vector h = random_vector(3, 1.0, 2), x = random_vector(3, 1.0, 3);
  EXPECT_DOUBLE_EQ(eval(TestFunction::cylindrical(h), model, x), std::cos(h.dot(x)));
  EXPECT_DOUBLE_EQ(eval(TestFunction::cylindrical(h, Part::Imag), model, x), std::sin(h.dot(x)));
}

TEST(TestFunction, OUIntegralWithZeroModel) {
  const auto model = GalerkinModel::ou(Matrix::Zero(2, 2), Matrix::Zero(2, 2));
  Vector h(2), x(2);
  h << 0.7, -0.2;
  x << 1.1, 0.4;
  EXPECT_NEAR(eval(TestFunction::ou_integral(1.5, h), model, x), 1.5 * std::cos(h.dot(x)), 1e-13);
}

TEST(TestFunction, OUIntegralSmallLimit) {
  const auto model = random_ou(2, 5);
  const Vector h = random_vector(2, 1.0, 6), x = random_vector(2, 1.0, 7);
  const double a = 1e-6;
  EXPECT_NEAR(eval(TestFunction::ou_integral(a, h), model, x) / a, std::cos(h.dot(x)), 1e-5);
}

TEST(TestFunction, OUIntegralMatchesScalarOracle) {
  for (double A : {-1.3, 0.0, 0.6}) {
    const auto model = GalerkinModel::ou(Matrix::Constant(1, 1, A), Matrix::Constant(1, 1, 0.9));
    const auto oracle = scalar_ou_integral(A, 0.9, 1.2, 1.4, 0.8);
    const Vector h = Vector::Constant(1, 1.4), x = Vector::Constant(1, 0.8);
    EXPECT_NEAR(eval(TestFunction::ou_integral(1.2, h), model, x), oracle.real(), 1e-10);
    EXPECT_NEAR(eval(TestFunction::ou_integral(1.2, h, Part::Imag), model, x), oracle.imag(), 1e-10);
  }
}

TEST(TestFunction, NodeDoublingStable) {
  const auto model = random_ou(2, 9);
  const Vector h = random_vector(2, 1.0, 10), x = random_vector(2, 1.0, 11);
  const double coarse = eval(TestFunction::ou_integral(1.0, h, Part::Real, 64), model, x);
  const double fine = eval(TestFunction::ou_integral(1.0, h, Part::Real, 128), model, x);
  EXPECT_LE(std::abs(coarse - fine), 1e-10);
  EXPECT_LE(std::abs(eval(TestFunction::ou_integral(1.0, h), model, x) - fine), 1e-10);
}

TEST(TestFunction, SupBoundedByLimit) {
  const auto model = random_ou(3, 12);
  const auto phi = bind(TestFunction::ou_integral(0.8, random_vector(3, 1.0, 13)), model);
  for (int k = 0; k < 1000; ++k) EXPECT_LE(std::abs(phi.eval(random_vector(3, 3.0, 100 + k))), 0.8 + 1e-12);
}

TEST(TestFunction, GradientAndHessianMatchFiniteDifferences) {
  const double step = 1e-4;
  for (int k = 0; k < 100; ++k) {
    const int d = 1 + k % 8;
    const auto model = random_ou(d, 1000 + 7 * k);
    const Vector h = random_vector(d, 0.8, 2000 + k), x = random_vector(d, 1.0, 3000 + k);
    const Part part = k % 2 ? Part::Imag : Part::Real;
    const TestFunction f = k % 3 ? TestFunction::ou_integral(0.5 + 0.01 * k, h, part)
                                 : TestFunction::cylindrical(h, part);
    const auto phi = bind(f, model);
    const Vector g = phi.gradient(x);
    const Matrix H = phi.hessian(x);
    for (int j = 0; j < d; ++j) {
      const Vector e = Vector::Unit(d, j) * step;
      EXPECT_NEAR(g(j), (phi.eval(x + e) - phi.eval(x - e)) / (2 * step), 1e-5);
      const Vector gd = (phi.gradient(x + e) - phi.gradient(x - e)) / (2 * step);
      for (int i = 0; i < d; ++i) EXPECT_NEAR(H(i, j), gd(i), 1e-5);
    }
  }
}

TEST(TestFunction, ZeroFrequencyHasZeroDerivatives) {
  const auto model = random_ou(3, 4);
  const auto phi = bind(TestFunction::ou_integral(1.0, Vector::Zero(3)), model);
  const Vector x = random_vector(3, 1.0, 5);
  EXPECT_EQ(phi.gradient(x).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(phi.hessian(x).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(phi.eval(x), 1.0, 1e-14);
}

TEST(Kolmogorov, CylindricalClosedForm) {
  const auto model = random_ou(3, 21);
  const Vector h = random_vector(3, 1.0, 22), x = random_vector(3, 1.0, 23);
  const std::complex<double> expected =
      std::complex<double>(-0.5 * h.dot(model.Q().matrix() * h), (model.A().matrix() * x).dot(h)) *
      std::exp(std::complex<double>(0, h.dot(x)));
  EXPECT_NEAR(kolmogorov_apply(TestFunction::cylindrical(h), model, x), expected.real(), 1e-12);
  EXPECT_NEAR(kolmogorov_apply(TestFunction::cylindrical(h, Part::Imag), model, x), expected.imag(), 1e-12);
}

// K_0 phi_{a,h}(x) = exp(i<e^{aA}x, h> - <Q_a h, h>/2) - e^{i<x,h>} when F = 0.
TEST(Kolmogorov, OUIntegralClosedForm) {
  for (int k = 0; k < 100; ++k) {
    const int d = 1 + k % 4;
    const auto model = random_ou(d, 5000 + 3 * k);
    const Vector h = random_vector(d, 1.0, 6000 + k), x = random_vector(d, 1.0, 7000 + k);
    const double a = 0.25 + 0.0125 * k;
    const Matrix Ea = taylor_expm(model.A().matrix() * a);
    const double qa = h.dot(covariance_Qt(model.A(), model.Q(), a, 512).matrix() * h);
    const std::complex<double> expected = std::exp(std::complex<double>(-0.5 * qa, (Ea * x).dot(h))) -
                                          std::exp(std::complex<double>(0, x.dot(h)));
    EXPECT_NEAR(kolmogorov_apply(TestFunction::ou_integral(a, h), model, x), expected.real(), 1e-8) << k;
    EXPECT_NEAR(kolmogorov_apply(TestFunction::ou_integral(a, h, Part::Imag), model, x), expected.imag(), 1e-8) << k;
  }
}

TEST(Kolmogorov, ConstantIsZero) {
  const auto model = random_ou(2, 31);
  EXPECT_EQ(kolmogorov_apply(TestFunction::constant(3.5), model, random_vector(2, 1.0, 1)), 0.0);
}

TEST(Kolmogorov, Linearity) {
  const auto model = random_ou(3, 41);
  const TestFunction f = TestFunction::ou_integral(0.7, random_vector(3, 1.0, 42));
  const TestFunction g = TestFunction::cylindrical(random_vector(3, 1.0, 43), Part::Imag);
  const Vector x = random_vector(3, 1.0, 44);
  const double alpha = 1.7, beta = -0.4;
  const double combined = kolmogorov_apply(alpha * f + beta * g, model, x);
  EXPECT_NEAR(combined, alpha * kolmogorov_apply(f, model, x) + beta * kolmogorov_apply(g, model, x), 1e-12);
}

TEST(TestFunction, DimensionMismatchRejected) {
  const auto model = random_ou(2, 51);
  EXPECT_THROW(bind(TestFunction::cylindrical(Vector::Ones(3)), model), ContractViolation);
  EXPECT_THROW(TestFunction::ou_integral(-1.0, Vector::Ones(2)), InputError);
}

TEST(Bank, SixteenFunctionsRoundTrip) {
  const auto bank = default_bank(3);
  ASSERT_EQ(bank.size(), 16u);
  for (const auto& f : bank) {
    const auto& atom = std::get<OUIntegralFunction>(f.terms().front().atom);
    EXPECT_TRUE(atom.a == 0.5 || atom.a == 1.0);
    EXPECT_GE(atom.h.norm(), 0.25);
    EXPECT_LE(atom.h.norm(), 0.75);
  }
  const auto text = serialize_bank(bank);
  const auto back = parse_bank(text);
  ASSERT_EQ(back.size(), bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) EXPECT_TRUE(back[i] == bank[i]);
  EXPECT_EQ(serialize_bank(back), text);
}

TEST(Bank, CombinationRoundTrip) {
  Vector h(2);
  h << 0.1 + 1e-17, 1.0 / 3.0;
  const TestFunction f = 0.3 * TestFunction::cylindrical(h) + TestFunction::ou_integral(0.7, h, Part::Imag, 33) +
                         TestFunction::constant(2.0 / 7.0);
  const auto back = test_function_from_json(nlohmann::json::parse(to_json(f).dump()));
  EXPECT_TRUE(back == f);
}
