#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "semilab/errors.hpp"
#include "semilab/ou.hpp"
#include "semilab/random.hpp"
#include "semilab/sde.hpp"

using namespace semilab;

namespace {

GalerkinModel tanh_model(int d, double scale = 0.8) {
  Matrix A(d, d), B(d, d), Q(d, d);
  A.setZero();
  B.setIdentity();
  Q.setIdentity();
  for (int i = 0; i < d; ++i) A(i, i) = -1.0 + 0.2 * i;
  if (d > 1) {
    A(0, 1) = 0.3;
    B(0, 1) = -0.5;
    B(1, 0) = 0.4;
    Q(0, 1) = Q(1, 0) = 0.2;
  }
  return GalerkinModel(LinearOperator(A), CovarianceOperator(Q), std::make_shared<TanhDrift>(scale, B));
}

GalerkinModel ou2() {
  Matrix A(2, 2), Q(2, 2);
  A << -0.8, 0.4, -0.2, -0.5;
  Q << 1.0, 0.3, 0.3, 0.6;
  return GalerkinModel::ou(A, Q);
}

}  // namespace

TEST(SimulateMild, NoiselessLinearFlow) {
  Matrix A(2, 2);
  A << -0.5, 1.0, -1.0, -0.5;
  const auto model = GalerkinModel::ou(A, Matrix::Zero(2, 2));
  Vector x(2);
  x << 1.0, -2.0;
  const auto state = simulate_mild(model, x, 1.37, 0.1, 16, 3);
  const Vector expected = expm_apply(model.A(), 1.37, x);
  for (int i = 0; i < 16; ++i) EXPECT_LE((state.positions.row(i).transpose() - expected).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(state.time, 1.37);
}

TEST(SimulateMild, GaussianLaw) {
  const auto model = ou2();
  Vector x(2);
  x << 0.7, -0.4;
  const double T = 1.3;
  const int n = 100000;
  const auto state = simulate_mild(model, x, T, 0.1, n, 11);
  const Vector mean = state.positions.colwise().mean();
  const Matrix centered = state.positions.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / (n - 1);
  const Vector m = expm_apply(model.A(), T, x);
  const Matrix QT = covariance_Qt(model.A(), model.Q(), T).matrix();
  for (int j = 0; j < 2; ++j) EXPECT_LE(std::abs(mean(j) - m(j)), 3 * std::sqrt(QT(j, j) / n));
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(cov(i, i), QT(i, i), 0.05 * QT(i, i));
  EXPECT_NEAR(cov(0, 1), QT(0, 1), 0.05 * std::sqrt(QT(0, 0) * QT(1, 1)));
}

TEST(SimulateMild, Deterministic) {
  const auto model = tanh_model(2);
  const Vector x = Vector::Constant(2, 0.2);
  const auto a = simulate_mild(model, x, 0.75, 0.1, 3000, 99);
  const auto b = simulate_mild(model, x, 0.75, 0.1, 3000, 99);
  EXPECT_TRUE((a.positions.array() == b.positions.array()).all());
}

// Exponential Euler with common noise: coarse increments are aggregated from the finest ones,
// xi_{[0,2h]} = e^{hA} xi_{[0,h]} + xi_{[h,2h]}.
TEST(SimulateMild, StrongOrderOne) {
  const auto model = GalerkinModel(LinearOperator(Matrix::Constant(1, 1, -1.0)),
                                   CovarianceOperator(Matrix::Ones(1, 1)),
                                   std::make_shared<TanhDrift>(0.5, Matrix::Ones(1, 1)));
  const double T = 1.0, dt = 0.1;
  const int levels = 7, fine = static_cast<int>(std::lround(T / dt)) << levels, paths = 2000;
  const double hf = T / fine;
  double err_coarse = 0, err_half = 0;
  for (int p = 0; p < paths; ++p) {
    NormalStream z(2024, p);
    std::vector<double> xi(fine);
    const double sd = std::sqrt((1 - std::exp(-2 * hf)) / 2);
    for (double& v : xi) v = sd * z();
    std::vector<std::vector<double>> incr{xi};
    double h = hf;
    for (int l = 0; l < levels; ++l) {
      const auto& prev = incr.back();
      std::vector<double> next(prev.size() / 2);
      for (std::size_t k = 0; k < next.size(); ++k) next[k] = std::exp(-h) * prev[2 * k] + prev[2 * k + 1];
      incr.push_back(std::move(next));
      h *= 2;
    }
    auto run = [&](int level) {
      const auto& inc = incr[level];
      const double step = T / inc.size();
      Vector x = Vector::Ones(1);
      for (double v : inc) x = exponential_euler_step(model, x, step, Vector::Constant(1, v));
      return x(0);
    };
    const double ref = run(0);
    err_coarse += std::pow(run(levels) - ref, 2);
    err_half += std::pow(run(levels - 1) - ref, 2);
  }
  const double ratio = std::sqrt(err_coarse / err_half);
  EXPECT_GE(ratio, 1.6);
  EXPECT_LE(ratio, 2.4);
}

TEST(SimulateMild, BlowUpDetected) {
  const auto model = GalerkinModel::ou(Matrix::Constant(1, 1, 20.0), Matrix::Zero(1, 1));
  EXPECT_THROW(simulate_mild(model, Vector::Ones(1), 1.0, 0.1, 4, 1), BlowUpError);
}

TEST(SimulateMild, TrajectoryCsvRoundTrip) {
  const auto model = tanh_model(2);
  const auto state = simulate_mild(model, Vector::Constant(2, 0.1), 0.35, 0.1, 5, 7, true);
  ASSERT_TRUE(state.trajectory.has_value());
  std::stringstream text;
  write_trajectory_csv(text, *state.trajectory);
  EXPECT_EQ(text.str().substr(0, text.str().find('\n')), "sample,step,time,x_1,x_2");
  const auto back = read_trajectory_csv(text);
  ASSERT_EQ(back.rows.size(), state.trajectory->rows.size());
  for (std::size_t r = 0; r < back.rows.size(); ++r) {
    const auto& a = back.rows[r];
    const auto& b = state.trajectory->rows[r];
    EXPECT_EQ(a.sample, b.sample);
    EXPECT_EQ(a.step, b.step);
    EXPECT_EQ(a.time, b.time);
    EXPECT_TRUE((a.x.array() == b.x.array()).all());
  }
}

TEST(Handle, ExactRequiresZeroDrift) {
  EXPECT_THROW(SemigroupHandle::exact_ou(tanh_model(2)), InputError);
  EXPECT_THROW(SemigroupHandle::monte_carlo(ou2(), 0.0, 100, 1), InputError);
  EXPECT_THROW(SemigroupHandle::monte_carlo(ou2(), 0.1, 1, 1), InputError);
}

TEST(TransitionApply, TimeZeroAndConstant) {
  const auto handle = SemigroupHandle::monte_carlo(tanh_model(2), 0.05, 1000, 3);
  const TestFunction f = TestFunction::cylindrical(Vector::Constant(2, 0.7));
  const Vector x = Vector::Constant(2, 0.4);
  const Estimate at0 = transition_apply(handle, f, 0.0, x);
  EXPECT_DOUBLE_EQ(at0.value, std::cos(0.7 * 0.8));
  EXPECT_EQ(at0.stderr, 0.0);
  const Estimate c = transition_apply(handle, TestFunction::constant(-1.25), 0.9, x);
  EXPECT_EQ(c.value, -1.25);
  EXPECT_EQ(c.stderr, 0.0);
}

TEST(TransitionApply, OUMatchesClosedForm) {
  const auto model = ou2();
  const auto handle = SemigroupHandle::monte_carlo(model, 0.1, 50000, 5);
  Vector h(2), x(2);
  h << 0.9, -0.6;
  x << 0.3, 0.5;
  const Estimate est = transition_apply(handle, TestFunction::cylindrical(h), 0.8, x);
  EXPECT_LE(std::abs(est.value - ou_exact_cyl(model, 0.8, h, x).real()), 3 * est.stderr);
  const Estimate exact = transition_apply(SemigroupHandle::exact_ou(model), TestFunction::cylindrical(h), 0.8, x);
  EXPECT_NEAR(exact.value, ou_exact_cyl(model, 0.8, h, x).real(), 1e-14);
}

TEST(TransitionApply, Contraction) {
  const auto handle = SemigroupHandle::monte_carlo(tanh_model(2), 0.05, 5000, 8);
  const TestFunction f = 0.5 * TestFunction::cylindrical(Vector::Constant(2, 1.0)) +
                         TestFunction::ou_integral(0.5, Vector::Constant(2, 0.4), Part::Imag);
  const Estimate est = transition_apply(handle, f, 0.6, Vector::Constant(2, 0.1));
  EXPECT_LE(std::abs(est.value), f.sup_bound() + 3 * est.stderr);
}

TEST(TransitionApply, MarkovProperty) {
  const auto model = tanh_model(1);
  const double s = 0.5, t = 0.5, dt = 0.05;
  const TestFunction f = TestFunction::cylindrical(Vector::Constant(1, 1.3));
  const Vector x = Vector::Constant(1, 0.6);
  const Estimate direct = transition_apply(SemigroupHandle::monte_carlo(model, dt, 100000, 1), f, t + s, x);
  const Matrix ys = sample_endpoints(SemigroupHandle::monte_carlo(model, dt, 400, 2), x, t);
  Moments nested;
  for (int j = 0; j < ys.rows(); ++j) {
    const Vector y = ys.row(j).transpose();
    nested.add(transition_apply(SemigroupHandle::monte_carlo(model, dt, 400, derive_seed(3, j)), f, s, y).value);
  }
  const double combined = std::hypot(direct.stderr, nested.stderr());
  EXPECT_LE(std::abs(direct.value - nested.mean()), 3 * combined);
}

TEST(Continuity, BrownianVariance) {
  const auto handle = SemigroupHandle::monte_carlo(GalerkinModel::ou(Matrix::Zero(1, 1), Matrix::Ones(1, 1)), 0.05,
                                                   50000, 4);
  const auto rows = stochastic_continuity_check(handle, Vector::Constant(1, 0.3), 0.0, {0.0, 0.1, 0.4, 1.0});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].mean_square, 0.0);
  for (std::size_t k = 1; k < rows.size(); ++k)
    EXPECT_LE(std::abs(rows[k].mean_square - rows[k].time), 3 * rows[k].stderr) << k;
}

TEST(Continuity, LipschitzDriftLinearInDelta) {
  const auto handle = SemigroupHandle::monte_carlo(tanh_model(2), 0.01, 20000, 5);
  const auto rows = stochastic_continuity_check(handle, Vector::Constant(2, 0.5), 0.3, {0.02, 0.04, 0.08, 0.16});
  for (const auto& r : rows) EXPECT_LE(r.mean_square / r.time, 5.0);
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_GT(rows[k].mean_square, rows[k - 1].mean_square);
}

TEST(FirstVariation, ZeroDriftIsLinearFlow) {
  const auto model = ou2();
  Vector h(2);
  h << 1.0, -0.5;
  const auto fv = first_variation(model, Vector::Zero(2), h, 0.9, 0.1, 10, 1);
  const Vector expected = expm_apply(model.A(), 0.9, h);
  for (int i = 0; i < 10; ++i) EXPECT_LE((fv.tangents.row(i).transpose() - expected).norm(), 1e-12);
}

TEST(FirstVariation, PathwiseBound) {
  const auto model = tanh_model(2);
  Vector h(2);
  h << 0.6, 0.8;
  const double T = 1.0;
  const auto fv = first_variation(model, Vector::Constant(2, 0.2), h, T, 0.01, 10000, 2);
  const double bound =
      model.M() * std::exp((model.omega() + model.M() * model.drift().derivative_bound()) * T) * h.norm();
  for (int i = 0; i < fv.tangents.rows(); ++i) ASSERT_LE(fv.tangents.row(i).norm(), bound);
}

TEST(FirstVariation, LinearInDirection) {
  const auto model = tanh_model(2);
  const Vector x = Vector::Constant(2, 0.3), h = Vector::Unit(2, 0), k = Vector::Unit(2, 1);
  const auto a = first_variation(model, x, h, 0.8, 0.05, 500, 6).tangents;
  const auto b = first_variation(model, x, k, 0.8, 0.05, 500, 6).tangents;
  const auto c = first_variation(model, x, 2.0 * h - 0.5 * k, 0.8, 0.05, 500, 6).tangents;
  EXPECT_LE((c - (2.0 * a - 0.5 * b)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FirstVariation, CoupledFiniteDifference) {
  const auto model = tanh_model(2);
  Vector x(2), h(2);
  x << 0.4, -0.2;
  h << 0.3, 0.9;
  const double eps = 1e-4;
  const auto fv = first_variation(model, x, h, 1.0, 0.01, 2000, 12);
  const Matrix base = simulate_mild(model, x, 1.0, 0.01, 2000, 12).positions;
  const Matrix bumped = simulate_mild(model, x + eps * h, 1.0, 0.01, 2000, 12).positions;
  EXPECT_LE(((bumped - base) / eps - fv.tangents).rowwise().norm().maxCoeff(), 1e-3 * h.norm());
  EXPECT_TRUE((fv.positions.array() == base.array()).all());
}

TEST(GradientTransition, TimeZero) {
  const auto model = tanh_model(2);
  const auto handle = SemigroupHandle::monte_carlo(model, 0.05, 100, 1);
  const TestFunction f = TestFunction::ou_integral(0.7, Vector::Constant(2, 0.5));
  const Vector x = Vector::Constant(2, 0.1), h = Vector::Unit(2, 1);
  const Estimate est = gradient_transition(handle, f, 0.0, x, h);
  EXPECT_NEAR(est.value, gradient(f, model, x).dot(h), 1e-15);
  EXPECT_EQ(est.stderr, 0.0);
}

TEST(GradientTransition, OUClosedForm) {
  const auto model = ou2();
  const auto handle = SemigroupHandle::monte_carlo(model, 0.1, 50000, 21);
  Vector g(2), x(2), h(2);
  g << 0.8, 0.4;
  x << 0.2, 0.6;
  h << -0.3, 1.0;
  const double t = 0.7;
  const Estimate est = gradient_transition(handle, TestFunction::cylindrical(g), t, x, h);
  const double expected = -expm_apply(model.A(), t, h).dot(g) * ou_exact_cyl(model, t, g, x).imag();
  EXPECT_LE(std::abs(est.value - expected), 3 * est.stderr + 1e-12);
}

TEST(GradientTransition, CoupledFiniteDifference) {
  const auto model = tanh_model(2);
  const auto handle = SemigroupHandle::monte_carlo(model, 0.02, 20000, 31);
  const TestFunction f = TestFunction::cylindrical(Vector::Constant(2, 0.9), Part::Imag);
  Vector x(2), h(2);
  x << 0.4, -0.2;
  h << 1.0, 0.5;
  const double eps = 1e-4, t = 0.6;
  const Estimate grad = gradient_transition(handle, f, t, x, h);
  const double fd =
      (transition_apply(handle, f, t, x + eps * h).value - transition_apply(handle, f, t, x - eps * h).value) /
      (2 * eps);
  EXPECT_LE(std::abs(grad.value - fd), 3 * grad.stderr + 1e-3);
}
