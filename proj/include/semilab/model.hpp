#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "semilab/linalg.hpp"

namespace semilab {

/// Nonlinearity F: R^d -> R^d of the semilinear equation.
class Drift {
 public:
  virtual ~Drift() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual Vector operator()(const Vector& x) const = 0;

  /// Row-wise application to an n x d block (used by the path simulator).
  virtual void apply_rows(const Matrix& points, Matrix& out) const;

  /// True when directional() is analytic rather than a finite-difference fallback.
  virtual bool has_derivative() const { return false; }
  /// DF(x)[v]. Default: central differences with step 1e-6.
  virtual Vector directional(const Vector& x, const Vector& v) const;

  virtual double lipschitz() const = 0;
  /// sup |F|; infinity for unbounded drifts.
  virtual double sup_norm() const { return std::numeric_limits<double>::infinity(); }
  /// sup ||DF(x)|| over x (operator norm); equals the Lipschitz constant for the presets.
  virtual double derivative_bound() const { return lipschitz(); }
  virtual bool is_zero() const { return false; }
};

class ZeroDrift final : public Drift {
 public:
  explicit ZeroDrift(int dim) : dim_(dim) {}
  std::string name() const override { return "zero"; }
  int dim() const override { return dim_; }
  Vector operator()(const Vector& x) const override { return Vector::Zero(x.size()); }
  void apply_rows(const Matrix& points, Matrix& out) const override { out.setZero(points.rows(), points.cols()); }
  bool has_derivative() const override { return true; }
  Vector directional(const Vector& x, const Vector&) const override { return Vector::Zero(x.size()); }
  double lipschitz() const override { return 0.0; }
  double sup_norm() const override { return 0.0; }
  bool is_zero() const override { return true; }

 private:
  int dim_;
};

/// F(x) = clip(Bx, -cap, cap) componentwise.
class LinearClippedDrift final : public Drift {
 public:
  LinearClippedDrift(Matrix B, double cap);
  std::string name() const override { return "linear"; }
  int dim() const override { return static_cast<int>(B_.rows()); }
  Vector operator()(const Vector& x) const override;
  void apply_rows(const Matrix& points, Matrix& out) const override;
  bool has_derivative() const override { return true; }
  Vector directional(const Vector& x, const Vector& v) const override;
  double lipschitz() const override { return norm_; }
  double sup_norm() const override;

  const Matrix& coupling() const { return B_; }
  double cap() const { return cap_; }

 private:
  Matrix B_;
  double cap_;
  double norm_;
};

/// F(x) = scale * tanh(Bx) componentwise; bounded and smooth.
class TanhDrift final : public Drift {
 public:
  TanhDrift(double scale, Matrix B);
  std::string name() const override { return "tanh"; }
  int dim() const override { return static_cast<int>(B_.rows()); }
  Vector operator()(const Vector& x) const override;
  void apply_rows(const Matrix& points, Matrix& out) const override;
  bool has_derivative() const override { return true; }
  Vector directional(const Vector& x, const Vector& v) const override;
  double lipschitz() const override { return std::abs(scale_) * norm_; }
  double sup_norm() const override;

  double scale() const { return scale_; }
  const Matrix& coupling() const { return B_; }

 private:
  double scale_;
  Matrix B_;
  double norm_;
};

/// User-supplied callable; derivative optional.
class FunctionDrift final : public Drift {
 public:
  using Field = std::function<Vector(const Vector&)>;
  using Derivative = std::function<Vector(const Vector&, const Vector&)>;

  FunctionDrift(std::string name, int dim, Field field, double lipschitz,
                std::optional<Derivative> derivative = std::nullopt,
                double sup_norm = std::numeric_limits<double>::infinity());

  std::string name() const override { return name_; }
  int dim() const override { return dim_; }
  Vector operator()(const Vector& x) const override { return field_(x); }
  bool has_derivative() const override { return derivative_.has_value(); }
  Vector directional(const Vector& x, const Vector& v) const override;
  double lipschitz() const override { return lipschitz_; }
  double sup_norm() const override { return sup_norm_; }

 private:
  std::string name_;
  int dim_;
  Field field_;
  double lipschitz_;
  std::optional<Derivative> derivative_;
  double sup_norm_;
};

/// The model data (d, A, Q, F, M, omega, L_F) with Q_t and e^{tA} helpers.
///
/// Construction checks ||e^{tA}|| <= M e^{omega t} on t = 0, 0.1, ..., 2, that F(0) is finite and
/// that the empirical Lipschitz ratio of F on seeded random pairs stays below 1.01 L_F. When M and
/// omega are not given, M = 1 and omega = log_norm(A), which makes the growth bound exact.
class GalerkinModel {
 public:
  GalerkinModel(LinearOperator A, CovarianceOperator Q, std::shared_ptr<const Drift> drift,
                std::optional<double> growth_constant = std::nullopt,
                std::optional<double> growth_exponent = std::nullopt);

  /// Ornstein–Uhlenbeck model (F = 0).
  static GalerkinModel ou(Matrix A, Matrix Q);

  int dim() const { return A_.dim(); }
  const LinearOperator& A() const { return A_; }
  const LinearOperator& A_adjoint() const { return A_adjoint_; }
  const CovarianceOperator& Q() const { return Q_; }
  const Drift& drift() const { return *drift_; }
  std::shared_ptr<const Drift> drift_ptr() const { return drift_; }
  double M() const { return M_; }
  double omega() const { return omega_; }
  double lipschitz() const { return drift_->lipschitz(); }
  bool is_ou() const { return drift_->is_zero(); }

  /// Q_t with the default quadrature resolution.
  CovarianceOperator covariance(double t) const { return covariance_Qt(A_, Q_, t); }

 private:
  LinearOperator A_;
  LinearOperator A_adjoint_;
  CovarianceOperator Q_;
  std::shared_ptr<const Drift> drift_;
  double M_;
  double omega_;
};

}  // namespace semilab
