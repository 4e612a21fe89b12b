#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace semilab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense operator on R^d. Immutable after construction.
class LinearOperator {
 public:
  explicit LinearOperator(Matrix entries, bool self_adjoint = false);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& matrix() const { return entries_; }
  bool self_adjoint() const { return self_adjoint_; }

  LinearOperator adjoint() const;
  double operator_norm() const;
  /// Logarithmic 2-norm, the largest eigenvalue of (A + A^T)/2; ||e^{tA}|| <= e^{t * log_norm}.
  double log_norm() const;

 private:
  Matrix entries_;
  bool self_adjoint_ = false;
};

/// Symmetric positive semidefinite operator. The eigendecomposition is computed once at
/// construction; eigenvalues in [-1e-10 tr, 0) are clamped to zero, anything more negative is
/// rejected.
class CovarianceOperator {
 public:
  explicit CovarianceOperator(Matrix entries);

  static CovarianceOperator zero(int dim);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& matrix() const { return entries_; }
  double trace() const { return entries_.trace(); }

  /// Clamped eigenvalues in increasing order and the matching orthonormal eigenvectors.
  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }

  /// Columns sqrt(lambda_k) v_k; factor * factor^T reproduces the clamped operator.
  const Matrix& factor() const { return factor_; }

  /// Number of eigenvalues above `relative_tol * max(1, largest eigenvalue)`.
  int rank(double relative_tol = 1e-14) const;

  double quadratic_form(const Vector& h) const { return h.dot(entries_ * h); }

 private:
  Matrix entries_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
  Matrix factor_;
};

/// e^{tA} as a dense matrix (scaling and squaring with Padé approximants).
Matrix expm(const LinearOperator& A, double t);

/// e^{tA} x.
Vector expm_apply(const LinearOperator& A, double t, const Vector& x);

/// Q_t = \int_0^t e^{sA} Q e^{sA^*} ds by composite Gauss–Legendre over `steps` panels.
CovarianceOperator covariance_Qt(const LinearOperator& A, const CovarianceOperator& Q, double t, int steps = 64);

/// n i.i.d. draws from N(0, C); draw i uses Philox stream i of `seed`.
std::vector<Vector> gaussian_sample(const CovarianceOperator& C, int n, std::uint64_t seed);

/// Solves A S + S A^T + Q = 0 (the stationary covariance of a stable OU process).
CovarianceOperator solve_lyapunov(const LinearOperator& A, const CovarianceOperator& Q);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

}  // namespace semilab
