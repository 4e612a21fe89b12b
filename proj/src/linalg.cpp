#include "semilab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "semilab/errors.hpp"
#include "semilab/quadrature.hpp"
#include "semilab/random.hpp"

namespace semilab {

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

LinearOperator::LinearOperator(Matrix entries, bool self_adjoint)
    : entries_(std::move(entries)), self_adjoint_(self_adjoint) {
  if (entries_.rows() < 1 || entries_.rows() != entries_.cols())
    throw ContractViolation("LinearOperator: matrix must be square with dim >= 1");
  if (!entries_.allFinite()) throw InputError("LinearOperator: non-finite entry");
  if (self_adjoint_) {
    const double scale = 1.0 + entries_.cwiseAbs().maxCoeff();
    if ((entries_ - entries_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw InputError("LinearOperator: flagged self-adjoint but not symmetric");
  }
}

LinearOperator LinearOperator::adjoint() const { return LinearOperator(entries_.transpose(), self_adjoint_); }

double LinearOperator::operator_norm() const {
  Eigen::JacobiSVD<Matrix> svd(entries_);
  return svd.singularValues()(0);
}

double LinearOperator::log_norm() const {
  const Matrix sym = 0.5 * (entries_ + entries_.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

CovarianceOperator::CovarianceOperator(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.rows() != entries_.cols())
    throw ContractViolation("CovarianceOperator: matrix must be square with dim >= 1");
  if (!entries_.allFinite()) throw InputError("CovarianceOperator: non-finite entry");
  const double max_abs = entries_.cwiseAbs().maxCoeff();
  if ((entries_ - entries_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + max_abs))
    throw InputError("CovarianceOperator: matrix is not symmetric");
  entries_ = 0.5 * (entries_ + entries_.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> eig(entries_);
  if (eig.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "CovarianceOperator: eigendecomposition failed (dim " << dim() << ", max |entry| " << max_abs
        << ", trace " << entries_.trace() << ")";
    throw NumericalError(msg.str());
  }
  eigenvalues_ = eig.eigenvalues();
  eigenvectors_ = eig.eigenvectors();
  // Rounding floor for matrices whose trace is itself at rounding level.
  const double floor = 1e-10 * std::max(0.0, entries_.trace()) +
                       16.0 * std::numeric_limits<double>::epsilon() * max_abs * dim();
  for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k) {
    if (eigenvalues_(k) < -floor) {
      std::ostringstream msg;
      msg << "CovarianceOperator: not positive semidefinite (eigenvalue " << eigenvalues_(k) << ", trace "
          << entries_.trace() << ")";
      throw InputError(msg.str());
    }
    eigenvalues_(k) = std::max(0.0, eigenvalues_(k));
  }
  factor_ = eigenvectors_ * eigenvalues_.cwiseSqrt().asDiagonal();
}

CovarianceOperator CovarianceOperator::zero(int dim) { return CovarianceOperator(Matrix::Zero(dim, dim)); }

int CovarianceOperator::rank(double relative_tol) const {
  const double threshold = relative_tol * std::max(1.0, eigenvalues_.maxCoeff());
  return static_cast<int>((eigenvalues_.array() > threshold).count());
}

Matrix expm(const LinearOperator& A, double t) {
  if (!std::isfinite(t)) throw InputError("expm: non-finite time");
  if (t == 0.0) return Matrix::Identity(A.dim(), A.dim());
  return (t * A.matrix()).exp();
}

Vector expm_apply(const LinearOperator& A, double t, const Vector& x) {
  if (x.size() != A.dim()) throw ContractViolation("expm_apply: dimension mismatch");
  if (!x.allFinite() || !std::isfinite(t)) throw InputError("expm_apply: non-finite input");
  if (t == 0.0) return x;
  return expm(A, t) * x;
}

CovarianceOperator covariance_Qt(const LinearOperator& A, const CovarianceOperator& Q, double t, int steps) {
  if (A.dim() != Q.dim()) throw ContractViolation("covariance_Qt: dimension mismatch");
  if (!std::isfinite(t) || t < 0.0) throw InputError("covariance_Qt: t must be finite and >= 0");
  if (steps < 1) throw InputError("covariance_Qt: steps must be >= 1");
  const int d = A.dim();
  if (t == 0.0) return CovarianceOperator::zero(d);
  const QuadratureRule rule = composite_gauss_legendre(0.0, t, steps);
  Matrix sum = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const Matrix flow = expm(A, rule.nodes[k]);
    sum.noalias() += rule.weights[k] * (flow * Q.matrix() * flow.transpose());
  }
  return CovarianceOperator(0.5 * (sum + sum.transpose()));
}

std::vector<Vector> gaussian_sample(const CovarianceOperator& C, int n, std::uint64_t seed) {
  if (n < 1) throw InputError("gaussian_sample: n must be >= 1");
  const int d = C.dim();
  std::vector<Vector> out(static_cast<std::size_t>(n), Vector::Zero(d));
  Vector z(d);
  for (int i = 0; i < n; ++i) {
    NormalStream normals(seed, static_cast<std::uint64_t>(i));
    normals.fill(z);
    out[i].noalias() = C.factor() * z;
  }
  return out;
}

CovarianceOperator solve_lyapunov(const LinearOperator& A, const CovarianceOperator& Q) {
  const int d = A.dim();
  if (Q.dim() != d) throw ContractViolation("solve_lyapunov: dimension mismatch");
  // vec(A S + S A^T) = (I kron A + A kron I) vec(S)
  const Matrix I = Matrix::Identity(d, d);
  Matrix K = Matrix::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      K.block(i * d, j * d, d, d) += I(i, j) * A.matrix();
      K.block(i * d, j * d, d, d) += A.matrix()(i, j) * I;
    }
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) throw NumericalError("solve_lyapunov: A has eigenvalues summing to zero");
  const Vector rhs = -Eigen::Map<const Vector>(Q.matrix().data(), d * d);
  const Vector s = lu.solve(rhs);
  const Matrix S = Eigen::Map<const Matrix>(s.data(), d, d);
  return CovarianceOperator(0.5 * (S + S.transpose()));
}

}  // namespace semilab
