#include "semilab/model.hpp"

#include <cmath>
#include <sstream>

#include "semilab/errors.hpp"
#include "semilab/random.hpp"

namespace semilab {

namespace {

double spectral_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

void Drift::apply_rows(const Matrix& points, Matrix& out) const {
  out.resize(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) out.row(i) = (*this)(points.row(i).transpose()).transpose();
}

Vector Drift::directional(const Vector& x, const Vector& v) const {
  constexpr double step = 1e-6;
  return ((*this)(x + step * v) - (*this)(x - step * v)) / (2.0 * step);
}

LinearClippedDrift::LinearClippedDrift(Matrix B, double cap) : B_(std::move(B)), cap_(cap) {
  if (B_.rows() != B_.cols() || B_.rows() < 1) throw ContractViolation("LinearClippedDrift: B must be square");
  if (!B_.allFinite() || !(cap_ > 0.0)) throw InputError("LinearClippedDrift: need finite B and cap > 0");
  norm_ = spectral_norm(B_);
}

Vector LinearClippedDrift::operator()(const Vector& x) const { return (B_ * x).cwiseMax(-cap_).cwiseMin(cap_); }

void LinearClippedDrift::apply_rows(const Matrix& points, Matrix& out) const {
  out.noalias() = points * B_.transpose();
  out = out.cwiseMax(-cap_).cwiseMin(cap_);
}

Vector LinearClippedDrift::directional(const Vector& x, const Vector& v) const {
  const Vector bx = B_ * x;
  Vector out = B_ * v;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (std::abs(bx(i)) >= cap_) out(i) = 0.0;
  return out;
}

double LinearClippedDrift::sup_norm() const { return cap_ * std::sqrt(static_cast<double>(B_.rows())); }

TanhDrift::TanhDrift(double scale, Matrix B) : scale_(scale), B_(std::move(B)) {
  if (B_.rows() != B_.cols() || B_.rows() < 1) throw ContractViolation("TanhDrift: B must be square");
  if (!B_.allFinite() || !std::isfinite(scale_)) throw InputError("TanhDrift: non-finite parameters");
  norm_ = spectral_norm(B_);
}

Vector TanhDrift::operator()(const Vector& x) const { return scale_ * (B_ * x).array().tanh().matrix(); }

void TanhDrift::apply_rows(const Matrix& points, Matrix& out) const {
  out.noalias() = points * B_.transpose();
  out = scale_ * out.array().tanh();
}

Vector TanhDrift::directional(const Vector& x, const Vector& v) const {
  const Eigen::ArrayXd th = (B_ * x).array().tanh();
  return (scale_ * (1.0 - th.square()) * (B_ * v).array()).matrix();
}

double TanhDrift::sup_norm() const { return std::abs(scale_) * std::sqrt(static_cast<double>(B_.rows())); }

FunctionDrift::FunctionDrift(std::string name, int dim, Field field, double lipschitz,
                             std::optional<Derivative> derivative, double sup_norm)
    : name_(std::move(name)),
      dim_(dim),
      field_(std::move(field)),
      lipschitz_(lipschitz),
      derivative_(std::move(derivative)),
      sup_norm_(sup_norm) {
  if (!field_) throw InputError("FunctionDrift: empty field");
  if (!(lipschitz_ >= 0.0)) throw InputError("FunctionDrift: Lipschitz constant must be >= 0");
}

Vector FunctionDrift::directional(const Vector& x, const Vector& v) const {
  if (derivative_) return (*derivative_)(x, v);
  return Drift::directional(x, v);
}

GalerkinModel::GalerkinModel(LinearOperator A, CovarianceOperator Q, std::shared_ptr<const Drift> drift,
                             std::optional<double> growth_constant, std::optional<double> growth_exponent)
    : A_(std::move(A)), A_adjoint_(A_.adjoint()), Q_(std::move(Q)), drift_(std::move(drift)) {
  const int d = A_.dim();
  if (Q_.dim() != d) throw ContractViolation("GalerkinModel: A and Q dimensions differ");
  if (!drift_) drift_ = std::make_shared<ZeroDrift>(d);
  if (drift_->dim() != d) throw ContractViolation("GalerkinModel: drift dimension differs from A");
  if (d > 64) throw InputError("GalerkinModel: dimension above 64 is not supported");

  M_ = growth_constant.value_or(1.0);
  omega_ = growth_exponent.value_or(A_.log_norm());
  if (!(M_ >= 1.0) || !std::isfinite(M_) || !std::isfinite(omega_))
    throw InputError("GalerkinModel: need finite M >= 1 and finite omega");
  for (int k = 0; k <= 20; ++k) {
    const double t = 0.1 * k;
    const double norm = spectral_norm(expm(A_, t));
    if (norm > M_ * std::exp(omega_ * t) * (1.0 + 1e-10)) {
      std::ostringstream msg;
      msg << "GalerkinModel: ||e^{tA}|| = " << norm << " exceeds M e^{omega t} = " << M_ * std::exp(omega_ * t)
          << " at t = " << t;
      throw InputError(msg.str());
    }
  }

  const Vector f0 = (*drift_)(Vector::Zero(d));
  if (f0.size() != d || !f0.allFinite()) throw InputError("GalerkinModel: F(0) is not finite");
  if (!drift_->is_zero()) {
    NormalStream normals(0x5eedf00dULL, 0);
    Vector x(d), y(d);
    for (int pair = 0; pair < 64; ++pair) {
      normals.fill(x);
      normals.fill(y);
      x *= 2.0;
      y = x + (pair % 2 == 0 ? 1.0 : 1e-3) * y;
      const double gap = (x - y).norm();
      if (gap == 0.0) continue;
      const double ratio = ((*drift_)(x) - (*drift_)(y)).norm() / gap;
      if (ratio > 1.01 * drift_->lipschitz() + 1e-14) {
        std::ostringstream msg;
        msg << "GalerkinModel: empirical Lipschitz ratio " << ratio << " exceeds declared L_F = "
            << drift_->lipschitz();
        throw InputError(msg.str());
      }
    }
  }
}

GalerkinModel GalerkinModel::ou(Matrix A, Matrix Q) {
  const int d = static_cast<int>(A.rows());
  return GalerkinModel(LinearOperator(std::move(A)), CovarianceOperator(std::move(Q)), std::make_shared<ZeroDrift>(d));
}

}  // namespace semilab
