#include "semilab/testfn.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_map>

#include "semilab/errors.hpp"
#include "semilab/quadrature.hpp"
#include "semilab/random.hpp"

namespace semilab {

namespace {

const Vector& atom_frequency(const TestFunction::Atom& atom) {
  return std::visit([](const auto& a) -> const Vector& { return a.h; }, atom);
}

Part atom_part(const TestFunction::Atom& atom) {
  return std::visit([](const auto& a) { return a.part; }, atom);
}

void append_bytes(std::string& key, const void* data, std::size_t size) {
  key.append(static_cast<const char*>(data), size);
}

void check_point(const Vector& x, int dim, const char* where) {
  if (x.size() != dim) throw ContractViolation(std::string(where) + ": dimension mismatch");
  if (!x.allFinite()) throw InputError(std::string(where) + ": non-finite point");
}

bool same_atom(const TestFunction::Atom& lhs, const TestFunction::Atom& rhs) {
  if (lhs.index() != rhs.index()) return false;
  if (const auto* l = std::get_if<CylindricalExp>(&lhs)) {
    const auto& r = std::get<CylindricalExp>(rhs);
    return l->part == r.part && l->h.size() == r.h.size() && l->h == r.h;
  }
  const auto& l = std::get<OUIntegralFunction>(lhs);
  const auto& r = std::get<OUIntegralFunction>(rhs);
  return l.a == r.a && l.part == r.part && l.nodes == r.nodes && l.h.size() == r.h.size() && l.h == r.h;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// TestFunction

TestFunction::TestFunction(Atom atom) {
  const Vector& h = atom_frequency(atom);
  if (h.size() < 1 || !h.allFinite()) throw InputError("TestFunction: frequency must be a finite non-empty vector");
  if (const auto* ou = std::get_if<OUIntegralFunction>(&atom)) {
    if (!(ou->a > 0.0) || !std::isfinite(ou->a)) throw InputError("TestFunction: OU-integral limit a must be > 0");
    if (ou->nodes < 0) throw InputError("TestFunction: node count must be >= 0");
  }
  terms_.push_back({1.0, std::move(atom)});
}

TestFunction TestFunction::constant(double c) {
  if (!std::isfinite(c)) throw InputError("TestFunction: non-finite constant");
  TestFunction f;
  f.constant_ = c;
  return f;
}

TestFunction TestFunction::cylindrical(Vector h, Part part) { return TestFunction(CylindricalExp{std::move(h), part}); }

TestFunction TestFunction::ou_integral(double a, Vector h, Part part, int nodes) {
  return TestFunction(OUIntegralFunction{a, std::move(h), part, nodes});
}

int TestFunction::dim() const {
  return terms_.empty() ? 0 : static_cast<int>(atom_frequency(terms_.front().atom).size());
}

double TestFunction::sup_bound() const {
  double bound = std::abs(constant_);
  for (const auto& term : terms_) {
    const double atom_bound = std::holds_alternative<OUIntegralFunction>(term.atom)
                                  ? std::get<OUIntegralFunction>(term.atom).a
                                  : 1.0;
    bound += std::abs(term.coefficient) * atom_bound;
  }
  return bound;
}

TestFunction& TestFunction::operator+=(const TestFunction& other) {
  if (!terms_.empty() && !other.terms_.empty() && dim() != other.dim())
    throw ContractViolation("TestFunction: cannot add functions of different dimension");
  for (const auto& term : other.terms_) terms_.push_back(term);
  constant_ += other.constant_;
  return *this;
}

TestFunction& TestFunction::operator*=(double scale) {
  if (!std::isfinite(scale)) throw InputError("TestFunction: non-finite coefficient");
  for (auto& term : terms_) term.coefficient *= scale;
  constant_ *= scale;
  return *this;
}

bool operator==(const TestFunction& lhs, const TestFunction& rhs) {
  if (lhs.constant_ != rhs.constant_ || lhs.terms_.size() != rhs.terms_.size()) return false;
  for (std::size_t k = 0; k < lhs.terms_.size(); ++k) {
    if (lhs.terms_[k].coefficient != rhs.terms_[k].coefficient) return false;
    if (!same_atom(lhs.terms_[k].atom, rhs.terms_[k].atom)) return false;
  }
  return true;
}

TestFunction operator+(TestFunction lhs, const TestFunction& rhs) { return lhs += rhs; }
TestFunction operator*(double scale, TestFunction f) { return f *= scale; }

// ---------------------------------------------------------------------------------------------
// ExponentialKernel

Complex ExponentialKernel::value(const Vector& x) const {
  Complex sum = 0.0;
  for (int j = 0; j < nodes(); ++j) {
    const double theta = x.dot(frequencies.col(j));
    sum += amplitudes(j) * Complex(std::cos(theta), std::sin(theta));
  }
  return sum;
}

ComplexVector ExponentialKernel::gradient(const Vector& x) const {
  ComplexVector grad = ComplexVector::Zero(dim());
  for (int j = 0; j < nodes(); ++j) {
    const double theta = x.dot(frequencies.col(j));
    const Complex factor = amplitudes(j) * Complex(-std::sin(theta), std::cos(theta));  // i c e^{i theta}
    grad += factor * frequencies.col(j).cast<Complex>();
  }
  return grad;
}

ComplexMatrix ExponentialKernel::hessian(const Vector& x) const {
  ComplexMatrix hess = ComplexMatrix::Zero(dim(), dim());
  for (int j = 0; j < nodes(); ++j) {
    const double theta = x.dot(frequencies.col(j));
    const Complex factor = -amplitudes(j) * Complex(std::cos(theta), std::sin(theta));
    const Matrix outer = frequencies.col(j) * frequencies.col(j).transpose();
    hess += factor * outer.cast<Complex>();
  }
  return hess;
}

Complex ExponentialKernel::generator(const Vector& x, const Vector& drift) const {
  Complex sum = 0.0;
  for (int j = 0; j < nodes(); ++j) {
    const double theta = x.dot(frequencies.col(j));
    const Complex weight(-0.5 * curvature(j), drift.dot(frequencies.col(j)));
    sum += amplitudes(j) * weight * Complex(std::cos(theta), std::sin(theta));
  }
  return sum;
}

void ExponentialKernel::evaluate(const Matrix& points, ComplexVector& values, const Matrix* drifts,
                                 ComplexVector* generator) const {
  const Eigen::Index n = points.rows();
  const Matrix theta = points * frequencies;
  const Eigen::ArrayXXd cos_theta = theta.array().cos();
  const Eigen::ArrayXXd sin_theta = theta.array().sin();
  const Vector re = cos_theta.matrix() * amplitudes;
  const Vector im = sin_theta.matrix() * amplitudes;
  values.resize(n);
  values.real() = re;
  values.imag() = im;
  if (drifts && generator) {
    const Eigen::ArrayXXd rate = (*drifts * frequencies).array();
    const Vector damped = -0.5 * amplitudes.cwiseProduct(curvature);
    generator->resize(n);
    generator->real() = cos_theta.matrix() * damped - (rate * sin_theta).matrix() * amplitudes;
    generator->imag() = sin_theta.matrix() * damped + (rate * cos_theta).matrix() * amplitudes;
  }
}

void ExponentialKernel::directional(const Matrix& points, const Matrix& directions, ComplexVector& out) const {
  const Matrix theta = points * frequencies;
  const Eigen::ArrayXXd rate = (directions * frequencies).array();
  const Eigen::ArrayXXd cos_theta = theta.array().cos();
  const Eigen::ArrayXXd sin_theta = theta.array().sin();
  // i c <g, v> e^{i theta}
  out.resize(points.rows());
  out.real() = -(rate * sin_theta).matrix() * amplitudes;
  out.imag() = (rate * cos_theta).matrix() * amplitudes;
}

ExponentialKernel ExponentialKernel::ou_transform(const GalerkinModel& model, const Matrix& flow_adjoint,
                                                  const CovarianceOperator& Qt) const {
  ExponentialKernel out;
  out.frequencies = flow_adjoint * frequencies;
  out.amplitudes.resize(nodes());
  out.curvature.resize(nodes());
  for (int j = 0; j < nodes(); ++j) {
    const double variance = Qt.quadratic_form(frequencies.col(j));
    out.amplitudes(j) = amplitudes(j) * std::exp(-0.5 * variance);
    out.curvature(j) = model.Q().quadratic_form(out.frequencies.col(j));
  }
  return out;
}

ExponentialKernel compile_ou_integral(const GalerkinModel& model, double a, const Vector& h, int nodes) {
  if (h.size() != model.dim()) throw ContractViolation("compile_ou_integral: dimension mismatch");
  if (nodes < 1) throw InputError("compile_ou_integral: nodes must be >= 1");
  const QuadratureRule rule = composite_gauss_legendre(0.0, a, 1, nodes);
  const LinearOperator& adjoint = model.A_adjoint();

  ExponentialKernel kernel;
  kernel.frequencies.resize(model.dim(), nodes);
  kernel.amplitudes.resize(nodes);
  kernel.curvature.resize(nodes);

  // <Q_s h, h> accumulated node to node: Q_{s+D} = Q_s + e^{sA} Q_D e^{sA^*}.
  double variance = covariance_Qt(model.A(), model.Q(), rule.nodes[0], 4).quadratic_form(h);
  Vector previous = expm_apply(adjoint, rule.nodes[0], h);
  for (int j = 0; j < nodes; ++j) {
    if (j > 0) {
      const double gap = rule.nodes[j] - rule.nodes[j - 1];
      variance += covariance_Qt(model.A(), model.Q(), gap, 2).quadratic_form(previous);
      previous = expm_apply(adjoint, rule.nodes[j], h);
    }
    kernel.frequencies.col(j) = previous;
    kernel.amplitudes(j) = rule.weights[j] * std::exp(-0.5 * variance);
    kernel.curvature(j) = model.Q().quadratic_form(previous);
  }
  return kernel;
}

int select_ou_integral_nodes(const GalerkinModel& model, double a, const Vector& h, double tolerance,
                             double probe_radius) {
  const int d = model.dim();
  std::vector<Vector> probes{Vector::Zero(d)};
  NormalStream normals(0x9e0be5ULL, 0);
  for (int k = 0; k < 4; ++k) {
    Vector direction(d);
    normals.fill(direction);
    probes.push_back(probe_radius * direction.normalized());
  }
  constexpr int kMaxNodes = 1024;
  int n = 8;
  ExponentialKernel coarse = compile_ou_integral(model, a, h, n);
  while (n < kMaxNodes) {
    ExponentialKernel fine = compile_ou_integral(model, a, h, 2 * n);
    double delta = 0.0;
    for (const auto& x : probes) delta = std::max(delta, std::abs(fine.value(x) - coarse.value(x)));
    if (delta < tolerance) return n;
    n *= 2;
    coarse = std::move(fine);
  }
  return kMaxNodes;
}

// ---------------------------------------------------------------------------------------------
// BoundTestFunction

BoundTestFunction::BoundTestFunction(int dim, std::vector<Term> terms, double constant)
    : dim_(dim), terms_(std::move(terms)), constant_(constant) {}

double BoundTestFunction::sup_bound() const {
  double bound = std::abs(constant_);
  for (const auto& term : terms_) bound += std::abs(term.coefficient) * term.kernel->amplitude_sum();
  return bound;
}

double BoundTestFunction::eval(const Vector& x) const {
  if (terms_.empty()) return constant_;
  check_point(x, dim_, "eval");
  double sum = constant_;
  for (const auto& term : terms_) sum += term.coefficient * take_part(term.kernel->value(x), term.part);
  return sum;
}

namespace {

template <typename Derived>
Eigen::Matrix<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime> real_part(
    const Eigen::MatrixBase<Derived>& z, Part part) {
  if (part == Part::Real) return z.real();
  return z.imag();
}

}  // namespace

Vector BoundTestFunction::gradient(const Vector& x) const {
  if (terms_.empty()) return Vector::Zero(x.size());
  check_point(x, dim_, "gradient");
  Vector grad = Vector::Zero(dim_);
  for (const auto& term : terms_) {
    const ComplexVector g = term.kernel->gradient(x);
    grad += term.coefficient * real_part(g, term.part);
  }
  return grad;
}

Matrix BoundTestFunction::hessian(const Vector& x) const {
  if (terms_.empty()) return Matrix::Zero(x.size(), x.size());
  check_point(x, dim_, "hessian");
  Matrix hess = Matrix::Zero(dim_, dim_);
  for (const auto& term : terms_) {
    const ComplexMatrix H = term.kernel->hessian(x);
    hess += term.coefficient * real_part(H, term.part);
  }
  return hess;
}

double BoundTestFunction::kolmogorov(const GalerkinModel& model, const Vector& x) const {
  if (terms_.empty()) return 0.0;
  check_point(x, dim_, "kolmogorov_apply");
  if (model.dim() != dim_) throw ContractViolation("kolmogorov_apply: model dimension mismatch");
  const Matrix hess = hessian(x);
  const Vector grad = gradient(x);
  double value = 0.5 * (model.Q().matrix() * hess).trace() + (model.A().matrix() * x).dot(grad);
  if (!model.drift().is_zero()) {
    const Vector f = model.drift()(x);
    if (!f.allFinite()) throw InputError("kolmogorov_apply: F(x) is not finite");
    value += grad.dot(f);
  }
  return value;
}

void BoundTestFunction::eval_varying(const Matrix& points, Vector& out) const {
  out = Vector::Zero(points.rows());
  if (terms_.empty()) return;
  if (points.cols() != dim_) throw ContractViolation("eval: dimension mismatch");
  std::unordered_map<const ExponentialKernel*, ComplexVector> values;
  for (const auto& term : terms_) {
    auto [it, inserted] = values.try_emplace(term.kernel.get());
    if (inserted) term.kernel->evaluate(points, it->second);
    out += term.coefficient * real_part(it->second, term.part);
  }
}

void BoundTestFunction::directional_batch(const Matrix& points, const Matrix& directions, Vector& out) const {
  out = Vector::Zero(points.rows());
  if (terms_.empty()) return;
  if (points.cols() != dim_ || directions.cols() != dim_ || directions.rows() != points.rows())
    throw ContractViolation("directional_batch: shape mismatch");
  std::unordered_map<const ExponentialKernel*, ComplexVector> values;
  for (const auto& term : terms_) {
    auto [it, inserted] = values.try_emplace(term.kernel.get());
    if (inserted) term.kernel->directional(points, directions, it->second);
    out += term.coefficient * real_part(it->second, term.part);
  }
}

BoundTestFunction BoundTestFunction::ou_transform(const GalerkinModel& model, double t) const {
  if (!std::isfinite(t) || t < 0.0) throw InputError("ou_transform: t must be finite and >= 0");
  if (terms_.empty() || t == 0.0) return *this;
  const Matrix flow_adjoint = expm(model.A_adjoint(), t);
  const CovarianceOperator Qt = model.covariance(t);
  std::unordered_map<const ExponentialKernel*, std::shared_ptr<const ExponentialKernel>> moved;
  std::vector<Term> terms;
  for (const auto& term : terms_) {
    auto& slot = moved[term.kernel.get()];
    if (!slot) slot = std::make_shared<const ExponentialKernel>(term.kernel->ou_transform(model, flow_adjoint, Qt));
    terms.push_back({term.coefficient, term.part, slot});
  }
  return BoundTestFunction(dim_, std::move(terms), constant_);
}

// ---------------------------------------------------------------------------------------------
// Binding

std::shared_ptr<const ExponentialKernel> KernelBinder::kernel(const TestFunction::Atom& atom) {
  const Vector& h = atom_frequency(atom);
  if (h.size() != model_.dim()) throw ContractViolation("bind: frequency dimension differs from the model");
  std::string key;
  if (const auto* ou = std::get_if<OUIntegralFunction>(&atom)) {
    key = "o";
    append_bytes(key, &ou->a, sizeof(double));
    append_bytes(key, &ou->nodes, sizeof(int));
  } else {
    key = "c";
  }
  append_bytes(key, h.data(), sizeof(double) * static_cast<std::size_t>(h.size()));

  auto& slot = cache_[key];
  if (slot) return slot;
  if (const auto* ou = std::get_if<OUIntegralFunction>(&atom)) {
    const int n = ou->nodes > 0 ? ou->nodes : select_ou_integral_nodes(model_, ou->a, h);
    slot = std::make_shared<const ExponentialKernel>(compile_ou_integral(model_, ou->a, h, n));
  } else {
    ExponentialKernel k;
    k.frequencies = h;
    k.amplitudes = Vector::Ones(1);
    k.curvature = Vector::Constant(1, model_.Q().quadratic_form(h));
    slot = std::make_shared<const ExponentialKernel>(std::move(k));
  }
  return slot;
}

BoundTestFunction KernelBinder::bind(const TestFunction& f) {
  std::vector<BoundTestFunction::Term> terms;
  for (const auto& term : f.terms()) terms.push_back({term.coefficient, atom_part(term.atom), kernel(term.atom)});
  return BoundTestFunction(model_.dim(), std::move(terms), f.constant_term());
}

BoundTestFunction bind(const TestFunction& f, const GalerkinModel& model) { return KernelBinder(model).bind(f); }

double eval(const TestFunction& f, const GalerkinModel& model, const Vector& x) { return bind(f, model).eval(x); }

Vector gradient(const TestFunction& f, const GalerkinModel& model, const Vector& x) {
  return bind(f, model).gradient(x);
}

Matrix hessian(const TestFunction& f, const GalerkinModel& model, const Vector& x) {
  return bind(f, model).hessian(x);
}

double kolmogorov_apply(const TestFunction& f, const GalerkinModel& model, const Vector& x) {
  return bind(f, model).kolmogorov(model, x);
}

std::vector<TestFunction> default_bank(int dim, std::uint64_t seed) {
  if (dim < 1) throw InputError("default_bank: dim must be >= 1");
  NormalStream normals(seed, 0);
  std::vector<Vector> frequencies;
  for (int k = 0; k < 4; ++k) {
    Vector h(dim);
    normals.fill(h);
    const double radius = 0.25 + 0.5 * normals.engine().uniform();
    frequencies.push_back(radius * h.normalized());
  }
  std::vector<TestFunction> bank;
  for (double a : {0.5, 1.0})
    for (const auto& h : frequencies)
      for (Part part : {Part::Real, Part::Imag}) bank.push_back(TestFunction::ou_integral(a, h, part));
  return bank;
}

}  // namespace semilab
