#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "semilab/linalg.hpp"
#include "semilab/model.hpp"

namespace semilab {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

enum class Part { Real, Imag };

inline double take_part(Complex z, Part part) { return part == Part::Real ? z.real() : z.imag(); }

/// x -> Re / Im e^{i<x,h>}.
struct CylindricalExp {
  Vector h;
  Part part = Part::Real;
};

/// x -> Re / Im \int_0^a exp(i<e^{sA}x, h> - <Q_s h, h>/2) ds.
/// `nodes` fixes the Gauss–Legendre node count; 0 selects it adaptively when bound to a model.
struct OUIntegralFunction {
  double a = 1.0;
  Vector h;
  Part part = Part::Real;
  int nodes = 0;
};

/// Finite real linear combination of cylindrical exponentials and OU-integral functions plus a
/// constant. Model independent; bind() turns it into something that can be evaluated.
class TestFunction {
 public:
  using Atom = std::variant<CylindricalExp, OUIntegralFunction>;
  struct Term {
    double coefficient = 1.0;
    Atom atom;
  };

  TestFunction() = default;
  TestFunction(Atom atom);  // NOLINT(google-explicit-constructor)

  static TestFunction constant(double c);
  static TestFunction cylindrical(Vector h, Part part = Part::Real);
  static TestFunction ou_integral(double a, Vector h, Part part = Part::Real, int nodes = 0);

  const std::vector<Term>& terms() const { return terms_; }
  double constant_term() const { return constant_; }
  bool is_constant() const { return terms_.empty(); }

  /// Dimension of the frequencies, or 0 for a constant.
  int dim() const;

  /// Upper bound on the sup norm: sum |coefficient| * (1 or a) + |constant|.
  double sup_bound() const;

  TestFunction& operator+=(const TestFunction& other);
  TestFunction& operator*=(double scale);

  friend bool operator==(const TestFunction& lhs, const TestFunction& rhs);

 private:
  std::vector<Term> terms_;
  double constant_ = 0.0;
};

TestFunction operator+(TestFunction lhs, const TestFunction& rhs);
TestFunction operator*(double scale, TestFunction f);

/// phi(x) = sum_j c_j e^{i<x, g_j>} with precomputed curvatures <Q g_j, g_j>.
///
/// Every function in the bank reduces to this form: a cylindrical exponential has one node, an
/// OU-integral function has one node per quadrature point, and the exact OU semigroup maps the
/// form to itself.
struct ExponentialKernel {
  Matrix frequencies;  // d x J, column j is g_j
  Vector amplitudes;   // c_j
  Vector curvature;    // <Q g_j, g_j>

  int dim() const { return static_cast<int>(frequencies.rows()); }
  int nodes() const { return static_cast<int>(frequencies.cols()); }

  Complex value(const Vector& x) const;
  ComplexVector gradient(const Vector& x) const;
  ComplexMatrix hessian(const Vector& x) const;
  /// (1/2) Tr[Q D^2 phi] + <drift, D phi> with drift = Ax + F(x).
  Complex generator(const Vector& x, const Vector& drift) const;

  /// Row-wise values (and optionally generator values) on an n x d block of points;
  /// `drifts` holds Ax + F(x) row-wise.
  void evaluate(const Matrix& points, ComplexVector& values, const Matrix* drifts = nullptr,
                ComplexVector* generator = nullptr) const;

  /// Row-wise <D phi(x_i), v_i> for points x_i and directions v_i (both n x d).
  void directional(const Matrix& points, const Matrix& directions, ComplexVector& out) const;

  /// The kernel of R_t phi: g -> e^{tA^*} g, c -> c exp(-<Q_t g, g>/2).
  ExponentialKernel ou_transform(const GalerkinModel& model, const Matrix& flow_adjoint,
                                 const CovarianceOperator& Qt) const;

  double amplitude_sum() const { return amplitudes.cwiseAbs().sum(); }
};

/// Builds the kernel of an OU-integral function with a fixed node count.
ExponentialKernel compile_ou_integral(const GalerkinModel& model, double a, const Vector& h, int nodes);

/// Smallest node count n in 8, 16, ..., 1024 whose doubling changes the value by less than
/// `tolerance` at x = 0 and at seeded probe points of norm `probe_radius`.
int select_ou_integral_nodes(const GalerkinModel& model, double a, const Vector& h, double tolerance = 1e-10,
                             double probe_radius = 4.0);

/// A test function compiled against one model.
class BoundTestFunction {
 public:
  struct Term {
    double coefficient = 1.0;
    Part part = Part::Real;
    std::shared_ptr<const ExponentialKernel> kernel;
  };

  BoundTestFunction(int dim, std::vector<Term> terms, double constant);

  int dim() const { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }
  double constant_term() const { return constant_; }
  bool is_constant() const { return terms_.empty(); }
  double sup_bound() const;

  double eval(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  Matrix hessian(const Vector& x) const;
  /// K_0 phi(x) = (1/2) Tr[Q D^2 phi(x)] + <Ax, D phi(x)> + <D phi(x), F(x)>.
  double kolmogorov(const GalerkinModel& model, const Vector& x) const;

  /// phi minus its constant term on each row of `points`. Reducing sums of these and adding the
  /// constant afterwards keeps constant functions exact under averaging.
  void eval_varying(const Matrix& points, Vector& out) const;

  /// Row-wise <D phi(x_i), v_i>.
  void directional_batch(const Matrix& points, const Matrix& directions, Vector& out) const;

  /// Exact R_t phi for the OU part of `model` (F is ignored).
  BoundTestFunction ou_transform(const GalerkinModel& model, double t) const;

 private:
  int dim_;
  std::vector<Term> terms_;
  double constant_;
};

/// Compiles test functions for one model, sharing kernels between functions that differ only
/// in their coefficient or real/imaginary part.
class KernelBinder {
 public:
  explicit KernelBinder(const GalerkinModel& model) : model_(model) {}

  BoundTestFunction bind(const TestFunction& f);
  std::shared_ptr<const ExponentialKernel> kernel(const TestFunction::Atom& atom);

 private:
  const GalerkinModel& model_;
  std::map<std::string, std::shared_ptr<const ExponentialKernel>> cache_;
};

BoundTestFunction bind(const TestFunction& f, const GalerkinModel& model);

double eval(const TestFunction& f, const GalerkinModel& model, const Vector& x);
Vector gradient(const TestFunction& f, const GalerkinModel& model, const Vector& x);
Matrix hessian(const TestFunction& f, const GalerkinModel& model, const Vector& x);
double kolmogorov_apply(const TestFunction& f, const GalerkinModel& model, const Vector& x);

/// 16 OU-integral functions: a in {0.5, 1}, four seeded frequencies with |h| in [0.25, 0.75],
/// real and imaginary parts.
std::vector<TestFunction> default_bank(int dim, std::uint64_t seed = 0x1A2B3C4DULL);

}  // namespace semilab
