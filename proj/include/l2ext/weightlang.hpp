#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "l2ext/error.hpp"

namespace l2ext {

// ---------------------------------------------------------------------------
// Expression language
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | base ('^' int)?
//   base   := number | 'i' | var | fn '(' expr ')' | '(' expr ')'
//   var    := z | z1 | z2 | tau
//   fn     := re | im | abs2 | exp | log | conj
// ---------------------------------------------------------------------------

enum class Var { Z, Z1, Z2, Tau };
enum class Func { Re, Im, Abs2, Exp, Log, Conj };
enum class BinOp { Add, Sub, Mul, Div };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  enum class Kind { Number, ImagUnit, Variable, Call, Binary, Negate, Power };
  Kind kind;
  double number = 0.0;
  Var var = Var::Z;
  Func func = Func::Re;
  BinOp op = BinOp::Add;
  int exponent = 0;
  ExprPtr lhs;  // operand for Call / Negate / Power
  ExprPtr rhs;
};

bool same_ast(const ExprNode& a, const ExprNode& b);

constexpr int kMaxExprDepth = 64;
constexpr std::size_t kMaxExprBytes = 64 * 1024;

/// Parsed weight expression with a compiled stack program for evaluation.
class WeightExpr {
 public:
  WeightExpr() = default;

  const ExprNode& root() const { return *root_; }
  /// Canonical text; parse(print()) reproduces the same AST.
  std::string print() const;
  /// Variables referenced, in Var order, without duplicates.
  const std::vector<Var>& variables() const { return vars_; }

  /// Evaluates with `slots[k]` bound to the value of the variable mapped to
  /// slot k by `bind` (see WeightField for the binding conventions).
  cplx eval(std::span<const cplx> slots) const;
  void bind(const std::array<int, 4>& slot_of_var);

 private:
  friend WeightExpr parse_weight(std::string_view);

  struct Instr {
    enum class Op { Const, Load, Add, Sub, Mul, Div, Neg, Pow, Re, Im, Abs2, Exp, Log, Conj };
    Op op;
    cplx value{};
    int arg = 0;
  };
  void compile(const ExprNode& node);

  ExprPtr root_;
  std::vector<Var> vars_;
  std::vector<Instr> code_;
  int max_stack_ = 0;
};

WeightExpr parse_weight(std::string_view text);

// ---------------------------------------------------------------------------
// Weight fields
// ---------------------------------------------------------------------------

/// Free variables a weight is a function of. Points are passed in slot
/// order: Z -> (z), Z1Z2 -> (z1, z2), TauZ -> (tau, z).
enum class Binding { Z, Z1Z2, TauZ };

constexpr double kImaginaryResidueTolerance = 1e-10;

class WeightField {
 public:
  class Impl;

  WeightField();  // zero weight in z

  static WeightField zero(Binding binding = Binding::Z);
  /// lambda |z - center|^2; lambda may be negative.
  static WeightField gaussian(double lambda, cplx center = 0.0);
  /// 2 Re(sum_k c_k z^k); c_k indexed by power starting at k = 0.
  static WeightField harmonic_re_poly(std::vector<cplx> coefficients);
  /// Binding inferred from the variables when not given: z1/z2 -> Z1Z2,
  /// tau -> TauZ, otherwise Z.
  static WeightField expression(const WeightExpr& expr, std::optional<Binding> binding = {});
  static WeightField expression(std::string_view text, std::optional<Binding> binding = {});
  /// Externally computed weight (e.g. a fiber integral). `zzbar` supplies an
  /// exact phi_{z zbar} when known.
  static WeightField custom(std::function<double(std::span<const cplx>)> fn, Binding binding,
                            std::string description,
                            std::function<double(cplx)> zzbar = nullptr);

  /// m * phi.
  WeightField scaled(double m) const;
  /// phi + c.
  WeightField shifted(double c) const;

  Binding binding() const;
  int arity() const { return binding() == Binding::Z ? 1 : 2; }

  /// Real value at a point. Raises NotAWeight when the imaginary residue
  /// exceeds 1e-10 (1 + |re|) and NumericalEvaluation on non-finite values.
  double eval(std::span<const cplx> point) const;
  double operator()(cplx z) const { return eval(std::span<const cplx>(&z, 1)); }
  double operator()(cplx u, cplx v) const {
    const cplx p[2] = {u, v};
    return eval(p);
  }

  /// Exact phi_{z zbar} for families that carry one (single variable only).
  std::optional<double> exact_zzbar(cplx z) const;

  /// Text form: CLI shorthand for families, expression text otherwise.
  std::string describe() const;

 private:
  explicit WeightField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

double eval_weight(const WeightField& w, std::span<const cplx> point);

// ---------------------------------------------------------------------------
// Hermitian metric fields. Storage convention: |s|_h^2 = s^H H s.
// ---------------------------------------------------------------------------

class MetricField {
 public:
  /// `upper` lists the entries e_{ij}, i <= j, row-major; the lower
  /// triangle is conj-mirrored. Expressions are in the variable z.
  static MetricField from_entries(int rank, const std::vector<std::string>& upper);
  static MetricField constant(const Eigen::MatrixXcd& H);

  int rank() const { return rank_; }

  /// H(z), Hermitian by construction and checked positive definite
  /// (MetricNotPositive otherwise).
  Eigen::MatrixXcd eval(cplx z) const;
  /// H(z) without the positivity check.
  Eigen::MatrixXcd eval_unchecked(cplx z) const;

  /// Metric with entries Q^H H(z) Q for a constant matrix Q.
  MetricField congruent(const Eigen::MatrixXcd& Q) const;

  /// "metric:[[e11,e12],[.,e22]]"
  std::string describe() const;

 private:
  int rank_ = 0;
  std::vector<std::string> texts_;  // upper triangle, row-major
  std::vector<WeightExpr> exprs_;
};

Eigen::MatrixXcd eval_metric(const MetricField& m, cplx z);

// ---------------------------------------------------------------------------
// Wirtinger finite differences
// ---------------------------------------------------------------------------

struct WirtingerOrder {
  int p = 0;  // d/dz count
  int q = 0;  // d/dzbar count
};

/// Default step 1e-3 * max(1, |z|).
double default_fd_step(cplx z);

namespace detail {

template <class V>
bool all_finite(const V& v) {
  if constexpr (std::is_arithmetic_v<V>) {
    return std::isfinite(v);
  } else if constexpr (std::is_same_v<V, cplx>) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  } else {
    return v.allFinite();
  }
}

template <class F>
auto wirtinger_stencil(const F& f, cplx z, WirtingerOrder order, double h) {
  using Raw = std::decay_t<decltype(f(z))>;
  auto at = [&](cplx p) {
    auto v = f(p);
    if (!all_finite(v)) {
      throw Error(ErrorKind::NumericalEvaluation,
                  "non-finite value in finite-difference stencil at " + format_complex(p));
    }
    if constexpr (std::is_arithmetic_v<Raw>) {
      return cplx(v);
    } else if constexpr (std::is_same_v<Raw, cplx>) {
      return v;
    } else {
      return Eigen::MatrixXcd(v.template cast<cplx>());
    }
  };
  using V = decltype(at(z));
  const cplx I(0.0, 1.0);
  const cplx dx(h, 0.0);
  const cplx dy(0.0, h);
  const V c = at(z);
  if (order.p + order.q == 0) return c;
  if (order.p + order.q == 1) {
    const V fx = (at(z + dx) - at(z - dx)) / (2.0 * h);
    const V fy = (at(z + dy) - at(z - dy)) / (2.0 * h);
    if (order.p == 1) return V((fx - I * fy) * 0.5);
    return V((fx + I * fy) * 0.5);
  }
  const V fxx = (at(z + dx) - 2.0 * c + at(z - dx)) / (h * h);
  const V fyy = (at(z + dy) - 2.0 * c + at(z - dy)) / (h * h);
  if (order.p == 1 && order.q == 1) return V((fxx + fyy) * 0.25);
  const V fxy =
      (at(z + dx + dy) - at(z + dx - dy) - at(z - dx + dy) + at(z - dx - dy)) / (4.0 * h * h);
  if (order.p == 2) return V((fxx - fyy - 2.0 * I * fxy) * 0.25);
  return V((fxx - fyy + 2.0 * I * fxy) * 0.25);
}

}  // namespace detail

/// Central-difference Wirtinger derivative d^p/dz^p d^q/dzbar^q, p + q <= 2,
/// with one Richardson level (steps h and h/2). Works for real, complex and
/// matrix-valued fields; the result is complex (or a complex matrix).
template <class F>
auto wirtinger_fd(const F& f, cplx z, WirtingerOrder order, std::optional<double> step = {}) {
  if (order.p < 0 || order.q < 0 || order.p + order.q > 2) {
    throw Error(ErrorKind::InvalidParameter, "wirtinger_fd: order must satisfy p + q <= 2");
  }
  const double h = step.value_or(default_fd_step(z));
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidParameter, "wirtinger_fd: step must be positive");
  const auto coarse = detail::wirtinger_stencil(f, z, order, h);
  if (order.p + order.q == 0) return coarse;
  const auto fine = detail::wirtinger_stencil(f, z, order, 0.5 * h);
  return decltype(coarse)((4.0 * fine - coarse) / 3.0);
}

/// d/dz_j d/dzbar_k of a function of two complex variables (j, k in {0, 1}),
/// central differences with one Richardson level.
cplx wirtinger_mixed(const std::function<cplx(cplx, cplx)>& f, cplx z1, cplx z2, int j, int k,
                     std::optional<double> step = {});

}  // namespace l2ext
