#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "l2ext/quadrature.hpp"
#include "l2ext/weightlang.hpp"

namespace l2ext {

enum class BasisKind { Line, Vector, Cylinder };

/// Systems whose factorization-based condition estimate exceeds this are
/// rejected as ill-conditioned.
constexpr double kMaxCondition = 1e12;

/// Weighted Gram system over a truncated monomial basis.
///
/// The basis is radius-scaled: u^k with u = (z - a)/r for discs (times e_l
/// for bundles of rank rho, ordered degree-major), and (w1/r)^j (w2/s)^k with
/// w = A^H (z - a) for cylinders (ordered j-major). gram(j, k) = <b_j, b_k> =
/// sum_nodes b_j conj(b_k) e^{-(phi - log_shift)}; the shift keeps entries
/// O(1) and is undone when norms are reported.
struct GramSystem {
  BasisKind kind = BasisKind::Line;
  int degree = 0;
  int rank = 1;
  Region region;
  double log_shift = 0.0;
  /// (degree, component) for Line/Vector, (j, k) bidegree for Cylinder.
  std::vector<std::array<int, 2>> basis;
  Eigen::MatrixXcd gram;
  /// M x rho; column l picks the coefficient of the constant term in e_l.
  Eigen::MatrixXcd constraint;
  double condition = 1.0;

  Eigen::Index size() const { return gram.rows(); }
};

struct ExtensionResult {
  /// Coefficients in the unscaled basis: (z - a)^k e_l, or w1^j w2^k.
  Eigen::VectorXcd coefficients;
  double min_norm = 0.0;
  /// K(a) for scalar problems with unit target; 0 otherwise.
  double kernel_value = 0.0;
  int degree = 0;
  bool converged = false;
  double condition = 1.0;
  /// Minimum norm at degree N - 2 (NaN when N < 2), for diagnostics.
  double previous_min_norm = 0.0;
};

GramSystem gram_line(const QuadratureRule& rule, const WeightField& w, cplx a, int degree);
GramSystem gram_vector(const QuadratureRule& rule, const MetricField& m, cplx a, int degree);
GramSystem gram_cylinder(const QuadratureRule& rule, const WeightField& w, Point a, int degree);

/// Minimizes the norm of sum_k c_k b_k subject to the point constraint
/// (value at the center equals `target`). Convergence compares with the
/// same problem restricted to degree N - 2.
ExtensionResult min_norm_solve(const GramSystem& sys, const Eigen::VectorXcd& target);

/// Norm of sum_k c_k b_k in true units, with c in the unscaled basis.
double extension_norm(const GramSystem& sys, const Eigen::VectorXcd& coefficients);

/// ||c + d||^2 - ||c||^2 evaluated as 2 Re<d, c> + ||d||^2 (true units), with
/// both vectors in the unscaled basis.
double norm_increase(const GramSystem& sys, const Eigen::VectorXcd& coefficients,
                     const Eigen::VectorXcd& direction);

}  // namespace l2ext
