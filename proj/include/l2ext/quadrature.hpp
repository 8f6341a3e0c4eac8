#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "l2ext/error.hpp"

namespace l2ext {

/// Point of C^1 or C^2. For discs only z[0] is meaningful.
using Point = std::array<cplx, 2>;

struct Resolution {
  int n_rad = 64;
  int n_ang = 128;
  bool operator==(const Resolution&) const = default;
};

enum class RegionKind { Disc, Cylinder };

/// A disc D(a; r) or an n = 2 holomorphic cylinder a + A(D_r x D_s).
struct Region {
  RegionKind kind = RegionKind::Disc;
  Point center{};
  double r = 1.0;
  double s = 0.0;
  Eigen::Matrix2cd unitary = Eigen::Matrix2cd::Identity();
  std::optional<double> domain_radius;

  static Region disc(cplx a, double r, std::optional<double> domain_radius = {});
  static Region cylinder(Point a, double r, double s, const Eigen::Matrix2cd& A,
                         std::optional<double> domain_radius = {});

  /// Lebesgue area (disc) or volume (cylinder).
  double measure() const;
  /// Throws InvalidParameter / RegionOutsideDomain when an invariant fails.
  void validate() const;
};

/// Gauss-Legendre nodes and weights on [lo, hi].
void gauss_legendre(int n, double lo, double hi, std::vector<double>& nodes,
                    std::vector<double>& weights);

/// Max-abs deviation of A^H A from the identity.
double unitarity_defect(const Eigen::Matrix2cd& A);

/// Polar product rule: Gauss-Legendre in radius (Jacobian folded into the
/// weights) times the equispaced rule in angle. Nodes are radial-major.
/// A cylinder rule is the tensor product of two such factors mapped through
/// w -> a + A w; product nodes are generated on demand, factor-1 major.
class QuadratureRule {
 public:
  QuadratureRule() = default;

  const Region& region() const { return region_; }
  Resolution resolution() const { return resolution_; }
  int dimension() const { return region_.kind == RegionKind::Disc ? 1 : 2; }
  std::size_t size() const;

  Point node(std::size_t i) const;
  /// Pre-image of node(i) in the local frame: z - a for discs,
  /// w = A^H (z - a) for cylinders.
  Point local(std::size_t i) const;
  double weight(std::size_t i) const;

  /// Per-factor local nodes (centered, unrotated) and weights.
  std::span<const cplx> factor_nodes(int factor) const { return factor_nodes_[factor]; }
  std::span<const double> factor_weights(int factor) const { return factor_weights_[factor]; }

 private:
  friend QuadratureRule disc_rule(cplx, double, int, int);
  friend QuadratureRule cylinder_rule(Point, double, double, const Eigen::Matrix2cd&, int, int);

  Region region_;
  Resolution resolution_;
  std::array<std::vector<cplx>, 2> factor_nodes_;
  std::array<std::vector<double>, 2> factor_weights_;
};

QuadratureRule disc_rule(cplx a, double r, int n_rad, int n_ang);
QuadratureRule cylinder_rule(Point a, double r, double s, const Eigen::Matrix2cd& A, int n_rad,
                             int n_ang);

using ScalarField = std::function<cplx(const Point&)>;

/// Compensated serial sum of weight * f(node) in node order. A non-finite
/// field value raises NumericalEvaluation naming the node.
cplx integrate(const QuadratureRule& rule, const ScalarField& f);

/// Sum of the rule's weights, compensated.
double weight_sum(const QuadratureRule& rule);

}  // namespace l2ext
