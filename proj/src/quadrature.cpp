#include "l2ext/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "l2ext/numeric.hpp"

namespace l2ext {

namespace {

constexpr double kUnitaryTolerance = 1e-12;

void check_counts(double r, int n_rad, int n_ang, const char* what) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw Error(ErrorKind::InvalidParameter,
                std::string(what) + ": radius must be positive, got " + std::to_string(r));
  }
  if (n_rad < 2 || n_ang < 4) {
    throw Error(ErrorKind::InvalidParameter,
                std::string(what) + ": need n_rad >= 2 and n_ang >= 4, got " +
                    std::to_string(n_rad) + "x" + std::to_string(n_ang));
  }
}

void polar_factor(double r, int n_rad, int n_ang, std::vector<cplx>& nodes,
                  std::vector<double>& weights) {
  std::vector<double> rho;
  std::vector<double> w_rho;
  gauss_legendre(n_rad, 0.0, r, rho, w_rho);
  const double dtheta = 2.0 * std::numbers::pi / n_ang;
  nodes.clear();
  weights.clear();
  nodes.reserve(static_cast<std::size_t>(n_rad) * n_ang);
  weights.reserve(static_cast<std::size_t>(n_rad) * n_ang);
  for (int i = 0; i < n_rad; ++i) {
    for (int j = 0; j < n_ang; ++j) {
      const double theta = dtheta * j;
      nodes.push_back(std::polar(rho[i], theta));
      weights.push_back(w_rho[i] * rho[i] * dtheta);
    }
  }
}

}  // namespace

Region Region::disc(cplx a, double r, std::optional<double> domain_radius) {
  Region g;
  g.kind = RegionKind::Disc;
  g.center = {a, 0.0};
  g.r = r;
  g.domain_radius = domain_radius;
  return g;
}

Region Region::cylinder(Point a, double r, double s, const Eigen::Matrix2cd& A,
                        std::optional<double> domain_radius) {
  Region g;
  g.kind = RegionKind::Cylinder;
  g.center = a;
  g.r = r;
  g.s = s;
  g.unitary = A;
  g.domain_radius = domain_radius;
  return g;
}

double Region::measure() const {
  constexpr double pi = std::numbers::pi;
  if (kind == RegionKind::Disc) return pi * r * r;
  return pi * pi * r * r * s * s;
}

void Region::validate() const {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw Error(ErrorKind::InvalidParameter, "region radius must be positive");
  }
  if (kind == RegionKind::Cylinder) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error(ErrorKind::InvalidParameter, "cylinder radius s must be positive");
    }
    if (unitarity_defect(unitary) > kUnitaryTolerance) {
      throw Error(ErrorKind::InvalidParameter, "cylinder matrix A is not unitary");
    }
  }
  if (domain_radius) {
    // Sufficient containment test: the farthest point of a + A(D_r x D_s)
    // from a lies at distance sqrt(r^2 + s^2).
    const double reach = kind == RegionKind::Disc
                             ? std::abs(center[0]) + r
                             : std::hypot(std::abs(center[0]), std::abs(center[1])) +
                                   std::hypot(r, s);
    if (reach > *domain_radius) {
      throw Error(ErrorKind::RegionOutsideDomain,
                  "region reaches " + std::to_string(reach) + " beyond domain radius " +
                      std::to_string(*domain_radius));
    }
  }
}

void gauss_legendre(int n, double lo, double hi, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  const double mid = 0.5 * (hi + lo);
  const double half = 0.5 * (hi - lo);
  for (int i = 1; i <= m; ++i) {
    double x = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * x * p2 - (j - 1.0) * p3) / j;
      }
      dp = n * (x * p1 - p2) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) <= 1e-16) break;
    }
    // Final derivative at the converged root.
    double p1 = 1.0;
    double p2 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * j - 1.0) * x * p2 - (j - 1.0) * p3) / j;
    }
    dp = n * (x * p1 - p2) / (x * x - 1.0);
    nodes[i - 1] = mid - half * x;
    nodes[n - i] = mid + half * x;
    weights[i - 1] = 2.0 * half / ((1.0 - x * x) * dp * dp);
    weights[n - i] = weights[i - 1];
  }
}

double unitarity_defect(const Eigen::Matrix2cd& A) {
  return (A.adjoint() * A - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff();
}

std::size_t QuadratureRule::size() const {
  if (region_.kind == RegionKind::Disc) return factor_nodes_[0].size();
  return factor_nodes_[0].size() * factor_nodes_[1].size();
}

Point QuadratureRule::local(std::size_t i) const {
  if (region_.kind == RegionKind::Disc) return {factor_nodes_[0][i], 0.0};
  const std::size_t q = factor_nodes_[1].size();
  return {factor_nodes_[0][i / q], factor_nodes_[1][i % q]};
}

Point QuadratureRule::node(std::size_t i) const {
  const Point w = local(i);
  if (region_.kind == RegionKind::Disc) return {region_.center[0] + w[0], 0.0};
  const Eigen::Matrix2cd& A = region_.unitary;
  return {region_.center[0] + A(0, 0) * w[0] + A(0, 1) * w[1],
          region_.center[1] + A(1, 0) * w[0] + A(1, 1) * w[1]};
}

double QuadratureRule::weight(std::size_t i) const {
  if (region_.kind == RegionKind::Disc) return factor_weights_[0][i];
  const std::size_t q = factor_weights_[1].size();
  return factor_weights_[0][i / q] * factor_weights_[1][i % q];
}

QuadratureRule disc_rule(cplx a, double r, int n_rad, int n_ang) {
  check_counts(r, n_rad, n_ang, "disc_rule");
  QuadratureRule rule;
  rule.region_ = Region::disc(a, r);
  rule.resolution_ = {n_rad, n_ang};
  polar_factor(r, n_rad, n_ang, rule.factor_nodes_[0], rule.factor_weights_[0]);
  return rule;
}

QuadratureRule cylinder_rule(Point a, double r, double s, const Eigen::Matrix2cd& A, int n_rad,
                             int n_ang) {
  check_counts(r, n_rad, n_ang, "cylinder_rule");
  check_counts(s, n_rad, n_ang, "cylinder_rule");
  if (unitarity_defect(A) > kUnitaryTolerance) {
    throw Error(ErrorKind::InvalidParameter, "cylinder_rule: A is not unitary");
  }
  QuadratureRule rule;
  rule.region_ = Region::cylinder(a, r, s, A);
  rule.resolution_ = {n_rad, n_ang};
  polar_factor(r, n_rad, n_ang, rule.factor_nodes_[0], rule.factor_weights_[0]);
  polar_factor(s, n_rad, n_ang, rule.factor_nodes_[1], rule.factor_weights_[1]);
  return rule;
}

cplx integrate(const QuadratureRule& rule, const ScalarField& f) {
  CompensatedComplexSum acc;
  const std::size_t n = rule.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point z = rule.node(i);
    const cplx v = f(z);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      std::string where = format_complex(z[0]);
      if (rule.dimension() == 2) where = "(" + where + ", " + format_complex(z[1]) + ")";
      throw Error(ErrorKind::NumericalEvaluation,
                  "non-finite integrand at node " + std::to_string(i) + " " + where);
    }
    acc.add(rule.weight(i) * v);
  }
  return acc.value();
}

double weight_sum(const QuadratureRule& rule) {
  CompensatedSum acc;
  const std::size_t n = rule.size();
  for (std::size_t i = 0; i < n; ++i) acc.add(rule.weight(i));
  return acc.value();
}

}  // namespace l2ext
