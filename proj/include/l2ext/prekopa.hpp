#pragma once

#include <functional>
#include <vector>

#include "l2ext/index.hpp"

namespace l2ext {

/// Weight phi(tau, z) with the fiber integral taken over the disc
/// D(fiber_center; fiber_radius). Unbounded fibers must be truncated by the
/// caller with a radius large enough for the tail to be negligible.
struct PrekopaSetup {
  WeightField weight = WeightField::zero(Binding::TauZ);
  cplx fiber_center = 0.0;
  double fiber_radius = 3.0;
  Resolution fiber_resolution{64, 128};
  std::vector<cplx> tau_grid;
};

/// Phi(tau) = -log int_fiber e^{-phi(tau, z)}, evaluated with a max-shift.
double prekopa_phi(const PrekopaSetup& setup, cplx tau);

/// Phi on the setup's tau grid.
std::vector<double> prekopa_transform(const PrekopaSetup& setup);

/// Phi_{tau taubar} by finite differences of Phi itself.
double prekopa_fd_curvature(const PrekopaSetup& setup, cplx tau);

/// Phi_{tau taubar} = <phi_tt - |phi_t|^2> + |<phi_t>|^2 (fiber averages
/// against e^{-phi}).
double prekopa_variance_curvature(const PrekopaSetup& setup, cplx tau);

constexpr double kHypothesisTolerance = 1e-6;

struct PrekopaG {
  double g = 0.0;
  double G = 0.0;
  double variance_term = 0.0;  // |<phi_t>|^2
  /// Fiber nodes (as z values) where phi_tt - |phi_t|^2 < g - 1e-6.
  std::vector<cplx> violations;
  double min_hypothesis = 0.0;
};

/// G(tau) = g(tau) + |int phi_t e^{-phi}|^2 / (int e^{-phi})^2, with a check
/// of the pointwise hypothesis phi_tt - |phi_t|^2 >= g on the fiber nodes.
PrekopaG prekopa_G(const PrekopaSetup& setup, cplx tau, double g);

/// Phi as a weight in one variable (named z), each evaluation performing a
/// fiber integral.
WeightField prekopa_weight(const PrekopaSetup& setup);

struct PrekopaIndexRow {
  double r = 0.0;
  double L = 0.0;
  double bound = 0.0;
  bool converged = false;
  bool pass = false;
};

/// Default options for indices of Phi: each quadrature node costs a fiber
/// integral, so the disc rule is coarser than for closed-form weights.
IndexOptions prekopa_index_options();

/// Rows (r, L_Phi(a, r), e^{-max((G(a) - eps)/2, 0) r^2}); pass iff
/// L <= bound + 1e-9.
std::vector<PrekopaIndexRow> prekopa_index_check(const PrekopaSetup& setup, double G, cplx a,
                                                 double eps, const std::vector<double>& radii,
                                                 const IndexOptions& opts = prekopa_index_options());

struct PrekopaTauRow {
  cplx tau{};
  double Phi = 0.0;
  double curvature_fd = 0.0;
  double curvature_variance = 0.0;
  PrekopaG G;
};

struct PrekopaReport {
  std::vector<PrekopaTauRow> rows;
  double max_route_gap = 0.0;
  std::vector<PrekopaIndexRow> index_rows;
};

/// Per-tau table on the setup grid; g is evaluated at each tau.
PrekopaReport prekopa_report(const PrekopaSetup& setup, const std::function<double(cplx)>& g);

}  // namespace l2ext
