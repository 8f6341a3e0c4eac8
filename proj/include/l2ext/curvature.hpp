#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "l2ext/index.hpp"

namespace l2ext {

// Normalization: omega = i dz ^ dzbar, so i ddbar phi = phi_{z zbar} omega.

/// Exact phi_{z zbar} for built-in families, finite differences otherwise.
double phi_zzbar(const WeightField& w, cplx a, std::optional<double> step = {});

struct FitWindow {
  double r_min = 0.05;
  double r_max = 0.3;
  int samples = 8;
};

/// Weighted least-squares fit of log L = -(g/2) r^2 + beta r^4 on a
/// geometric radius ladder.
struct AsymptoticFit {
  cplx a{};
  FitWindow window;
  std::vector<double> radii;
  std::vector<double> log_L;
  bool all_converged = true;
  double g_hat = 0.0;
  double beta = 0.0;
  double residual = 0.0;
  bool accepted = false;
};

constexpr int kMinFitSamples = 6;

/// Radii r_min * q^k, k = 0..samples-1, ending exactly at r_max.
std::vector<double> radius_ladder(const FitWindow& window);

/// Fits precomputed samples; exposed for callers that already hold them.
AsymptoticFit fit_asymptotics(cplx a, const FitWindow& window, std::vector<double> radii,
                              std::vector<double> log_L);

AsymptoticFit extract_index_curvature(const WeightField& w, cplx a, const FitWindow& window = {},
                                      const IndexOptions& opts = {});
AsymptoticFit extract_index_curvature(const MetricField& m, const Eigen::VectorXcd& xi, cplx a,
                                      const FitWindow& window = {},
                                      const IndexOptions& opts = {});

struct CurvatureReport {
  cplx a{};
  bool vector = false;
  double phi_zzbar = 0.0;  // scalar case
  Eigen::MatrixXcd M;      // -H_{z zbar} + H_zbar H^{-1} H_z
  Eigen::MatrixXcd H;
  /// Ascending pencil eigenvalues of (M, H); the single value phi_zzbar in
  /// the scalar case.
  Eigen::VectorXd eigenvalues;
  double hermitian_defect = 0.0;  // ||M - M^H|| / max(1, ||M||)
  /// Set when the metric looked like e^{-phi} H0 near a: whether every
  /// pencil eigenvalue matched (-log tr H)_{z zbar} within 1e-6.
  std::optional<bool> conformal_self_check;
};

CurvatureReport curvature_form_scalar(const WeightField& w, cplx a,
                                      std::optional<double> step = {});
CurvatureReport curvature_form_vector(const MetricField& m, cplx a,
                                      std::optional<double> step = {});

struct BoundCheck {
  bool ok = false;
  double margin = 0.0;
};

constexpr double kGriffithsTolerance = 1e-6;

/// ok iff the smallest eigenvalue is >= g - 1e-6; margin = smallest - g.
BoundCheck griffiths_bound_check(const CurvatureReport& report, double g);

}  // namespace l2ext
