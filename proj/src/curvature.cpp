#include "l2ext/curvature.hpp"

#include <algorithm>
#include <cmath>

#include "l2ext/numeric.hpp"

namespace l2ext {

namespace {

constexpr double kFitRelativeResidual = 1e-3;
// Floor for weights whose log L is at roundoff level (harmonic weights).
constexpr double kFitAbsoluteResidual = 1e-10;

template <class IndexAt>
AsymptoticFit ladder_fit(cplx a, const FitWindow& window, IndexAt index_at) {
  const std::vector<double> radii = radius_ladder(window);
  std::vector<double> log_L(radii.size());
  std::vector<char> converged(radii.size());
  parallel_for(radii.size(), [&](std::size_t k) {
    const IndexResult result = index_at(radii[k]);
    log_L[k] = std::log(result.L);
    converged[k] = result.extension.converged;
  });
  AsymptoticFit fit = fit_asymptotics(a, window, radii, std::move(log_L));
  fit.all_converged = std::all_of(converged.begin(), converged.end(), [](char c) { return c; });
  return fit;
}

}  // namespace

double phi_zzbar(const WeightField& w, cplx a, std::optional<double> step) {
  if (w.binding() != Binding::Z) {
    throw Error(ErrorKind::InvalidParameter, "phi_zzbar needs a weight in the variable z");
  }
  if (const auto exact = w.exact_zzbar(a)) return *exact;
  return wirtinger_fd([&](cplx z) { return w(z); }, a, {1, 1}, step).real();
}

std::vector<double> radius_ladder(const FitWindow& window) {
  if (!(window.r_min > 0.0) || !(window.r_max > window.r_min)) {
    throw Error(ErrorKind::InvalidParameter, "fit window needs 0 < r_min < r_max");
  }
  if (window.samples < kMinFitSamples) {
    throw Error(ErrorKind::InvalidParameter, "fit window needs at least 6 samples");
  }
  std::vector<double> radii(static_cast<std::size_t>(window.samples));
  const double q = std::pow(window.r_max / window.r_min, 1.0 / (window.samples - 1));
  for (int k = 0; k < window.samples; ++k) radii[k] = window.r_min * std::pow(q, k);
  radii.back() = window.r_max;
  return radii;
}

AsymptoticFit fit_asymptotics(cplx a, const FitWindow& window, std::vector<double> radii,
                              std::vector<double> log_L) {
  if (radii.size() != log_L.size() || radii.size() < static_cast<std::size_t>(kMinFitSamples)) {
    throw Error(ErrorKind::InvalidParameter, "fit needs at least 6 matching samples");
  }
  // Dividing log L = c1 x + c2 x^2 (x = r^2) by x gives a linear model with
  // O(1) rows; equivalent to weighting the original residuals by 1/x.
  const auto n = static_cast<Eigen::Index>(radii.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double x = radii[k] * radii[k];
    X(k, 0) = 1.0;
    X(k, 1) = x;
    y(k) = log_L[k] / x;
  }
  const Eigen::Vector2d c = X.colPivHouseholderQr().solve(y);
  AsymptoticFit fit;
  fit.a = a;
  fit.window = window;
  fit.g_hat = -2.0 * c(0);
  fit.beta = c(1);
  double max_abs = 0.0;
  double sq = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double x = radii[k] * radii[k];
    const double model = c(0) * x + c(1) * x * x;
    sq += (log_L[k] - model) * (log_L[k] - model);
    max_abs = std::max(max_abs, std::abs(log_L[k]));
  }
  fit.residual = std::sqrt(sq);
  fit.accepted = fit.residual <= kFitRelativeResidual * max_abs + kFitAbsoluteResidual;
  fit.radii = std::move(radii);
  fit.log_L = std::move(log_L);
  return fit;
}

AsymptoticFit extract_index_curvature(const WeightField& w, cplx a, const FitWindow& window,
                                      const IndexOptions& opts) {
  return ladder_fit(a, window, [&](double r) { return l2_index_line(w, a, r, opts); });
}

AsymptoticFit extract_index_curvature(const MetricField& m, const Eigen::VectorXcd& xi, cplx a,
                                      const FitWindow& window, const IndexOptions& opts) {
  return ladder_fit(a, window, [&](double r) { return l2_index_vector(m, a, r, xi, opts); });
}

CurvatureReport curvature_form_scalar(const WeightField& w, cplx a, std::optional<double> step) {
  CurvatureReport report;
  report.a = a;
  report.phi_zzbar = phi_zzbar(w, a, step);
  report.eigenvalues = Eigen::VectorXd::Constant(1, report.phi_zzbar);
  return report;
}

CurvatureReport curvature_form_vector(const MetricField& m, cplx a, std::optional<double> step) {
  auto H_at = [&](cplx z) { return m.eval(z); };
  CurvatureReport report;
  report.a = a;
  report.vector = true;
  report.H = m.eval(a);
  const Eigen::MatrixXcd Hz = wirtinger_fd(H_at, a, {1, 0}, step);
  const Eigen::MatrixXcd Hzb = wirtinger_fd(H_at, a, {0, 1}, step);
  const Eigen::MatrixXcd Hzzb = wirtinger_fd(H_at, a, {1, 1}, step);
  Eigen::MatrixXcd M = -Hzzb + Hzb * report.H.llt().solve(Hz);
  const double scale = std::max(1.0, M.norm());
  report.hermitian_defect = (M - M.adjoint()).norm() / scale;
  M = (0.5 * (M + M.adjoint())).eval();
  report.M = M;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> pencil(M, report.H,
                                                                    Eigen::EigenvaluesOnly);
  if (pencil.info() != Eigen::Success) {
    throw Error(ErrorKind::MetricNotPositive,
                "curvature pencil could not be solved at " + format_complex(a));
  }
  report.eigenvalues = pencil.eigenvalues();  // ascending

  // Self-check for metrics of the form e^{-phi} H0: then every eigenvalue
  // equals phi_{z zbar} with phi = -log tr H + const.
  const double h = 0.05 * std::max(1.0, std::abs(a));
  bool conformal = true;
  const cplx probes[] = {a + h, a - h, a + cplx(0.0, h), a - cplx(0.0, h)};
  const cplx tr_a = report.H.trace();
  for (cplx p : probes) {
    const Eigen::MatrixXcd Hp = m.eval(p);
    const cplx ratio = Hp.trace() / tr_a;
    if ((Hp - ratio * report.H).norm() > 1e-12 * Hp.norm()) {
      conformal = false;
      break;
    }
  }
  if (conformal) {
    const double psi_zzbar =
        wirtinger_fd([&](cplx z) { return -std::log(m.eval(z).trace().real()); }, a, {1, 1}, step)
            .real();
    report.conformal_self_check =
        (report.eigenvalues.array() - psi_zzbar).abs().maxCoeff() <= 1e-6;
  }
  return report;
}

BoundCheck griffiths_bound_check(const CurvatureReport& report, double g) {
  const double smallest = report.eigenvalues.size() > 0 ? report.eigenvalues.minCoeff()
                                                        : report.phi_zzbar;
  return {smallest >= g - kGriffithsTolerance, smallest - g};
}

}  // namespace l2ext
