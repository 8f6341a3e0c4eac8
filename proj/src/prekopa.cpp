#include "l2ext/prekopa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "l2ext/numeric.hpp"

namespace l2ext {

namespace {

void check_setup(const PrekopaSetup& setup) {
  if (setup.weight.binding() != Binding::TauZ) {
    throw Error(ErrorKind::InvalidParameter, "Prekopa weight must be a function of (tau, z)");
  }
  if (!(setup.fiber_radius > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "fiber radius must be positive");
  }
}

QuadratureRule fiber_rule(const PrekopaSetup& setup) {
  check_setup(setup);
  return disc_rule(setup.fiber_center, setup.fiber_radius, setup.fiber_resolution.n_rad,
                   setup.fiber_resolution.n_ang);
}

double phi_on_rule(const QuadratureRule& rule, const WeightField& w, cplx tau) {
  const std::size_t n = rule.size();
  std::vector<double> phi(n);
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    phi[i] = w(tau, rule.node(i)[0]);
    lo = std::min(lo, phi[i]);
  }
  CompensatedSum acc;
  for (std::size_t i = 0; i < n; ++i) acc.add(rule.weight(i) * std::exp(-(phi[i] - lo)));
  const double mass = acc.value();
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw Error(ErrorKind::NumericalEvaluation,
                "fiber integral is not a positive finite number at tau = " + format_complex(tau));
  }
  return lo - std::log(mass);
}

struct Moments {
  double mean_hypothesis = 0.0;  // <phi_tt - |phi_t|^2>
  cplx mean_phi_tau = 0.0;       // <phi_t>
  double min_hypothesis = std::numeric_limits<double>::infinity();
  std::vector<cplx> below;
};

Moments fiber_moments(const QuadratureRule& rule, const WeightField& w, cplx tau,
                      std::optional<double> g) {
  const std::size_t n = rule.size();
  std::vector<double> phi(n);
  std::vector<double> hyp(n);
  std::vector<cplx> dt(n);
  parallel_for(n, [&](std::size_t i) {
    const cplx z = rule.node(i)[0];
    auto along_tau = [&](cplx t) { return w(t, z); };
    phi[i] = w(tau, z);
    dt[i] = wirtinger_fd(along_tau, tau, {1, 0});
    const double dtt = wirtinger_fd(along_tau, tau, {1, 1}).real();
    hyp[i] = dtt - std::norm(dt[i]);
  });
  const double lo = *std::min_element(phi.begin(), phi.end());
  CompensatedSum mass;
  CompensatedSum h_acc;
  CompensatedComplexSum t_acc;
  Moments out;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = rule.weight(i) * std::exp(-(phi[i] - lo));
    mass.add(e);
    h_acc.add(e * hyp[i]);
    t_acc.add(e * dt[i]);
    out.min_hypothesis = std::min(out.min_hypothesis, hyp[i]);
    if (g && hyp[i] < *g - kHypothesisTolerance) out.below.push_back(rule.node(i)[0]);
  }
  out.mean_hypothesis = h_acc.value() / mass.value();
  out.mean_phi_tau = t_acc.value() / mass.value();
  return out;
}

}  // namespace

double prekopa_phi(const PrekopaSetup& setup, cplx tau) {
  return phi_on_rule(fiber_rule(setup), setup.weight, tau);
}

std::vector<double> prekopa_transform(const PrekopaSetup& setup) {
  const QuadratureRule rule = fiber_rule(setup);
  std::vector<double> out(setup.tau_grid.size());
  parallel_for(out.size(),
               [&](std::size_t k) { out[k] = phi_on_rule(rule, setup.weight, setup.tau_grid[k]); });
  return out;
}

double prekopa_fd_curvature(const PrekopaSetup& setup, cplx tau) {
  const QuadratureRule rule = fiber_rule(setup);
  return wirtinger_fd([&](cplx t) { return phi_on_rule(rule, setup.weight, t); }, tau, {1, 1})
      .real();
}

double prekopa_variance_curvature(const PrekopaSetup& setup, cplx tau) {
  const Moments m = fiber_moments(fiber_rule(setup), setup.weight, tau, std::nullopt);
  return m.mean_hypothesis + std::norm(m.mean_phi_tau);
}

PrekopaG prekopa_G(const PrekopaSetup& setup, cplx tau, double g) {
  const Moments m = fiber_moments(fiber_rule(setup), setup.weight, tau, g);
  PrekopaG out;
  out.g = g;
  out.variance_term = std::norm(m.mean_phi_tau);
  out.G = g + out.variance_term;
  out.violations = m.below;
  out.min_hypothesis = m.min_hypothesis;
  return out;
}

WeightField prekopa_weight(const PrekopaSetup& setup) {
  auto rule = std::make_shared<const QuadratureRule>(fiber_rule(setup));
  const WeightField w = setup.weight;
  std::string desc = "prekopa(" + w.describe() + ", R=" + std::to_string(setup.fiber_radius) + ")";
  return WeightField::custom(
      [rule, w](std::span<const cplx> p) { return phi_on_rule(*rule, w, p[0]); }, Binding::Z,
      std::move(desc));
}

IndexOptions prekopa_index_options() {
  IndexOptions opts;
  opts.resolution = {32, 64};
  opts.degree = 12;
  return opts;
}

std::vector<PrekopaIndexRow> prekopa_index_check(const PrekopaSetup& setup, double G, cplx a,
                                                 double eps, const std::vector<double>& radii,
                                                 const IndexOptions& opts) {
  const WeightField Phi = prekopa_weight(setup);
  std::vector<PrekopaIndexRow> rows;
  rows.reserve(radii.size());
  for (double r : radii) {
    const IndexResult result = l2_index_line(Phi, a, r, opts);
    PrekopaIndexRow row;
    row.r = r;
    row.L = result.L;
    row.bound = std::exp(-std::max((G - eps) / 2.0, 0.0) * r * r);
    row.converged = result.extension.converged;
    row.pass = row.L <= row.bound + 1e-9;
    rows.push_back(row);
  }
  return rows;
}

PrekopaReport prekopa_report(const PrekopaSetup& setup, const std::function<double(cplx)>& g) {
  const QuadratureRule rule = fiber_rule(setup);
  PrekopaReport report;
  for (cplx tau : setup.tau_grid) {
    PrekopaTauRow row;
    row.tau = tau;
    row.Phi = phi_on_rule(rule, setup.weight, tau);
    row.curvature_fd =
        wirtinger_fd([&](cplx t) { return phi_on_rule(rule, setup.weight, t); }, tau, {1, 1})
            .real();
    const double g_tau = g(tau);
    const Moments m = fiber_moments(rule, setup.weight, tau, g_tau);
    row.curvature_variance = m.mean_hypothesis + std::norm(m.mean_phi_tau);
    row.G.g = g_tau;
    row.G.variance_term = std::norm(m.mean_phi_tau);
    row.G.G = g_tau + row.G.variance_term;
    row.G.violations = m.below;
    row.G.min_hypothesis = m.min_hypothesis;
    report.max_route_gap =
        std::max(report.max_route_gap, std::abs(row.curvature_fd - row.curvature_variance));
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace l2ext
