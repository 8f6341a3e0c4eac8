#include "l2ext/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>

namespace l2ext {

namespace {

// Slack for comparing an index against an exponential bound.
constexpr double kBoundSlack = 1e-12;

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json vector_json(const Eigen::VectorXcd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_json(v(i)));
  return out;
}

std::string fmt_label(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

/// Runs `body` to fill a row; library errors turn into a failed row that
/// carries the error kind instead of aborting the suite.
VerifyRow guarded_row(std::string label, json inputs, bool expected_fail,
                      const std::function<void(VerifyRow&)>& body) {
  VerifyRow row;
  row.label = std::move(label);
  row.inputs = std::move(inputs);
  row.expected_fail = expected_fail;
  try {
    body(row);
  } catch (const Error& e) {
    row.pass = false;
    row.computed = json{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}};
  }
  return row;
}

VerificationReport start(std::string suite, const VerifyOptions& opts) {
  VerificationReport report;
  report.suite = std::move(suite);
  report.config = opts.config;
  report.provenance.config_hash = config_hash(opts.config);
  report.provenance.resolution = opts.index.resolution;
  report.provenance.degree = opts.index.degree;
  report.provenance.seed = opts.seed;
  return report;
}

void finish(VerificationReport& report) {
  report.overall = !report.rows.empty() &&
                   std::all_of(report.rows.begin(), report.rows.end(),
                               [](const VerifyRow& r) { return r.ok(); });
}

double fit_tol(const VerifyOptions& opts, double g) { return opts.fit_tolerance * (1.0 + std::abs(g)); }

/// Direction A on a fit's samples: largest r_eps such that the bound holds
/// for every ladder radius <= r_eps.
void direction_a(VerifyRow& row, const AsymptoticFit& fit, double g, double eps) {
  const double rate = std::max((g - eps) / 2.0, 0.0);
  double witness = 0.0;
  double first_fail = 0.0;
  double worst = std::numeric_limits<double>::infinity();
  json samples = json::array();
  for (std::size_t k = 0; k < fit.radii.size(); ++k) {
    const double r = fit.radii[k];
    const double log_bound = -rate * r * r;
    const double gap = log_bound - fit.log_L[k];  // >= 0 when the bound holds
    samples.push_back(json::array({r, std::exp(fit.log_L[k]), std::exp(log_bound)}));
    worst = std::min(worst, gap);
    if (first_fail == 0.0) {
      if (gap >= -kBoundSlack) {
        witness = r;
      } else {
        first_fail = r;
      }
    }
  }
  row.computed = json{{"g", g},
                      {"rate", rate},
                      {"r_eps", witness},
                      {"first_failure_r", first_fail},
                      {"samples_r_L_bound", samples}};
  row.bound = rate;
  row.margin = worst;
  row.pass = witness > 0.0;
}

VerifyRow perturbation_row(const std::string& label, json inputs, bool expected_fail,
                           const std::function<IndexResult()>& compute, const VerifyOptions& opts,
                           const std::function<double()>& curvature_size) {
  return guarded_row(label, std::move(inputs), expected_fail, [&](VerifyRow& row) {
    const IndexResult result = compute();
    const GramSystem& sys = *result.system;
    // Direction (z - a) e_0: vanishes at the center, so the constraint holds.
    Eigen::VectorXcd d = Eigen::VectorXcd::Zero(sys.size());
    d(sys.rank) = opts.perturbation;
    const double increase = norm_increase(sys, result.extension.coefficients, d);
    const double relative = increase / result.extension.min_norm;
    const double curv = curvature_size();
    row.computed = json{{"L", result.L},
                        {"curvature_abs", curv},
                        {"perturbation_increase", relative},
                        {"converged", result.extension.converged},
                        {"condition", result.extension.condition}};
    row.bound = opts.harmonic_tolerance;
    row.margin = opts.harmonic_tolerance - std::max(std::abs(result.L - 1.0), curv);
    row.pass = std::abs(result.L - 1.0) <= opts.harmonic_tolerance &&
               curv <= opts.harmonic_tolerance && relative > 0.0;
  });
}

}  // namespace

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

VerificationReport verify_index_to_curvature(const WeightField& w, const std::vector<cplx>& samples,
                                             const VerifyOptions& opts) {
  VerificationReport report = start("index_to_curvature", opts);
  report.tolerances = {{"fit_tolerance", opts.fit_tolerance}};
  for (cplx a : samples) {
    report.rows.push_back(guarded_row(
        "a=" + format_complex(a), json{{"a", complex_json(a)}, {"weight", w.describe()}}, false,
        [&](VerifyRow& row) {
          const double g = phi_zzbar(w, a);
          const AsymptoticFit fit = extract_index_curvature(w, a, opts.window, opts.index);
          double sup = -std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < fit.radii.size(); ++k) {
            sup = std::max(sup, fit.log_L[k] / (fit.radii[k] * fit.radii[k]));
          }
          const double ladder_bound = -2.0 * sup;
          const double tol = fit_tol(opts, g);
          row.computed = json{{"phi_zzbar", g},
                              {"g_hat", fit.g_hat},
                              {"ladder_bound", ladder_bound},
                              {"fit_residual", fit.residual},
                              {"fit_accepted", fit.accepted}};
          row.bound = std::max(ladder_bound, fit.g_hat);
          row.margin = g - row.bound;
          row.pass = fit.accepted && g >= ladder_bound - tol && g >= fit.g_hat - tol;
        }));
  }
  finish(report);
  return report;
}

VerificationReport verify_equivalence_scalar(const WeightField& w, const std::vector<cplx>& samples,
                                             const std::vector<double>& eps_list,
                                             const VerifyOptions& opts) {
  VerificationReport report = start("equivalence_scalar", opts);
  report.tolerances = {{"fit_tolerance", opts.fit_tolerance}, {"bound_slack", kBoundSlack}};
  for (cplx a : samples) {
    AsymptoticFit fit;
    double g = 0.0;
    const json base{{"a", complex_json(a)}, {"weight", w.describe()}};
    VerifyRow setup = guarded_row("setup a=" + format_complex(a), base, false, [&](VerifyRow& r) {
      g = phi_zzbar(w, a);
      fit = extract_index_curvature(w, a, opts.window, opts.index);
      r.pass = true;
    });
    if (!setup.pass) {
      report.rows.push_back(setup);
      continue;
    }
    for (double eps : eps_list) {
      json inputs = base;
      inputs["eps"] = eps;
      report.rows.push_back(guarded_row(
          "A a=" + format_complex(a) + fmt_label(" eps=%g", eps), inputs, eps < 0.0,
          [&](VerifyRow& row) { direction_a(row, fit, g, eps); }));
    }
    report.rows.push_back(guarded_row("B a=" + format_complex(a), base, false, [&](VerifyRow& row) {
      const double tol = fit_tol(opts, g);
      row.computed = json{{"phi_zzbar", g},
                          {"g_hat", fit.g_hat},
                          {"fit_residual", fit.residual},
                          {"fit_accepted", fit.accepted}};
      row.bound = g - tol;
      row.margin = fit.g_hat - row.bound;
      row.pass = fit.accepted && fit.g_hat >= g - tol;
    }));
  }
  finish(report);
  return report;
}

VerificationReport verify_harmonic_flat(const WeightField& w, const std::vector<ProfilePoint>& grid,
                                        bool expect_harmonic, const VerifyOptions& opts) {
  VerificationReport report = start("harmonic", opts);
  report.tolerances = {{"harmonic_tolerance", opts.harmonic_tolerance},
                       {"perturbation", opts.perturbation}};
  for (const ProfilePoint& p : grid) {
    const cplx a = p.a[0];
    report.rows.push_back(perturbation_row(
        "a=" + format_complex(a) + fmt_label(" r=%g", p.r),
        json{{"a", complex_json(a)}, {"r", p.r}, {"weight", w.describe()}}, !expect_harmonic,
        [&] { return l2_index_line(w, a, p.r, opts.index); }, opts,
        [&] { return std::abs(phi_zzbar(w, a)); }));
  }
  finish(report);
  return report;
}

VerificationReport verify_harmonic_flat(const MetricField& m, const std::vector<ProfilePoint>& grid,
                                        bool expect_harmonic, const VerifyOptions& opts) {
  VerificationReport report = start("flat", opts);
  report.tolerances = {{"harmonic_tolerance", opts.harmonic_tolerance},
                       {"perturbation", opts.perturbation}};
  for (const ProfilePoint& p : grid) {
    const cplx a = p.a[0];
    const Eigen::VectorXcd xi =
        p.xi.size() == m.rank() ? p.xi : Eigen::VectorXcd::Unit(m.rank(), 0);
    report.rows.push_back(perturbation_row(
        "a=" + format_complex(a) + fmt_label(" r=%g", p.r),
        json{{"a", complex_json(a)}, {"r", p.r}, {"xi", vector_json(xi)}, {"metric", m.describe()}},
        !expect_harmonic, [&] { return l2_index_vector(m, a, p.r, xi, opts.index); }, opts,
        [&] { return curvature_form_vector(m, a).eigenvalues.cwiseAbs().maxCoeff(); }));
  }
  finish(report);
  return report;
}

VerificationReport verify_vector_sharper(const MetricField& m, const std::vector<cplx>& samples,
                                         const std::vector<Eigen::VectorXcd>& xis,
                                         const std::vector<double>& eps_list,
                                         const VerifyOptions& opts) {
  VerificationReport report = start("vector_sharper", opts);
  report.tolerances = {{"fit_tolerance", opts.fit_tolerance},
                       {"bound_slack", kBoundSlack},
                       {"griffiths_tolerance", kGriffithsTolerance}};
  for (cplx a : samples) {
    const json base{{"a", complex_json(a)}, {"metric", m.describe()}};
    double g = 0.0;
    VerifyRow curv = guarded_row("curvature a=" + format_complex(a), base, false,
                                 [&](VerifyRow& row) {
                                   const CurvatureReport rep = curvature_form_vector(m, a);
                                   g = rep.eigenvalues.minCoeff();
                                   json eig = json::array();
                                   for (double e : rep.eigenvalues) eig.push_back(e);
                                   row.computed = json{{"eigenvalues", eig},
                                                       {"hermitian_defect", rep.hermitian_defect}};
                                   if (rep.conformal_self_check) {
                                     row.computed["conformal_self_check"] =
                                         *rep.conformal_self_check;
                                   }
                                   row.bound = g;
                                   row.pass = rep.hermitian_defect <= 1e-9 &&
                                              rep.conformal_self_check.value_or(true);
                                 });
    const bool have_g = curv.pass;
    report.rows.push_back(std::move(curv));
    if (!have_g) continue;

    double min_g_hat = std::numeric_limits<double>::infinity();
    bool fits_ok = true;
    for (const Eigen::VectorXcd& xi : xis) {
      json xin = base;
      xin["xi"] = vector_json(xi);
      AsymptoticFit fit;
      VerifyRow fit_row =
          guarded_row("fit a=" + format_complex(a), xin, false, [&](VerifyRow& row) {
            fit = extract_index_curvature(m, xi, a, opts.window, opts.index);
            const double tol = fit_tol(opts, g);
            row.computed = json{{"g_hat", fit.g_hat},
                                {"fit_residual", fit.residual},
                                {"fit_accepted", fit.accepted}};
            row.bound = g - tol;
            row.margin = fit.g_hat - row.bound;
            row.pass = fit.accepted && fit.g_hat >= g - tol;
          });
      const bool fitted = !fit_row.computed.contains("error");
      fits_ok = fits_ok && fitted && fit.accepted;
      if (fitted) min_g_hat = std::min(min_g_hat, fit.g_hat);
      report.rows.push_back(std::move(fit_row));
      if (!fitted) continue;
      for (double eps : eps_list) {
        json inputs = xin;
        inputs["eps"] = eps;
        report.rows.push_back(guarded_row(
            "A a=" + format_complex(a) + fmt_label(" eps=%g", eps), inputs, eps < 0.0,
            [&](VerifyRow& row) { direction_a(row, fit, g, eps); }));
      }
    }
    report.rows.push_back(guarded_row("B a=" + format_complex(a), base, false, [&](VerifyRow& row) {
      const double tol = fit_tol(opts, g);
      row.computed = json{{"g", g}, {"min_g_hat", fits_ok ? min_g_hat : 0.0}};
      row.bound = g - tol;
      row.margin = fits_ok ? min_g_hat - row.bound : 0.0;
      row.pass = fits_ok && min_g_hat >= g - tol;
    }));
  }
  finish(report);
  return report;
}

VerificationReport verify_pluriharmonic_cylinder(const WeightField& w,
                                                 const std::vector<CylinderSample>& samples,
                                                 int unitary_count, bool expect_pluriharmonic,
                                                 const VerifyOptions& opts) {
  VerificationReport report = start("pluriharmonic_cylinder", opts);
  report.provenance.resolution = opts.index.cylinder_resolution;
  report.provenance.degree = opts.index.cylinder_degree;
  report.tolerances = {{"cylinder_tolerance", opts.cylinder_tolerance},
                       {"mixed_tolerance", opts.mixed_tolerance}};
  const std::vector<Eigen::Matrix2cd> unitaries = sample_unitaries(opts.seed, unitary_count);
  auto f = [&](cplx z1, cplx z2) { return cplx(w(z1, z2)); };
  for (const CylinderSample& smp : samples) {
    const json base{{"a", json::array({complex_json(smp.a[0]), complex_json(smp.a[1])})},
                    {"r", smp.r},
                    {"s", smp.s},
                    {"weight", w.describe()}};
    for (std::size_t u = 0; u < unitaries.size(); ++u) {
      json inputs = base;
      inputs["unitary_index"] = u;
      report.rows.push_back(guarded_row(
          fmt_label("L r=%g", smp.r) + fmt_label(" s=%g", smp.s) + " A#" + std::to_string(u),
          inputs, !expect_pluriharmonic, [&](VerifyRow& row) {
            const IndexResult res =
                l2_index_cylinder(w, smp.a, smp.r, smp.s, unitaries[u], opts.index);
            row.computed = json{{"L", res.L},
                                {"converged", res.extension.converged},
                                {"condition", res.extension.condition}};
            row.bound = opts.cylinder_tolerance;
            row.margin = opts.cylinder_tolerance - std::abs(res.L - 1.0);
            row.pass = row.margin >= 0.0;
          }));
    }
    report.rows.push_back(guarded_row(
        fmt_label("mixed r=%g", smp.r) + fmt_label(" s=%g", smp.s), base, !expect_pluriharmonic,
        [&](VerifyRow& row) {
          json d = json::array();
          double worst = 0.0;
          for (int j = 0; j < 2; ++j) {
            for (int k = 0; k < 2; ++k) {
              const cplx v = wirtinger_mixed(f, smp.a[0], smp.a[1], j, k);
              d.push_back(complex_json(v));
              worst = std::max(worst, std::abs(v));
            }
          }
          row.computed = json{{"mixed_derivatives", d}, {"max_abs", worst}};
          row.bound = opts.mixed_tolerance;
          row.margin = opts.mixed_tolerance - worst;
          row.pass = row.margin >= 0.0;
        }));
  }
  finish(report);
  return report;
}

VerificationReport verify_scaled_index(const WeightField& w, cplx a, double r, int m_max,
                                       bool expect_subharmonic, const VerifyOptions& opts) {
  VerificationReport report = start("scaled_index", opts);
  report.tolerances = {{"scaled_tolerance", opts.scaled_tolerance}};
  if (m_max < 1) throw Error(ErrorKind::InvalidParameter, "m_max must be >= 1");
  std::vector<int> ms;
  for (int m = 1; m < m_max; m *= 2) ms.push_back(m);
  ms.push_back(m_max);
  const json base{{"a", complex_json(a)}, {"r", r}, {"weight", w.describe()}};
  std::vector<double> values;
  for (int m : ms) {
    json inputs = base;
    inputs["m"] = m;
    report.rows.push_back(guarded_row("m=" + std::to_string(m), inputs, !expect_subharmonic,
                                      [&](VerifyRow& row) {
                                        const double v =
                                            scaled_index(w, a, r, {m}, opts.index).front().value;
                                        values.push_back(v);
                                        row.computed = json{{"value", v}};
                                        row.bound = opts.scaled_tolerance;
                                        row.margin = opts.scaled_tolerance - v;
                                        row.pass = v <= opts.scaled_tolerance;
                                      }));
  }
  report.rows.push_back(guarded_row("decay", base, !expect_subharmonic, [&](VerifyRow& row) {
    if (values.size() != ms.size()) {
      row.computed = json{{"error", "missing values"}};
      return;
    }
    const double first = std::abs(values.front());
    const double last = std::abs(values.back());
    row.computed = json{{"abs_first", first}, {"abs_last", last}};
    row.bound = first + 1e-12;
    row.margin = row.bound - last;
    row.pass = last <= row.bound;
  }));
  finish(report);
  return report;
}

json to_json(const VerificationReport& report) {
  json rows = json::array();
  for (const VerifyRow& r : report.rows) {
    rows.push_back(json{{"label", r.label},
                        {"inputs", r.inputs},
                        {"computed", r.computed},
                        {"bound", r.bound},
                        {"margin", r.margin},
                        {"pass", r.pass},
                        {"expected_fail", r.expected_fail}});
  }
  return json{{"suite", report.suite},
              {"rows", rows},
              {"overall", report.overall},
              {"tolerances", report.tolerances},
              {"provenance",
               {{"config_hash", report.provenance.config_hash},
                {"resolution",
                 {report.provenance.resolution.n_rad, report.provenance.resolution.n_ang}},
                {"degree", report.provenance.degree},
                {"seed", report.provenance.seed}}},
              {"config", report.config}};
}

VerificationReport report_from_json(const json& j) {
  try {
    VerificationReport report;
    report.suite = j.at("suite").get<std::string>();
    for (const json& r : j.at("rows")) {
      VerifyRow row;
      row.label = r.at("label").get<std::string>();
      row.inputs = r.at("inputs");
      row.computed = r.at("computed");
      row.bound = r.at("bound").get<double>();
      row.margin = r.at("margin").get<double>();
      row.pass = r.at("pass").get<bool>();
      row.expected_fail = r.at("expected_fail").get<bool>();
      report.rows.push_back(std::move(row));
    }
    report.overall = j.at("overall").get<bool>();
    report.tolerances = j.at("tolerances").get<std::map<std::string, double>>();
    const json& p = j.at("provenance");
    report.provenance.config_hash = p.at("config_hash").get<std::string>();
    report.provenance.resolution = {p.at("resolution").at(0).get<int>(),
                                    p.at("resolution").at(1).get<int>()};
    report.provenance.degree = p.at("degree").get<int>();
    report.provenance.seed = p.at("seed").get<std::uint64_t>();
    report.config = j.at("config");
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("malformed verification report: ") + e.what());
  }
}

}  // namespace l2ext
