#include <doctest.h>

#include <cmath>

#include "l2ext/curvature.hpp"

using namespace l2ext;

TEST_CASE("phi_zzbar") {
  CHECK(phi_zzbar(WeightField::gaussian(2.0), {0.7, -0.2}) == 2.0);
  CHECK(std::abs(phi_zzbar(WeightField::expression("2*re(z^3)"), 0.3)) < 1e-7);
  CHECK(std::abs(phi_zzbar(WeightField::expression("abs2(z) + 0.3*re(z^4)"), 0.0) - 1.0) < 1e-7);
  CHECK(std::abs(phi_zzbar(WeightField::expression("abs2(z)^2"), {0.5, 0.0}) - 4.0 * 0.25) < 1e-7);
}

TEST_CASE("radius ladder") {
  const auto radii = radius_ladder({0.05, 0.3, 8});
  REQUIRE(radii.size() == 8);
  CHECK(radii.front() == 0.05);
  CHECK(radii.back() == 0.3);
  for (std::size_t k = 1; k < radii.size(); ++k) {
    CHECK(std::abs(radii[k] / radii[k - 1] - radii[1] / radii[0]) < 1e-12);
  }
}

TEST_CASE("asymptotic fit recovers curvature") {
  const AsymptoticFit g = extract_index_curvature(WeightField::gaussian(1.0), 0.0);
  CHECK(g.accepted);
  CHECK(std::abs(g.g_hat - 1.0) < 0.02);
  CHECK(std::abs(extract_index_curvature(WeightField::expression("2*re(z)"), 0.0).g_hat) < 0.01);
  const AsymptoticFit m = extract_index_curvature(WeightField::expression("abs2(z) + re(z^2)"), 0.0);
  CHECK(std::abs(m.g_hat - 1.0) < 0.02);
  const AsymptoticFit neg = extract_index_curvature(WeightField::gaussian(-0.5), 0.0);
  CHECK(std::abs(neg.g_hat + 0.5) < 0.02 * 0.5);
  for (double lr : neg.log_L) CHECK(lr > 0.0);
}

TEST_CASE("two routes agree across test weights") {
  for (const char* text : {"abs2(z)", "abs2(z) + re(z^2)", "log(1 + abs2(z))", "abs2(z)^2 + abs2(z)",
                           "2*re(z^3)", "0.5*abs2(z - 0.2) + re(z)"}) {
    const WeightField w = WeightField::expression(text);
    for (cplx a : {cplx(0.0), cplx(0.3, -0.1)}) {
      const double g = phi_zzbar(w, a);
      const AsymptoticFit fit = extract_index_curvature(w, a);
      CHECK_MESSAGE(std::abs(fit.g_hat - g) <= 0.02 * (1.0 + std::abs(g)), text);
    }
  }
}

TEST_CASE("fit rejects short or noisy data") {
  const FitWindow w{0.05, 0.3, 4};
  CHECK_THROWS_AS(extract_index_curvature(WeightField::gaussian(1.0), 0.0, w), Error);
  const FitWindow full{0.05, 0.3, 8};
  std::vector<double> radii = radius_ladder(full);
  std::vector<double> logs;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    logs.push_back(-0.5 * radii[k] * radii[k] + (k % 2 == 0 ? 1e-2 : -1e-2));
  }
  CHECK_FALSE(fit_asymptotics(0.0, full, radii, logs).accepted);
}

TEST_CASE("vector curvature") {
  const CurvatureReport flat =
      curvature_form_vector(MetricField::from_entries(2, {"2", "1", "1"}), {0.1, 0.2});
  CHECK(flat.M.norm() < 1e-8);
  CHECK(flat.eigenvalues.cwiseAbs().maxCoeff() < 1e-8);

  const CurvatureReport conf = curvature_form_vector(
      MetricField::from_entries(2, {"exp(-1.5*abs2(z))", "0", "exp(-1.5*abs2(z))"}), 0.2);
  CHECK(std::abs(conf.eigenvalues(0) - 1.5) < 1e-6);
  CHECK(std::abs(conf.eigenvalues(1) - 1.5) < 1e-6);
  REQUIRE(conf.conformal_self_check);
  CHECK(*conf.conformal_self_check);

  const CurvatureReport diag = curvature_form_vector(
      MetricField::from_entries(2, {"exp(-abs2(z))", "0", "exp(-2*abs2(z))"}), 0.0);
  CHECK(std::abs(diag.eigenvalues(0) - 1.0) < 1e-6);
  CHECK(std::abs(diag.eigenvalues(1) - 2.0) < 1e-6);
  CHECK(diag.hermitian_defect < 1e-8);
}

TEST_CASE("pencil eigenvalues are congruence invariant") {
  const MetricField m = MetricField::from_entries(
      2, {"exp(-abs2(z))", "0.2*z*exp(-abs2(z))", "exp(-2*abs2(z)) + 0.1*abs2(z)"});
  Eigen::MatrixXcd Q(2, 2);
  Q << 1.0, cplx(0.5, 0.3), 0.0, 2.0;
  for (cplx a : {cplx(0.0), cplx(0.2, 0.1)}) {
    const Eigen::VectorXd e0 = curvature_form_vector(m, a).eigenvalues;
    const Eigen::VectorXd e1 = curvature_form_vector(m.congruent(Q), a).eigenvalues;
    CHECK((e0 - e1).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("curvature lower bound checks") {
  const CurvatureReport s = curvature_form_scalar(WeightField::gaussian(1.0), 0.0);
  BoundCheck b = griffiths_bound_check(s, 1.0);
  CHECK(b.ok);
  CHECK(std::abs(b.margin) < 1e-6);
  b = griffiths_bound_check(s, 1.1);
  CHECK_FALSE(b.ok);
  CHECK(std::abs(b.margin + 0.1) < 1e-9);
  const CurvatureReport v = curvature_form_vector(
      MetricField::from_entries(2, {"exp(-abs2(z))", "0", "exp(-abs2(z))"}), 0.0);
  b = griffiths_bound_check(v, 0.0);
  CHECK(b.ok);
  CHECK(std::abs(b.margin - 1.0) < 1e-6);
}

TEST_CASE("sharper estimate holds on a ladder prefix and fails for negative slack") {
  const auto radii = radius_ladder({0.05, 0.3, 8});
  IndexOptions opts;
  for (double eps : {0.1, 0.3}) {
    for (double r : radii) {
      const double L = l2_index_line(WeightField::gaussian(1.0), 0.0, r, opts).L;
      CHECK(L <= std::exp(-((1.0 - eps) / 2.0) * r * r));
    }
  }
  // With eps < 0 the quartic term makes the bound fail for every small radius.
  for (double r : radii) {
    const double L = l2_index_line(WeightField::gaussian(1.0), 0.0, r, opts).L;
    CHECK(L > std::exp(-((1.0 + 0.1) / 2.0) * r * r));
  }
}
