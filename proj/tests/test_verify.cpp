#include <doctest.h>

#include <cmath>

#include "l2ext/verify.hpp"

using namespace l2ext;

namespace {

std::vector<ProfilePoint> grid3x3() {
  std::vector<ProfilePoint> g;
  for (cplx a : {cplx(0.0), cplx(0.2, 0.1), cplx(-0.1, 0.2)}) {
    for (double r : {0.2, 0.35, 0.5}) {
      ProfilePoint p;
      p.a = {a, 0.0};
      p.r = r;
      g.push_back(p);
    }
  }
  return g;
}

const VerifyRow* find_row(const VerificationReport& rep, const std::string& prefix) {
  for (const VerifyRow& row : rep.rows) {
    if (row.label.rfind(prefix, 0) == 0) return &row;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("index to curvature") {
  const std::vector<cplx> samples = {0.0, 0.3};
  CHECK(verify_index_to_curvature(WeightField::gaussian(1.0), samples).overall);
  CHECK(verify_index_to_curvature(WeightField::expression("2*re(z)"), samples).overall);
  const VerificationReport r =
      verify_index_to_curvature(WeightField::expression("abs2(z) + re(z^2)"), {0.0});
  CHECK(r.overall);
  for (const VerifyRow& row : r.rows) CHECK(row.ok());
  CHECK(r.tolerances.count("fit_tolerance") == 1);
}

TEST_CASE("scalar equivalence with witnesses and adversarial slack") {
  const VerificationReport r =
      verify_equivalence_scalar(WeightField::gaussian(1.0), {0.0}, {0.2, -0.1});
  CHECK(r.overall);
  const VerifyRow* a = find_row(r, "A a=0+0i eps=0.2");
  REQUIRE(a);
  CHECK(a->pass);
  CHECK(a->computed.at("r_eps").get<double>() >= 0.3);
  const VerifyRow* adv = find_row(r, "A a=0+0i eps=-0.1");
  REQUIRE(adv);
  CHECK(adv->expected_fail);
  CHECK_FALSE(adv->pass);
  CHECK(adv->ok());
  CHECK(verify_equivalence_scalar(WeightField::zero(), {0.0, 0.2}, {0.1}).overall);
}

TEST_CASE("harmonic and flat suites") {
  const VerificationReport h =
      verify_harmonic_flat(WeightField::expression("2*re(z + z^2/2)"), grid3x3());
  CHECK(h.overall);
  for (const VerifyRow& row : h.rows) CHECK(row.pass);

  const MetricField c = MetricField::from_entries(2, {"2", "1", "1"});
  CHECK(verify_harmonic_flat(c, grid3x3()).overall);

  ProfilePoint p;
  p.r = 0.5;
  const VerificationReport adv = verify_harmonic_flat(WeightField::gaussian(1.0), {p}, false);
  CHECK(adv.overall);
  for (const VerifyRow& row : adv.rows) {
    CHECK(row.expected_fail);
    CHECK_FALSE(row.pass);
  }
  // Claiming harmonicity for the gaussian makes the suite fail.
  CHECK_FALSE(verify_harmonic_flat(WeightField::gaussian(1.0), {p}, true).overall);
}

TEST_CASE("vector sharper estimate") {
  const std::vector<Eigen::VectorXcd> xis = {Eigen::Vector2cd(1.0, 0.0),
                                             Eigen::Vector2cd(0.0, 1.0)};
  CHECK(verify_vector_sharper(
            MetricField::from_entries(2, {"exp(-abs2(z))", "0", "exp(-abs2(z))"}), {0.0}, xis,
            {0.2})
            .overall);
  const VerificationReport d = verify_vector_sharper(
      MetricField::from_entries(2, {"exp(-abs2(z))", "0", "exp(-2*abs2(z))"}), {0.0}, xis, {0.2});
  CHECK(d.overall);
  std::vector<double> ghat;
  for (const VerifyRow& row : d.rows) {
    if (row.computed.contains("g_hat") && row.label.rfind("fit", 0) == 0) {
      ghat.push_back(row.computed.at("g_hat").get<double>());
    }
  }
  REQUIRE(ghat.size() == 2);
  CHECK(std::abs(ghat[0] - 1.0) < 0.02 * 2.0);
  CHECK(std::abs(ghat[1] - 2.0) < 0.02 * 3.0);
  CHECK(verify_vector_sharper(MetricField::from_entries(2, {"2", "1", "1"}), {0.0}, xis, {0.1})
            .overall);
}

TEST_CASE("pluriharmonic cylinder") {
  VerifyOptions opts;
  opts.index.cylinder_degree = 8;
  opts.index.cylinder_resolution = {20, 40};
  opts.seed = 5;
  const std::vector<CylinderSample> samples = {{{0.0, 0.0}, 0.3, 0.3}, {{0.0, 0.0}, 0.5, 0.2}};
  CHECK(verify_pluriharmonic_cylinder(WeightField::expression("2*re(z1*z2)"), samples, 2, true, opts)
            .overall);
  CHECK(verify_pluriharmonic_cylinder(WeightField::expression("re(z1^2) + re(z2^2)"), samples, 2,
                                      true, opts)
            .overall);
  const VerificationReport adv = verify_pluriharmonic_cylinder(
      WeightField::expression("abs2(z1) + 0*re(z2)"), {{{0.0, 0.0}, 0.5, 0.3}}, 1, false, opts);
  CHECK(adv.overall);
  const VerifyRow* row = find_row(adv, "L r=0.5");
  REQUIRE(row);
  CHECK(row->computed.at("L").get<double>() < 1.0 - 1e-3);
}

TEST_CASE("scaled index suite") {
  CHECK(verify_scaled_index(WeightField::gaussian(1.0), 0.0, 0.5, 32).overall);
  CHECK(verify_scaled_index(WeightField::zero(), 0.0, 0.5, 8).overall);
  CHECK(verify_scaled_index(WeightField::expression("2*re(z)"), 0.0, 0.5, 4).overall);
  // Negative curvature: values stay positive, so the suite flags it.
  CHECK(verify_scaled_index(WeightField::gaussian(-0.5), 0.0, 0.5, 8, false).overall);
  CHECK_FALSE(verify_scaled_index(WeightField::gaussian(-0.5), 0.0, 0.5, 8, true).overall);
}

TEST_CASE("reports serialize deterministically and round-trip") {
  VerifyOptions opts;
  opts.config = json{{"weight", "gauss:1"}, {"seed", 0}};
  const VerificationReport a =
      verify_equivalence_scalar(WeightField::gaussian(1.0), {0.0}, {0.2, -0.1}, opts);
  const VerificationReport b =
      verify_equivalence_scalar(WeightField::gaussian(1.0), {0.0}, {0.2, -0.1}, opts);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(report_from_json(to_json(a)) == a);
  CHECK(a.provenance.config_hash == config_hash(opts.config));
  CHECK(config_hash(opts.config) != config_hash(json{{"weight", "gauss:2"}, {"seed", 0}}));
  CHECK(a.provenance.config_hash.size() == 16);
}
