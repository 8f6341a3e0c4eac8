#include <doctest.h>

#include <cmath>
#include <numbers>

#include "l2ext/prekopa.hpp"

using namespace l2ext;
using std::numbers::pi;

namespace {

PrekopaSetup setup_for(const char* text, double radius) {
  PrekopaSetup s;
  s.weight = WeightField::expression(text, Binding::TauZ);
  s.fiber_radius = radius;
  return s;
}

const std::vector<cplx> kTaus = {cplx(0.0), cplx(0.3), cplx(0.0, 0.3)};

}  // namespace

TEST_CASE("transform closed forms") {
  const PrekopaSetup g = setup_for("abs2(tau) + abs2(z)", 3.0);
  const double c = std::log(pi * -std::expm1(-9.0));
  for (cplx t : {cplx(0.0), cplx(0.3, 0.4), cplx(-0.7)}) {
    CHECK(std::abs(prekopa_phi(g, t) - (std::norm(t) - c)) < 1e-9);
  }
  PrekopaSetup flat = setup_for("abs2(z) + 0*re(tau)", 3.0);
  flat.tau_grid = {0.0, 0.5, cplx(0.0, 0.2)};
  const auto vals = prekopa_transform(flat);
  REQUIRE(vals.size() == 3);
  CHECK(std::abs(vals[1] - vals[0]) < 1e-12);
  CHECK(std::abs(vals[2] - vals[0]) < 1e-12);

  const PrekopaSetup k = setup_for("abs2(z) - 2*re(tau*z)", 6.0);
  for (cplx t : {cplx(0.0), cplx(0.3), cplx(0.0, 0.5), cplx(0.35, -0.35)}) {
    CHECK(std::abs(prekopa_phi(k, t) - (-std::norm(t) - std::log(pi))) < 2e-3);
  }
}

TEST_CASE("max-shift keeps large weights finite") {
  const PrekopaSetup big = setup_for("abs2(tau) + abs2(z) + 900", 3.0);
  const PrekopaSetup g = setup_for("abs2(tau) + abs2(z)", 3.0);
  CHECK(std::abs(prekopa_phi(big, 0.2) - prekopa_phi(g, 0.2) - 900.0) < 1e-9);
}

TEST_CASE("both curvature routes") {
  const PrekopaSetup g = setup_for("abs2(tau) + abs2(z)", 3.0);
  for (cplx t : kTaus) {
    CHECK(std::abs(prekopa_variance_curvature(g, t) - 1.0) < 1e-6);
    CHECK(std::abs(prekopa_fd_curvature(g, t) - 1.0) < 1e-4);
  }
  const PrekopaSetup flat = setup_for("abs2(z) + 0*re(tau)", 3.0);
  CHECK(std::abs(prekopa_variance_curvature(flat, 0.3)) < 1e-8);
  const PrekopaSetup k = setup_for("abs2(z) - 2*re(tau*z)", 6.0);
  CHECK(std::abs(prekopa_variance_curvature(k, 0.0) + 1.0) < 2e-3);
  for (const char* text : {"abs2(tau) + abs2(z) + re(tau*z)", "abs2(tau - z) + abs2(z)^2"}) {
    const PrekopaSetup s = setup_for(text, 3.0);
    for (cplx t : kTaus) {
      CHECK_MESSAGE(std::abs(prekopa_variance_curvature(s, t) - prekopa_fd_curvature(s, t)) < 1e-4,
                    text);
    }
  }
}

TEST_CASE("quantified lower bound G") {
  const PrekopaSetup g = setup_for("abs2(tau) + abs2(z)", 3.0);
  for (cplx t : {cplx(0.0), cplx(0.5, 0.2), cplx(0.0, 0.9)}) {
    const PrekopaG res = prekopa_G(g, t, 1.0 - std::norm(t));
    CHECK(std::abs(res.G - 1.0) < 1e-6);
    CHECK(res.G >= res.g - 1e-12);
    CHECK(res.violations.empty());
    CHECK(prekopa_variance_curvature(g, t) >= res.G - 1e-4);
  }
  const PrekopaSetup shifted = setup_for("abs2(tau - 1) + abs2(z)", 3.0);
  const cplx t(0.7, 0.1);
  CHECK(std::abs(prekopa_G(shifted, t, 1.0 - std::norm(t - 1.0)).G - 1.0) < 1e-6);
  const PrekopaSetup flat = setup_for("abs2(z) + 0*re(tau)", 3.0);
  CHECK(std::abs(prekopa_G(flat, 0.2, 0.0).G) < 1e-10);
  // An overstated g is reported rather than rejected.
  CHECK_FALSE(prekopa_G(g, 0.0, 2.0).violations.empty());
}

TEST_CASE("index checks for the transform") {
  const PrekopaSetup g = setup_for("abs2(tau) + abs2(z)", 3.0);
  const auto rows = prekopa_index_check(g, 1.0, 0.0, 0.2, {0.05, 0.1, 0.2});
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    CHECK(row.pass);
    CHECK(row.L <= row.bound + 1e-9);
  }
  const PrekopaSetup flat = setup_for("abs2(z) + 0*re(tau)", 3.0);
  for (const auto& row : prekopa_index_check(flat, 0.0, 0.0, 0.5, {0.2})) {
    CHECK(std::abs(row.L - 1.0) < 1e-7);
    CHECK(row.pass);
  }
}

TEST_CASE("non-subharmonic transform is witnessed by the index") {
  const PrekopaSetup k = setup_for("abs2(z) - 2*re(tau*z)", 6.0);
  const auto rows = prekopa_index_check(k, 0.0, 0.0, 0.0, {0.5});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].L >= 1.0 + 1e-3);
  CHECK_FALSE(rows[0].pass);
}

TEST_CASE("report rows") {
  PrekopaSetup g = setup_for("abs2(tau) + abs2(z)", 3.0);
  g.tau_grid = kTaus;
  const PrekopaReport rep = prekopa_report(g, [](cplx t) { return 1.0 - std::norm(t); });
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.max_route_gap < 1e-4);
  for (const auto& row : rep.rows) CHECK(std::abs(row.G.G - 1.0) < 1e-6);
}
