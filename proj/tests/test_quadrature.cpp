#include <doctest.h>

#include <cmath>
#include <numbers>

#include "l2ext/index.hpp"
#include "l2ext/quadrature.hpp"

using namespace l2ext;
using std::numbers::pi;

namespace {

double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

}  // namespace

TEST_CASE("disc weight sum equals the area") {
  for (double r : {0.1, 0.5, 1.0, 3.0}) {
    const QuadratureRule rule = disc_rule(0.3, r, 32, 64);
    CHECK(rule.size() == 32u * 64u);
    CHECK(rel(weight_sum(rule), pi * r * r) < 1e-12);
    for (std::size_t i = 0; i < rule.size(); ++i) REQUIRE(rule.weight(i) > 0.0);
  }
}

TEST_CASE("disc integrals of simple integrands") {
  const QuadratureRule unit = disc_rule(0.0, 1.0, 32, 64);
  CHECK(std::abs(integrate(unit, [](const Point&) { return cplx(1.0); }) - pi) < 1e-12);
  // 2 pi int_0^1 rho^3 d rho
  CHECK(std::abs(integrate(unit, [](const Point& z) { return cplx(std::norm(z[0])); }) -
                 pi / 2.0) < 1e-10);
  CHECK(std::abs(integrate(unit, [](const Point& z) { return z[0]; })) < 1e-12);
  CHECK(integrate(disc_rule(0.0, 1.0, 16, 32), [](const Point&) { return cplx(0.0); }) ==
        cplx(0.0));
  CHECK(std::abs(integrate(disc_rule(2.0, 1.0, 32, 64), [](const Point&) { return cplx(1.0); }) -
                 pi) < 1e-12);
}

TEST_CASE("gaussian disc integral matches the closed form") {
  const double lambda = 1.0;
  const double r = 0.5;
  const QuadratureRule rule = disc_rule(0.0, r, 64, 128);
  const cplx v =
      integrate(rule, [&](const Point& z) { return cplx(std::exp(-lambda * std::norm(z[0]))); });
  CHECK(rel(v.real(), pi * (1.0 - std::exp(-lambda * r * r)) / lambda) < 1e-10);
}

TEST_CASE("refinement changes a smooth integral negligibly") {
  auto f = [](const Point& z) { return cplx(std::exp(-std::norm(z[0]))); };
  const cplx coarse = integrate(disc_rule(0.0, 1.0, 32, 64), f);
  const cplx fine = integrate(disc_rule(0.0, 1.0, 64, 128), f);
  CHECK(std::abs(coarse - fine) < 1e-10);
}

TEST_CASE("integration is linear and deterministic") {
  const QuadratureRule rule = disc_rule(0.1, 0.7, 24, 48);
  auto f = [](const Point& z) { return std::exp(z[0]); };
  auto g = [](const Point& z) { return cplx(std::norm(z[0]), 1.0); };
  const cplx a(0.3, -1.2);
  const double b = 2.5;
  const cplx lhs = integrate(rule, [&](const Point& z) { return a * f(z) + b * g(z); });
  const cplx rhs = a * integrate(rule, f) + b * integrate(rule, g);
  CHECK(std::abs(lhs - rhs) < 1e-14 * (1.0 + std::abs(rhs)));
  CHECK(integrate(rule, f) == integrate(rule, f));
}

TEST_CASE("cylinder volume and unitary invariance") {
  const Eigen::Matrix2cd I = Eigen::Matrix2cd::Identity();
  const QuadratureRule rule = cylinder_rule({0.0, 0.0}, 0.3, 0.3, I, 24, 48);
  CHECK(rule.size() == 24u * 48u * 24u * 48u);
  const double vol = pi * pi * 0.3 * 0.3 * 0.3 * 0.3;
  CHECK(rel(weight_sum(rule), vol) < 1e-11);
  for (const auto& A : sample_unitaries(7, 4)) {
    const QuadratureRule rot = cylinder_rule({0.1, -0.2}, 0.3, 0.3, A, 24, 48);
    CHECK(std::abs(weight_sum(rot) - weight_sum(rule)) <= 1e-11 * vol);
    // Nodes stay within the rotated cylinder's reach.
    for (std::size_t i = 0; i < rot.size(); i += 997) {
      const Point z = rot.node(i);
      CHECK(std::hypot(std::abs(z[0] - 0.1), std::abs(z[1] + 0.2)) <= std::hypot(0.3, 0.3) + 1e-12);
    }
  }
}

TEST_CASE("separable gaussian over a cylinder") {
  const double lambda = 1.3;
  const double r = 0.4;
  const double s = 0.25;
  const QuadratureRule rule =
      cylinder_rule({0.0, 0.0}, r, s, Eigen::Matrix2cd::Identity(), 32, 64);
  const cplx v = integrate(rule, [&](const Point& z) {
    return cplx(std::exp(-lambda * (std::norm(z[0]) + std::norm(z[1]))));
  });
  const double f1 = pi * (1.0 - std::exp(-lambda * r * r)) / lambda;
  const double f2 = pi * (1.0 - std::exp(-lambda * s * s)) / lambda;
  CHECK(rel(v.real(), f1 * f2) < 1e-9);
}

TEST_CASE("invalid rules are rejected") {
  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Config;
  };
  CHECK(kind_of([] { disc_rule(0.0, 0.0, 8, 8); }) == ErrorKind::InvalidParameter);
  CHECK(kind_of([] { disc_rule(0.0, 1.0, 1, 8); }) == ErrorKind::InvalidParameter);
  CHECK(kind_of([] { disc_rule(0.0, 1.0, 8, 3); }) == ErrorKind::InvalidParameter);
  Eigen::Matrix2cd B;
  B << 1.0, 0.1, 0.0, 1.0;
  CHECK(kind_of([&] { cylinder_rule({0.0, 0.0}, 0.3, 0.3, B, 8, 8); }) ==
        ErrorKind::InvalidParameter);
  CHECK(kind_of([] {
          const QuadratureRule rule = disc_rule(0.0, 1.0, 8, 8);
          integrate(rule, [](const Point& z) {
            return cplx(std::abs(z[0]) > 0.5 ? std::nan("") : 1.0);
          });
        }) == ErrorKind::NumericalEvaluation);
}

TEST_CASE("domain containment") {
  CHECK_NOTHROW(Region::disc(0.5, 0.5, 1.0).validate());
  CHECK_THROWS_AS(Region::disc(0.6, 0.5, 1.0).validate(), Error);
  try {
    Region::disc(0.6, 0.5, 1.0).validate();
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RegionOutsideDomain);
  }
  CHECK_NOTHROW(Region::disc(5.0, 0.5).validate());
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
  std::vector<double> x;
  std::vector<double> w;
  gauss_legendre(10, -1.0, 2.0, x, w);
  double s = 0.0;
  for (int i = 0; i < 10; ++i) s += w[i] * std::pow(x[i], 19);
  CHECK(rel(s, (std::pow(2.0, 20) - 1.0) / 20.0) < 1e-13);
}
