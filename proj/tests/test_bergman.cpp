#include <doctest.h>

#include <cmath>
#include <numbers>

#include "l2ext/bergman.hpp"

using namespace l2ext;
using std::numbers::pi;

namespace {

const Eigen::VectorXcd kOne = Eigen::VectorXcd::Ones(1);

double offdiag_max(const Eigen::MatrixXcd& G) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
      if (i != j) m = std::max(m, std::abs(G(i, j)));
    }
  }
  return m;
}

// Test weights shared by the structural properties below.
std::vector<WeightField> test_weights() {
  return {WeightField::zero(),
          WeightField::gaussian(1.0),
          WeightField::gaussian(-0.5, {0.1, 0.0}),
          WeightField::harmonic_re_poly({0.0, 1.0}),
          WeightField::expression("abs2(z) + re(z^2)"),
          WeightField::expression("abs2(z) + 0.3*re(z^4)"),
          WeightField::expression("log(1 + abs2(z))")};
}

}  // namespace

TEST_CASE("unweighted gram matrix on the unit disc") {
  const GramSystem sys = gram_line(disc_rule(0.0, 1.0, 64, 128), WeightField::zero(), 0.0, 1);
  CHECK(std::abs(sys.gram(0, 0) - pi) < 1e-10);
  CHECK(std::abs(sys.gram(1, 1) - pi / 2.0) < 1e-10);
  CHECK(std::abs(sys.gram(0, 1)) < 1e-10);
  CHECK(sys.constraint(0, 0) == cplx(1.0));
}

TEST_CASE("gaussian gram matrix is diagonal with the closed-form corner") {
  for (double lambda : {0.5, 2.0}) {
    const double r = 0.7;
    const GramSystem sys =
        gram_line(disc_rule(0.0, r, 64, 128), WeightField::gaussian(lambda), 0.0, 8);
    CHECK(offdiag_max(sys.gram) <= 1e-10 * sys.gram.norm());
    const double g00 = sys.gram(0, 0).real() * std::exp(-sys.log_shift);
    CHECK(std::abs(g00 - pi * (1.0 - std::exp(-lambda * r * r)) / lambda) < 1e-12);
  }
}

TEST_CASE("gram matrices are exactly hermitian") {
  for (const WeightField& w : test_weights()) {
    const GramSystem sys = gram_line(disc_rule(0.2, 0.4, 32, 64), w, 0.2, 10);
    CHECK(sys.gram == sys.gram.adjoint());
  }
}

TEST_CASE("vector gram matrices") {
  const auto rule = disc_rule(0.0, 1.0, 64, 128);
  const GramSystem id = gram_vector(rule, MetricField::constant(Eigen::MatrixXcd::Identity(2, 2)),
                                    0.0, 1);
  Eigen::VectorXcd d(4);
  d << pi, pi, pi / 2.0, pi / 2.0;
  CHECK((id.gram - Eigen::MatrixXcd(d.asDiagonal())).norm() < 1e-10);
  CHECK(id.constraint.cols() == 2);

  const auto rule2 = disc_rule(0.0, 0.6, 64, 128);
  const GramSystem scalar = gram_line(rule2, WeightField::gaussian(1.0), 0.0, 6);
  const GramSystem vec = gram_vector(
      rule2, MetricField::from_entries(2, {"exp(-abs2(z))", "0", "exp(-abs2(z))"}), 0.0, 6);
  for (int j = 0; j <= 6; ++j) {
    for (int k = 0; k <= 6; ++k) {
      for (int l = 0; l < 2; ++l) {
        CHECK(std::abs(vec.gram(2 * j + l, 2 * k + l) - scalar.gram(j, k)) < 1e-12);
        CHECK(std::abs(vec.gram(2 * j + l, 2 * k + 1 - l)) < 1e-15);
      }
    }
  }
  Eigen::MatrixXcd H0(2, 2);
  H0 << 2.0, 1.0, 1.0, 1.0;
  const GramSystem pd = gram_vector(rule2, MetricField::constant(H0), 0.0, 3);
  CHECK(pd.gram.llt().info() == Eigen::Success);
}

TEST_CASE("cylinder gram matrices") {
  const Eigen::Matrix2cd I = Eigen::Matrix2cd::Identity();
  const double r = 0.3;
  const double s = 0.4;
  const GramSystem flat = gram_cylinder(cylinder_rule({0.0, 0.0}, r, s, I, 16, 32),
                                        WeightField::zero(Binding::Z1Z2), {0.0, 0.0}, 3);
  CHECK(offdiag_max(flat.gram) < 1e-12);
  CHECK(std::abs(flat.gram(0, 0) - pi * pi * r * r * s * s) < 1e-12);

  const double lambda = 1.5;
  const GramSystem sep =
      gram_cylinder(cylinder_rule({0.0, 0.0}, r, s, I, 24, 48),
                    WeightField::expression("1.5*(abs2(z1) + abs2(z2))"), {0.0, 0.0}, 3);
  CHECK(offdiag_max(sep.gram) < 1e-10 * sep.gram.norm());
  const double g1 = pi * (1.0 - std::exp(-lambda * r * r)) / lambda;
  const double g2 = pi * (1.0 - std::exp(-lambda * s * s)) / lambda;
  CHECK(std::abs(sep.gram(0, 0).real() / (g1 * g2) - 1.0) < 1e-10);

  CHECK_NOTHROW(gram_cylinder(cylinder_rule({0.0, 0.0}, 0.3, 0.3, I, 16, 32),
                              WeightField::expression("2*re(z1*z2)"), {0.0, 0.0}, 6));
}

TEST_CASE("unweighted extension is the constant") {
  for (double r : {0.2, 1.0, 2.5}) {
    const GramSystem sys = gram_line(disc_rule(0.5, r, 32, 64), WeightField::zero(), 0.5, 8);
    const ExtensionResult e = min_norm_solve(sys, kOne);
    CHECK(std::abs(e.min_norm / (pi * r * r) - 1.0) < 1e-12);
    CHECK(std::abs(e.coefficients(0) - 1.0) < 1e-12);
    CHECK(e.coefficients.tail(8).norm() < 1e-10);
    CHECK(e.converged);
  }
}

TEST_CASE("gaussian minimum norm") {
  const double lambda = 1.0;
  const double r = 0.5;
  const GramSystem sys =
      gram_line(disc_rule(0.0, r, 64, 128), WeightField::gaussian(lambda), 0.0, 16);
  const ExtensionResult e = min_norm_solve(sys, kOne);
  CHECK(std::abs(e.min_norm / (pi * (1.0 - std::exp(-lambda * r * r)) / lambda) - 1.0) < 1e-12);
  CHECK(std::abs(e.kernel_value * e.min_norm - 1.0) < 1e-12);
}

TEST_CASE("harmonic achiever is the exponential") {
  // phi = 2 Re(c z): the extension e^{c z} has |f|^2 e^{-phi} = 1.
  const GramSystem sys =
      gram_line(disc_rule(0.0, 0.5, 64, 128), WeightField::harmonic_re_poly({0.0, 1.0}), 0.0, 16);
  const ExtensionResult e = min_norm_solve(sys, kOne);
  double factorial = 1.0;
  for (int k = 0; k <= 16; ++k) {
    if (k > 0) factorial *= k;
    CHECK(std::abs(e.coefficients(k) - 1.0 / factorial) < 1e-6);
  }
  CHECK(std::abs(e.coefficients(0) - 1.0) < 1e-12);
}

TEST_CASE("truncation monotonicity and kernel identity") {
  for (const WeightField& w : test_weights()) {
    const auto rule = disc_rule(0.1, 0.6, 64, 128);
    double prev = std::numeric_limits<double>::infinity();
    for (int n = 0; n <= 16; ++n) {
      const ExtensionResult e = min_norm_solve(gram_line(rule, w, 0.1, n), kOne);
      CHECK(e.min_norm <= prev * (1.0 + 1e-12));
      CHECK(std::abs(e.kernel_value * e.min_norm - 1.0) < 1e-12);
      CHECK(std::abs(e.coefficients(0) - 1.0) < 1e-14);
      prev = e.min_norm;
    }
  }
}

TEST_CASE("quadrature refinement barely moves the minimum") {
  for (const WeightField& w : test_weights()) {
    const ExtensionResult a = min_norm_solve(gram_line(disc_rule(0.0, 0.5, 64, 128), w, 0.0, 12), kOne);
    const ExtensionResult b = min_norm_solve(gram_line(disc_rule(0.0, 0.5, 128, 256), w, 0.0, 12), kOne);
    CHECK(std::abs(a.min_norm / b.min_norm - 1.0) < 1e-9);
  }
}

TEST_CASE("vector problem with a conformal metric reduces to the scalar one") {
  Eigen::MatrixXcd H0(2, 2);
  H0 << 2.0, cplx(0.5, 0.5), cplx(0.5, -0.5), 1.0;
  const MetricField m = MetricField::from_entries(
      2, {"2*exp(-abs2(z))", "(0.5 + 0.5*i)*exp(-abs2(z))", "exp(-abs2(z))"});
  const auto rule = disc_rule(0.0, 0.5, 64, 128);
  const ExtensionResult s = min_norm_solve(gram_line(rule, WeightField::gaussian(1.0), 0.0, 10), kOne);
  const GramSystem vsys = gram_vector(rule, m, 0.0, 10);
  for (const auto& xi : {Eigen::Vector2cd(1.0, 0.0), Eigen::Vector2cd(1.0, 1.0),
                         Eigen::Vector2cd(2.0, cplx(0.0, -1.0))}) {
    const Eigen::VectorXcd x = xi;
    const ExtensionResult v = min_norm_solve(vsys, x);
    const double q = (x.adjoint() * H0 * x)(0, 0).real();
    CHECK(std::abs(v.min_norm / (s.min_norm * q) - 1.0) < 1e-9);
  }
}

TEST_CASE("norm bookkeeping") {
  const GramSystem sys = gram_line(disc_rule(0.2, 0.5, 32, 64),
                                   WeightField::expression("abs2(z) + re(z^2)"), 0.2, 8);
  const ExtensionResult e = min_norm_solve(sys, kOne);
  CHECK(std::abs(extension_norm(sys, e.coefficients) / e.min_norm - 1.0) < 1e-12);
  Eigen::VectorXcd d = Eigen::VectorXcd::Zero(9);
  d(1) = 1e-3;
  CHECK(norm_increase(sys, e.coefficients, d) > 0.0);
  const double direct = extension_norm(sys, e.coefficients + d) - extension_norm(sys, e.coefficients);
  CHECK(std::abs(norm_increase(sys, e.coefficients, d) - direct) < 1e-12);
}

TEST_CASE("errors") {
  const GramSystem sys = gram_line(disc_rule(0.0, 0.5, 16, 32), WeightField::zero(), 0.0, 4);
  CHECK_THROWS_AS(min_norm_solve(sys, Eigen::VectorXcd::Zero(1)), Error);
  CHECK_THROWS_AS(gram_line(disc_rule(0.0, 0.5, 16, 32), WeightField::zero(), 0.1, 4), Error);
  try {
    // More monomials than the rule can resolve.
    gram_line(disc_rule(0.0, 0.5, 8, 16), WeightField::zero(), 0.0, 160);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IllConditioned);
    CHECK(e.condition().has_value());
  }
}
