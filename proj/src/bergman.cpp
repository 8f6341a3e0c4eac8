#include "l2ext/bergman.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "l2ext/numeric.hpp"

namespace l2ext {

namespace {

void require_center(const QuadratureRule& rule, const Point& a, RegionKind kind, const char* what) {
  if (rule.region().kind != kind) {
    throw Error(ErrorKind::InvalidParameter, std::string(what) + ": wrong quadrature rule kind");
  }
  const int dims = kind == RegionKind::Disc ? 1 : 2;
  for (int d = 0; d < dims; ++d) {
    const double tol = 1e-14 * std::max(1.0, std::abs(a[d]));
    if (std::abs(rule.region().center[d] - a[d]) > tol) {
      throw Error(ErrorKind::InvalidParameter,
                  std::string(what) + ": quadrature rule is not centered at the given point");
    }
  }
}

void require_degree(int degree) {
  if (degree < 0) throw Error(ErrorKind::InvalidParameter, "basis degree must be non-negative");
}

/// e^{-(phi - shift)} * weight at every node, evaluated in parallel.
std::vector<double> weighted_exponentials(const QuadratureRule& rule, const WeightField& w,
                                          double shift) {
  const std::size_t n = rule.size();
  std::vector<double> out(n);
  const int arity = w.arity();
  parallel_for(n, [&](std::size_t i) {
    const Point z = rule.node(i);
    const double phi = w.eval(std::span<const cplx>(z.data(), arity));
    const double e = std::exp(-(phi - shift));
    if (!std::isfinite(e)) {
      throw Error(ErrorKind::NumericalEvaluation,
                  "e^{-phi} overflows at node " + std::to_string(i) + " " + format_complex(z[0]));
    }
    out[i] = rule.weight(i) * e;
  });
  return out;
}

/// Power table: row n holds u_n^0 .. u_n^degree.
Eigen::MatrixXcd power_table(std::span<const cplx> u, int degree) {
  Eigen::MatrixXcd P(static_cast<Eigen::Index>(u.size()), degree + 1);
  for (std::size_t n = 0; n < u.size(); ++n) {
    cplx acc = 1.0;
    for (int k = 0; k <= degree; ++k) {
      P(static_cast<Eigen::Index>(n), k) = acc;
      acc *= u[n];
    }
  }
  return P;
}

void mirror_hermitian(Eigen::MatrixXcd& G) {
  for (Eigen::Index j = 0; j < G.rows(); ++j) {
    G(j, j) = G(j, j).real();
    for (Eigen::Index k = j + 1; k < G.cols(); ++k) G(k, j) = std::conj(G(j, k));
  }
}

/// Factorizes the solver matrix G^T and records the condition estimate;
/// rejects non-factorizable or badly conditioned systems.
void finish_system(GramSystem& sys) {
  mirror_hermitian(sys.gram);
  const Eigen::MatrixXcd Q = sys.gram.transpose();
  Eigen::LLT<Eigen::MatrixXcd> llt(Q);
  if (llt.info() != Eigen::Success) {
    throw Error::ill_conditioned(std::numeric_limits<double>::infinity(),
                                 "Gram matrix is not positive definite (degree " +
                                     std::to_string(sys.degree) + ")");
  }
  const double rcond = llt.rcond();
  sys.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(sys.condition <= kMaxCondition)) {
    throw Error::ill_conditioned(sys.condition, "Gram matrix condition estimate " +
                                                    std::to_string(sys.condition) +
                                                    " exceeds 1e12 (degree " +
                                                    std::to_string(sys.degree) + ")");
  }
}

struct Solve {
  double min_norm;       // scaled units
  Eigen::VectorXcd coef;  // scaled basis, full length
  double kernel00;       // (Q^{-1})_{00}, scaled units
};

Solve solve_subset(const GramSystem& sys, const std::vector<Eigen::Index>& idx,
                   const Eigen::VectorXcd& target) {
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXcd Q(m, m);
  Eigen::MatrixXcd V(m, sys.rank);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) Q(a, b) = sys.gram(idx[b], idx[a]);
    V.row(a) = sys.constraint.row(idx[a]);
  }
  Eigen::LLT<Eigen::MatrixXcd> llt(Q);
  if (llt.info() != Eigen::Success) {
    throw Error::ill_conditioned(std::numeric_limits<double>::infinity(),
                                 "Gram matrix factorization failed");
  }
  const Eigen::MatrixXcd Y = llt.solve(V);
  Eigen::MatrixXcd R = V.adjoint() * Y;
  R = 0.5 * (R + R.adjoint()).eval();
  Eigen::LLT<Eigen::MatrixXcd> rllt(R);
  if (rllt.info() != Eigen::Success) {
    throw Error::ill_conditioned(std::numeric_limits<double>::infinity(),
                                 "reduced constraint matrix is singular");
  }
  const Eigen::VectorXcd x = rllt.solve(target);
  Solve out;
  out.min_norm = target.dot(x).real();
  Eigen::VectorXcd c = Y * x;
  out.coef = Eigen::VectorXcd::Zero(sys.size());
  for (Eigen::Index a = 0; a < m; ++a) out.coef(idx[a]) = c(a);
  out.kernel00 = Y(0, 0).real();
  return out;
}

/// Per-basis factor converting scaled coefficients to unscaled ones.
Eigen::VectorXd unscale_factors(const GramSystem& sys) {
  Eigen::VectorXd f(sys.size());
  for (Eigen::Index i = 0; i < sys.size(); ++i) {
    const auto [p, q] = sys.basis[static_cast<std::size_t>(i)];
    if (sys.kind == BasisKind::Cylinder) {
      f(i) = std::pow(sys.region.r, -p) * std::pow(sys.region.s, -q);
    } else {
      f(i) = std::pow(sys.region.r, -p);
    }
  }
  return f;
}

}  // namespace

GramSystem gram_line(const QuadratureRule& rule, const WeightField& w, cplx a, int degree) {
  require_center(rule, {a, 0.0}, RegionKind::Disc, "gram_line");
  require_degree(degree);
  if (w.binding() != Binding::Z) {
    throw Error(ErrorKind::InvalidParameter, "gram_line needs a weight in the variable z");
  }
  GramSystem sys;
  sys.kind = BasisKind::Line;
  sys.degree = degree;
  sys.rank = 1;
  sys.region = rule.region();
  sys.log_shift = w(a);
  const int M = degree + 1;
  for (int k = 0; k < M; ++k) sys.basis.push_back({k, 0});

  const std::vector<double> e = weighted_exponentials(rule, w, sys.log_shift);
  std::vector<cplx> u(rule.size());
  for (std::size_t n = 0; n < u.size(); ++n) u[n] = rule.local(n)[0] / sys.region.r;
  const Eigen::MatrixXcd P = power_table(u, degree);

  std::vector<CompensatedComplexSum> acc(static_cast<std::size_t>(M) * M);
  for (std::size_t n = 0; n < u.size(); ++n) {
    const auto row = static_cast<Eigen::Index>(n);
    for (int j = 0; j < M; ++j) {
      const cplx pj = e[n] * P(row, j);
      for (int k = j; k < M; ++k) acc[j * M + k].add(pj * std::conj(P(row, k)));
    }
  }
  sys.gram.resize(M, M);
  for (int j = 0; j < M; ++j) {
    for (int k = j; k < M; ++k) sys.gram(j, k) = acc[j * M + k].value();
  }
  sys.constraint = Eigen::MatrixXcd::Zero(M, 1);
  sys.constraint(0, 0) = 1.0;
  finish_system(sys);
  return sys;
}

GramSystem gram_vector(const QuadratureRule& rule, const MetricField& m, cplx a, int degree) {
  require_center(rule, {a, 0.0}, RegionKind::Disc, "gram_vector");
  require_degree(degree);
  const int rho = m.rank();
  GramSystem sys;
  sys.kind = BasisKind::Vector;
  sys.degree = degree;
  sys.rank = rho;
  sys.region = rule.region();
  const int K = degree + 1;
  const int M = K * rho;
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < rho; ++l) sys.basis.push_back({k, l});
  }

  const std::size_t n_nodes = rule.size();
  std::vector<Eigen::MatrixXcd> H(n_nodes);
  parallel_for(n_nodes, [&](std::size_t n) { H[n] = m.eval(rule.node(n)[0]); });
  std::vector<cplx> u(n_nodes);
  for (std::size_t n = 0; n < n_nodes; ++n) u[n] = rule.local(n)[0] / sys.region.r;
  const Eigen::MatrixXcd P = power_table(u, degree);

  // G((j,l),(k,m)) = sum w b_j conj(b_k) H(m,l)
  std::vector<CompensatedComplexSum> acc(static_cast<std::size_t>(M) * M);
  for (std::size_t n = 0; n < n_nodes; ++n) {
    const auto row = static_cast<Eigen::Index>(n);
    const double wn = rule.weight(n);
    for (int i1 = 0; i1 < M; ++i1) {
      const int j = i1 / rho;
      const int l = i1 % rho;
      const cplx pj = wn * P(row, j);
      for (int i2 = i1; i2 < M; ++i2) {
        const int k = i2 / rho;
        const int mu = i2 % rho;
        acc[i1 * M + i2].add(pj * std::conj(P(row, k)) * H[n](mu, l));
      }
    }
  }
  sys.gram.resize(M, M);
  for (int i1 = 0; i1 < M; ++i1) {
    for (int i2 = i1; i2 < M; ++i2) sys.gram(i1, i2) = acc[i1 * M + i2].value();
  }
  sys.constraint = Eigen::MatrixXcd::Zero(M, rho);
  for (int l = 0; l < rho; ++l) sys.constraint(l, l) = 1.0;
  finish_system(sys);
  return sys;
}

GramSystem gram_cylinder(const QuadratureRule& rule, const WeightField& w, Point a, int degree) {
  require_center(rule, a, RegionKind::Cylinder, "gram_cylinder");
  require_degree(degree);
  if (w.binding() != Binding::Z1Z2) {
    throw Error(ErrorKind::InvalidParameter, "gram_cylinder needs a weight in (z1, z2)");
  }
  GramSystem sys;
  sys.kind = BasisKind::Cylinder;
  sys.degree = degree;
  sys.rank = 1;
  sys.region = rule.region();
  sys.log_shift = w(a[0], a[1]);
  const int K = degree + 1;
  const int M = K * K;
  for (int j = 0; j < K; ++j) {
    for (int k = 0; k < K; ++k) sys.basis.push_back({j, k});
  }

  const std::vector<double> e = weighted_exponentials(rule, w, sys.log_shift);
  const auto f1 = rule.factor_nodes(0);
  const auto f2 = rule.factor_nodes(1);
  std::vector<cplx> u(f1.size());
  std::vector<cplx> v(f2.size());
  for (std::size_t p = 0; p < f1.size(); ++p) u[p] = f1[p] / sys.region.r;
  for (std::size_t q = 0; q < f2.size(); ++q) v[q] = f2[q] / sys.region.s;
  const Eigen::MatrixXcd Pu = power_table(u, degree);
  const Eigen::MatrixXcd Pv = power_table(v, degree);

  // Stage 1: T_p(k1, k2) = sum_q e(p, q) v_q^k1 conj(v_q^k2), k1 <= k2.
  const std::size_t np = f1.size();
  const std::size_t nq = f2.size();
  std::vector<Eigen::MatrixXcd> T(np);
  parallel_for(np, [&](std::size_t p) {
    std::vector<CompensatedComplexSum> acc(static_cast<std::size_t>(K) * K);
    for (std::size_t q = 0; q < nq; ++q) {
      const double epq = e[p * nq + q];
      const auto row = static_cast<Eigen::Index>(q);
      for (int k1 = 0; k1 < K; ++k1) {
        const cplx a1 = epq * Pv(row, k1);
        for (int k2 = k1; k2 < K; ++k2) acc[k1 * K + k2].add(a1 * std::conj(Pv(row, k2)));
      }
    }
    Eigen::MatrixXcd t(K, K);
    for (int k1 = 0; k1 < K; ++k1) {
      t(k1, k1) = acc[k1 * K + k1].value().real();
      for (int k2 = k1 + 1; k2 < K; ++k2) {
        t(k1, k2) = acc[k1 * K + k2].value();
        t(k2, k1) = std::conj(t(k1, k2));
      }
    }
    T[p] = std::move(t);
  });

  // Stage 2: G((j1,k1),(j2,k2)) = sum_p u_p^j1 conj(u_p^j2) T_p(k1, k2).
  std::vector<CompensatedComplexSum> acc(static_cast<std::size_t>(M) * M);
  for (std::size_t p = 0; p < np; ++p) {
    const auto row = static_cast<Eigen::Index>(p);
    for (int i1 = 0; i1 < M; ++i1) {
      const int j1 = i1 / K;
      const int k1 = i1 % K;
      for (int i2 = i1; i2 < M; ++i2) {
        const int j2 = i2 / K;
        const int k2 = i2 % K;
        acc[i1 * M + i2].add(Pu(row, j1) * std::conj(Pu(row, j2)) * T[p](k1, k2));
      }
    }
  }
  sys.gram.resize(M, M);
  for (int i1 = 0; i1 < M; ++i1) {
    for (int i2 = i1; i2 < M; ++i2) sys.gram(i1, i2) = acc[i1 * M + i2].value();
  }
  sys.constraint = Eigen::MatrixXcd::Zero(M, 1);
  sys.constraint(0, 0) = 1.0;
  finish_system(sys);
  return sys;
}

ExtensionResult min_norm_solve(const GramSystem& sys, const Eigen::VectorXcd& target) {
  if (target.size() != sys.rank) {
    throw Error(ErrorKind::InvalidParameter, "target length does not match the bundle rank");
  }
  if (target.squaredNorm() == 0.0 || !target.allFinite()) {
    throw Error(ErrorKind::InvalidParameter, "target must be a finite non-zero vector");
  }
  std::vector<Eigen::Index> all(static_cast<std::size_t>(sys.size()));
  for (Eigen::Index i = 0; i < sys.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  const Solve full = solve_subset(sys, all, target);
  const double unshift = std::exp(-sys.log_shift);

  ExtensionResult out;
  out.degree = sys.degree;
  out.condition = sys.condition;
  out.min_norm = full.min_norm * unshift;
  if (!(out.min_norm > 0.0) || !std::isfinite(out.min_norm)) {
    throw Error(ErrorKind::NumericalEvaluation, "minimum norm is not a positive finite number");
  }
  if (sys.rank == 1) out.kernel_value = full.kernel00 * std::exp(sys.log_shift);
  out.coefficients = full.coef.cwiseProduct(unscale_factors(sys).cast<cplx>());

  out.previous_min_norm = std::numeric_limits<double>::quiet_NaN();
  if (sys.degree >= 2) {
    std::vector<Eigen::Index> lower;
    for (Eigen::Index i = 0; i < sys.size(); ++i) {
      const auto [p, q] = sys.basis[static_cast<std::size_t>(i)];
      const bool keep = sys.kind == BasisKind::Cylinder
                            ? (p <= sys.degree - 2 && q <= sys.degree - 2)
                            : p <= sys.degree - 2;
      if (keep) lower.push_back(i);
    }
    const Solve prev = solve_subset(sys, lower, target);
    out.previous_min_norm = prev.min_norm * unshift;
    out.converged = (prev.min_norm - full.min_norm) <= 1e-10 * full.min_norm;
  }
  return out;
}

double extension_norm(const GramSystem& sys, const Eigen::VectorXcd& coefficients) {
  const Eigen::VectorXcd c = coefficients.cwiseQuotient(unscale_factors(sys).cast<cplx>());
  const Eigen::MatrixXcd Q = sys.gram.transpose();
  return (c.adjoint() * Q * c)(0, 0).real() * std::exp(-sys.log_shift);
}

double norm_increase(const GramSystem& sys, const Eigen::VectorXcd& coefficients,
                     const Eigen::VectorXcd& direction) {
  const Eigen::VectorXd f = unscale_factors(sys);
  const Eigen::VectorXcd c = coefficients.cwiseQuotient(f.cast<cplx>());
  const Eigen::VectorXcd d = direction.cwiseQuotient(f.cast<cplx>());
  const Eigen::MatrixXcd Q = sys.gram.transpose();
  const double cross = (d.adjoint() * Q * c)(0, 0).real();
  const double quad = (d.adjoint() * Q * d)(0, 0).real();
  return (2.0 * cross + quad) * std::exp(-sys.log_shift);
}

}  // namespace l2ext
