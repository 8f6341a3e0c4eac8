#include "l2ext/index.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "l2ext/numeric.hpp"

namespace l2ext {

namespace {

void check_radius(double r, const char* name) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw Error(ErrorKind::InvalidParameter, std::string(name) + " must be positive");
  }
}

cplx standard_normal(std::mt19937_64& rng) {
  // Box-Muller on 53-bit uniforms so the stream is identical across
  // standard library implementations.
  auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  const double u1 = uniform();
  const double u2 = uniform();
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(ang) / std::sqrt(2.0), rad * std::sin(ang) / std::sqrt(2.0)};
}

template <class Compute>
IndexProfile run_profile(BasisKind kind, std::string source, Resolution res,
                         const std::vector<ProfilePoint>& grid, Compute compute) {
  IndexProfile profile;
  profile.kind = kind;
  profile.source = std::move(source);
  profile.resolution = res;
  profile.rows.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    ProfileRow& row = profile.rows[i];
    row.point = grid[i];
    try {
      const IndexResult result = compute(grid[i]);
      row.L = result.L;
      row.degree = result.extension.degree;
      row.converged = result.extension.converged;
      row.condition = result.extension.condition;
    } catch (const Error& e) {
      row.error = e.kind();
      row.message = e.what();
      if (e.condition()) row.condition = *e.condition();
    }
  });
  for (const ProfileRow& row : profile.rows) {
    if (row.error || !row.converged) profile.partial = true;
  }
  return profile;
}

}  // namespace

IndexResult l2_index_line(const WeightField& w, cplx a, double r, const IndexOptions& opts) {
  check_radius(r, "radius");
  const Region region = Region::disc(a, r, opts.domain_radius);
  region.validate();
  const QuadratureRule rule = disc_rule(a, r, opts.resolution.n_rad, opts.resolution.n_ang);
  auto sys_ptr = std::make_shared<const GramSystem>(gram_line(rule, w, a, opts.degree));
  const GramSystem& sys = *sys_ptr;
  IndexResult out;
  out.extension = min_norm_solve(sys, Eigen::VectorXcd::Ones(1));
  out.normalizer = region.measure() * std::exp(-sys.log_shift);
  out.L = out.extension.min_norm / out.normalizer;
  out.region = region;
  out.system = sys_ptr;
  out.source = w.describe();
  return out;
}

IndexResult l2_index_vector(const MetricField& m, cplx a, double r, const Eigen::VectorXcd& xi,
                            const IndexOptions& opts) {
  check_radius(r, "radius");
  if (xi.size() != m.rank()) {
    throw Error(ErrorKind::InvalidParameter, "fiber vector length does not match the metric rank");
  }
  if (xi.squaredNorm() == 0.0) {
    throw Error(ErrorKind::InvalidParameter, "fiber vector must be non-zero");
  }
  const Region region = Region::disc(a, r, opts.domain_radius);
  region.validate();
  const QuadratureRule rule = disc_rule(a, r, opts.resolution.n_rad, opts.resolution.n_ang);
  auto sys_ptr = std::make_shared<const GramSystem>(gram_vector(rule, m, a, opts.degree));
  const GramSystem& sys = *sys_ptr;
  const Eigen::MatrixXcd Ha = m.eval(a);
  IndexResult out;
  out.extension = min_norm_solve(sys, xi);
  out.normalizer = region.measure() * (xi.adjoint() * Ha * xi)(0, 0).real();
  out.L = out.extension.min_norm / out.normalizer;
  out.region = region;
  out.system = sys_ptr;
  out.source = m.describe();
  out.xi = xi;
  return out;
}

IndexResult l2_index_cylinder(const WeightField& w, Point a, double r, double s,
                              const Eigen::Matrix2cd& A, const IndexOptions& opts) {
  check_radius(r, "radius r");
  check_radius(s, "radius s");
  const Region region = Region::cylinder(a, r, s, A, opts.domain_radius);
  region.validate();
  const QuadratureRule rule = cylinder_rule(a, r, s, A, opts.cylinder_resolution.n_rad,
                                            opts.cylinder_resolution.n_ang);
  auto sys_ptr =
      std::make_shared<const GramSystem>(gram_cylinder(rule, w, a, opts.cylinder_degree));
  const GramSystem& sys = *sys_ptr;
  IndexResult out;
  out.extension = min_norm_solve(sys, Eigen::VectorXcd::Ones(1));
  out.normalizer = region.measure() * std::exp(-sys.log_shift);
  out.L = out.extension.min_norm / out.normalizer;
  out.region = region;
  out.system = sys_ptr;
  out.source = w.describe();
  return out;
}

IndexProfile index_profile(const WeightField& w, const std::vector<ProfilePoint>& grid,
                           const IndexOptions& opts) {
  return run_profile(BasisKind::Line, w.describe(), opts.resolution, grid,
                     [&](const ProfilePoint& p) { return l2_index_line(w, p.a[0], p.r, opts); });
}

IndexProfile index_profile(const MetricField& m, const std::vector<ProfilePoint>& grid,
                           const IndexOptions& opts) {
  return run_profile(BasisKind::Vector, m.describe(), opts.resolution, grid,
                     [&](const ProfilePoint& p) {
                       return l2_index_vector(m, p.a[0], p.r, p.xi, opts);
                     });
}

IndexProfile index_profile_cylinder(const WeightField& w, const std::vector<ProfilePoint>& grid,
                                    const IndexOptions& opts) {
  return run_profile(BasisKind::Cylinder, w.describe(), opts.cylinder_resolution, grid,
                     [&](const ProfilePoint& p) {
                       return l2_index_cylinder(w, p.a, p.r, p.s, p.A, opts);
                     });
}

std::vector<ScaledIndexRow> scaled_index(const WeightField& w, cplx a, double r,
                                         const std::vector<int>& m_list,
                                         const IndexOptions& opts) {
  std::vector<ScaledIndexRow> rows;
  rows.reserve(m_list.size());
  for (int m : m_list) {
    if (m < 1) throw Error(ErrorKind::InvalidParameter, "scaling factors m must be >= 1");
    const IndexResult result = l2_index_line(w.scaled(m), a, r, opts);
    rows.push_back({m, std::log(result.L) / m});
  }
  return rows;
}

std::vector<Eigen::Matrix2cd> sample_unitaries(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Matrix2cd> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int n = 0; n < count; ++n) {
    Eigen::Matrix2cd Z;
    for (int j = 0; j < 2; ++j) {
      for (int i = 0; i < 2; ++i) Z(i, j) = standard_normal(rng);
    }
    Eigen::Vector2cd q0 = Z.col(0).normalized();
    Eigen::Vector2cd q1 = Z.col(1) - q0 * q0.dot(Z.col(1));
    q1 -= q0 * q0.dot(q1);  // second pass keeps the defect near roundoff
    q1.normalize();
    Eigen::Matrix2cd Q;
    Q << q0, q1;
    out.push_back(Q);
  }
  return out;
}

std::vector<Eigen::VectorXcd> sample_fiber_vectors(int rank, std::uint64_t seed, int extra) {
  if (rank < 1) throw Error(ErrorKind::InvalidParameter, "rank must be >= 1");
  std::vector<Eigen::VectorXcd> out;
  for (int l = 0; l < rank; ++l) out.push_back(Eigen::VectorXcd::Unit(rank, l));
  if (rank == 2) {
    Eigen::VectorXcd v(2);
    v << 1.0, 1.0;
    out.push_back(v);
    v << 1.0, cplx(0.0, -1.0);
    out.push_back(v);
  }
  std::mt19937_64 rng(seed);
  for (int n = 0; n < extra; ++n) {
    Eigen::VectorXcd v(rank);
    for (int l = 0; l < rank; ++l) v(l) = standard_normal(rng);
    out.push_back(v.normalized());
  }
  return out;
}

}  // namespace l2ext
