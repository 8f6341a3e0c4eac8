#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "l2ext/bergman.hpp"

namespace l2ext {

struct IndexOptions {
  int degree = 16;
  Resolution resolution{64, 128};
  /// Degree per variable and per-factor resolution for cylinders.
  int cylinder_degree = 10;
  Resolution cylinder_resolution{24, 48};
  std::optional<double> domain_radius;
};

struct IndexResult {
  double L = 0.0;
  ExtensionResult extension;
  double normalizer = 0.0;
  Region region;
  std::string source;  // weight or metric description
  Eigen::VectorXcd xi;  // vector case only
  /// The assembled system, kept for perturbation tests on the achiever.
  std::shared_ptr<const GramSystem> system;
};

/// L = min int_D |f|^2 e^{-phi} / (pi r^2 e^{-phi(a)}) over f(a) = 1.
IndexResult l2_index_line(const WeightField& w, cplx a, double r, const IndexOptions& opts = {});

/// L = min int_D s^H H s / (pi r^2 xi^H H(a) xi) over s(a) = xi.
IndexResult l2_index_vector(const MetricField& m, cplx a, double r, const Eigen::VectorXcd& xi,
                            const IndexOptions& opts = {});

/// L over a + A(D_r x D_s), normalized by pi^2 r^2 s^2 e^{-phi(a)}.
IndexResult l2_index_cylinder(const WeightField& w, Point a, double r, double s,
                              const Eigen::Matrix2cd& A, const IndexOptions& opts = {});

struct ProfilePoint {
  Point a{};
  double r = 0.0;
  double s = 0.0;                 // cylinder only
  Eigen::Matrix2cd A = Eigen::Matrix2cd::Identity();  // cylinder only
  Eigen::VectorXcd xi;            // vector only
};

struct ProfileRow {
  ProfilePoint point;
  double L = 0.0;
  int degree = 0;
  bool converged = false;
  double condition = 0.0;
  std::optional<ErrorKind> error;
  std::string message;
};

struct IndexProfile {
  BasisKind kind = BasisKind::Line;
  std::vector<ProfileRow> rows;
  bool partial = false;
  std::string source;
  Resolution resolution;
};

/// One row per point, in the given order. A failing row records its error
/// and marks the profile partial instead of aborting the sweep.
IndexProfile index_profile(const WeightField& w, const std::vector<ProfilePoint>& grid,
                           const IndexOptions& opts = {});
IndexProfile index_profile(const MetricField& m, const std::vector<ProfilePoint>& grid,
                           const IndexOptions& opts = {});
IndexProfile index_profile_cylinder(const WeightField& w, const std::vector<ProfilePoint>& grid,
                                    const IndexOptions& opts = {});

struct ScaledIndexRow {
  int m = 1;
  double value = 0.0;  // log L_{m phi}(a, r) / m
};

std::vector<ScaledIndexRow> scaled_index(const WeightField& w, cplx a, double r,
                                         const std::vector<int>& m_list,
                                         const IndexOptions& opts = {});

/// Seeded unitaries: complex Gaussian matrices orthonormalized by
/// Gram-Schmidt.
std::vector<Eigen::Matrix2cd> sample_unitaries(std::uint64_t seed, int count);

/// {e1, e2, e1 + e2, e1 - i e2} followed by `extra` seeded random unit
/// vectors (rank 2); for other ranks the standard basis plus random vectors.
std::vector<Eigen::VectorXcd> sample_fiber_vectors(int rank, std::uint64_t seed, int extra);

}  // namespace l2ext
