#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2ext/curvature.hpp"

namespace l2ext {

using json = nlohmann::json;

struct VerifyRow {
  std::string label;
  json inputs = json::object();
  json computed = json::object();
  double bound = 0.0;
  double margin = 0.0;
  bool pass = false;
  /// Adversarial rows: the suite succeeds on them only when they fail.
  bool expected_fail = false;

  bool ok() const { return pass != expected_fail; }
  bool operator==(const VerifyRow&) const = default;
};

struct Provenance {
  std::string config_hash;
  Resolution resolution;
  int degree = 0;
  std::uint64_t seed = 0;
  bool operator==(const Provenance&) const = default;
};

struct VerificationReport {
  std::string suite;
  std::vector<VerifyRow> rows;
  bool overall = false;
  std::map<std::string, double> tolerances;
  Provenance provenance;
  json config = json::object();

  bool operator==(const VerificationReport&) const = default;
};

/// Every tolerance a suite uses; echoed into its report.
struct VerifyOptions {
  IndexOptions index;
  FitWindow window;
  std::uint64_t seed = 0;
  double fit_tolerance = 0.02;      // relative to (1 + |phi_zzbar|)
  double harmonic_tolerance = 1e-6;
  double curvature_tolerance = 1e-6;
  double cylinder_tolerance = 1e-4;
  double mixed_tolerance = 1e-6;
  double perturbation = 1e-3;
  double scaled_tolerance = 1e-9;
  /// Effective configuration, hashed into the provenance.
  json config = json::object();
};

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const json& config);

/// phi_zzbar(a) >= -2 sup_k log L(a, r_k)/r_k^2 - tol and >= g_hat - tol.
VerificationReport verify_index_to_curvature(const WeightField& w, const std::vector<cplx>& samples,
                                             const VerifyOptions& opts = {});

/// Direction A per (a, eps): the longest ladder prefix on which
/// L <= e^{-max((g - eps)/2, 0) r^2}, g = phi_zzbar(a); rows with eps < 0
/// are adversarial. Direction B per a: g_hat >= g - tol.
VerificationReport verify_equivalence_scalar(const WeightField& w, const std::vector<cplx>& samples,
                                             const std::vector<double>& eps_list,
                                             const VerifyOptions& opts = {});

/// L = 1 and zero curvature on each cell, plus a strictly positive norm
/// increase when the achiever is perturbed along (z - a). With
/// expect_harmonic = false every row is adversarial.
VerificationReport verify_harmonic_flat(const WeightField& w, const std::vector<ProfilePoint>& grid,
                                        bool expect_harmonic = true,
                                        const VerifyOptions& opts = {});
VerificationReport verify_harmonic_flat(const MetricField& m, const std::vector<ProfilePoint>& grid,
                                        bool expect_harmonic = true,
                                        const VerifyOptions& opts = {});

/// Vector analogue of the equivalence suite with g(a) the smallest pencil
/// eigenvalue; one fit per fiber vector.
VerificationReport verify_vector_sharper(const MetricField& m, const std::vector<cplx>& samples,
                                         const std::vector<Eigen::VectorXcd>& xis,
                                         const std::vector<double>& eps_list,
                                         const VerifyOptions& opts = {});

struct CylinderSample {
  Point a{};
  double r = 0.3;
  double s = 0.3;
};

/// L = 1 over each sample and seeded unitary, and all mixed derivatives
/// d_{z_j} d_{zbar_k} phi vanish at each center.
VerificationReport verify_pluriharmonic_cylinder(const WeightField& w,
                                                 const std::vector<CylinderSample>& samples,
                                                 int unitary_count,
                                                 bool expect_pluriharmonic = true,
                                                 const VerifyOptions& opts = {});

/// m = 1, 2, 4, ..., m_max: log L_{m phi}/m <= tol, and |v(m_max)| <= |v(1)|.
VerificationReport verify_scaled_index(const WeightField& w, cplx a, double r, int m_max,
                                       bool expect_subharmonic = true,
                                       const VerifyOptions& opts = {});

json to_json(const VerificationReport& report);
VerificationReport report_from_json(const json& j);

}  // namespace l2ext
