#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace l2ext {

using cplx = std::complex<double>;

enum class ErrorKind {
  InvalidParameter,
  Syntax,
  UnknownIdentifier,
  DepthLimit,
  NumericalEvaluation,
  NotAWeight,
  MetricNotPositive,
  IllConditioned,
  RegionOutsideDomain,
  Config,
};

/// Single exception type for the library. The kind drives CLI exit codes;
/// syntax errors carry a byte offset, ill-conditioned systems carry the
/// condition estimate that triggered the rejection.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  static Error syntax(std::size_t offset, const std::string& message) {
    Error e(ErrorKind::Syntax, message + " at offset " + std::to_string(offset));
    e.offset_ = offset;
    return e;
  }

  static Error ill_conditioned(double condition, const std::string& message) {
    Error e(ErrorKind::IllConditioned, message);
    e.condition_ = condition;
    return e;
  }

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> offset() const noexcept { return offset_; }
  std::optional<double> condition() const noexcept { return condition_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> offset_;
  std::optional<double> condition_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::Syntax: return "syntax-error";
    case ErrorKind::UnknownIdentifier: return "unknown-identifier";
    case ErrorKind::DepthLimit: return "depth-limit-exceeded";
    case ErrorKind::NumericalEvaluation: return "numerical-evaluation";
    case ErrorKind::NotAWeight: return "not-a-weight";
    case ErrorKind::MetricNotPositive: return "metric-not-positive";
    case ErrorKind::IllConditioned: return "ill-conditioned-system";
    case ErrorKind::RegionOutsideDomain: return "region-outside-domain";
    case ErrorKind::Config: return "config-error";
  }
  return "unknown";
}

/// Formats a complex number as "re+imi" with round-trip precision.
std::string format_complex(cplx z);

/// Parses "1", "-0.2+0.1i", "0.5i", "i", "-i", "1e-3-2e-1i".
cplx parse_complex(std::string_view text);

}  // namespace l2ext
