#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "l2ext/weightlang.hpp"

namespace l2ext::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kNumericalFailure = 3,
  kVerificationFailed = 4,
};

/// Runs one subcommand (index | extend | sweep | curvature | prekopa |
/// verify). `args` excludes the program name. Results go to `out` unless
/// --output names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "zero", "gauss:<lambda>@<center>", "harm:<c0>,<c1>,...", "expr:<text>",
/// or a bare expression.
WeightField parse_weight_spec(std::string_view text, std::optional<Binding> binding = {});

/// "metric:[[e11,e12],[.,e22]]"; the lower triangle is implied.
MetricField parse_metric_spec(std::string_view text);

/// 17 significant digits, '.' decimal separator.
std::string format_double(double x);

int exit_code_for(ErrorKind kind);

}  // namespace l2ext::cli
