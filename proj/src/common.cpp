#include <cstdio>
#include <cstdlib>
#include <string>

#include "l2ext/error.hpp"

namespace l2ext {

namespace {

double parse_real_exact(std::string_view text, std::string_view whole) {
  std::string buf(text);
  if (buf.empty()) {
    throw Error(ErrorKind::InvalidParameter, "malformed complex number '" + std::string(whole) + "'");
  }
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) {
    throw Error(ErrorKind::InvalidParameter, "malformed complex number '" + std::string(whole) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string format_complex(cplx z) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g%+.17gi", z.real(), z.imag());
  return buf;
}

cplx parse_complex(std::string_view text) {
  const std::string_view whole = text;
  text = trim(text);
  if (text.empty()) {
    throw Error(ErrorKind::InvalidParameter, "empty complex number");
  }
  if (text.back() != 'i') {
    return {parse_real_exact(text, whole), 0.0};
  }
  std::string_view body = text.substr(0, text.size() - 1);
  // Split at the last sign that is not a leading sign or an exponent sign.
  std::size_t split = std::string_view::npos;
  for (std::size_t k = body.size(); k-- > 1;) {
    if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  auto imag_of = [&](std::string_view part) {
    if (part.empty() || part == "+") return 1.0;
    if (part == "-") return -1.0;
    return parse_real_exact(part, whole);
  };
  if (split == std::string_view::npos) {
    return {0.0, imag_of(body)};
  }
  return {parse_real_exact(body.substr(0, split), whole), imag_of(body.substr(split))};
}

}  // namespace l2ext
