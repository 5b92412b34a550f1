#pragma once

#include <cstdio>
#include <string>

namespace cnf {

/// Locale-independent float formatting (all output files depend on it for
/// byte determinism).
inline std::string fmt_g(double v, int precision = 9) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

inline std::string fmt_f(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace cnf
