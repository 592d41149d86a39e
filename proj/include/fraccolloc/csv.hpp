#pragma once

#include <cstdio>
#include <string>

namespace fraccolloc {

/// 17 significant digits, '.' decimal separator: round-trips every double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace fraccolloc
