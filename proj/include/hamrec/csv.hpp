#pragma once

#include <cstdio>
#include <string>

namespace hamrec {

/// Shortest-loss-free decimal form used by every CSV and config emitter
/// (17 significant digits round-trips doubles bit-exactly).
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace hamrec
