#pragma once

#include <cstdio>
#include <string>

namespace fgi {

// Shortest exact round-trip formatting for doubles. Used for every float
// that lands in a CSV or mesh file so rerun artifacts are byte-identical.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // trim to the shortest representation that still round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(probe, "%lf", &back);
    if (back == v) return std::string(probe);
  }
  return std::string(buf);
}

}  // namespace fgi
