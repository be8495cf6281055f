#pragma once

#include <cmath>
#include <cstdint>

namespace fgi {

// SplitMix64: tiny, fast, and identical on every platform. std::mt19937_64
// plus the standard distributions would not give reproducible streams across
// standard libraries, and reports must record seeds that anyone can replay.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller (deterministic, no cached spare)
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0x1.0p-60) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  int uniform_int(int n) {  // in [0, n)
    return static_cast<int>(next() % static_cast<std::uint64_t>(n));
  }
};

// Per-trial sub-seed derived deterministically from (seed, trial index) so
// trials can run in parallel with independent streams.
inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t trial) {
  SplitMix64 g(seed ^ (0xA0761D6478BD642FULL * (trial + 1)));
  return g.next();
}

}  // namespace fgi
