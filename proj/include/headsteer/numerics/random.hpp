// SPDX-License-Identifier: Apache-2.0
#pragma once

// Portable pseudorandom draws. std::mt19937_64 is bit-specified by the
// standard; the distribution mappings below are hand-written because the
// standard library's distributions differ across implementations.

#include <cstdint>
#include <random>

namespace headsteer::numerics {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (one draw per call, no caching).
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace headsteer::numerics
