#pragma once

#include <cstdint>
#include <random>

#include "glad/error.hpp"

namespace glad {

/// Deterministic seedable PRNG. The engine is std::mt19937_64, whose
/// constants are fixed by the C++ standard, so an identical seed yields an
/// identical stream on every platform. All conversions from raw 64-bit
/// output to doubles and bounded integers are implemented here rather than
/// via <random> distributions, which the standard does not pin down.
///
/// A single Rng instance is single-owner mutable state; do not share one
/// instance across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform over [0, 1) with 53 bits of precision.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform over [lo, hi). Requires lo < hi.
  double uniform(double lo, double hi) {
    if (!(lo < hi)) {
      throw InvalidInputError("Rng::uniform: empty range [" +
                              std::to_string(lo) + ", " + std::to_string(hi) +
                              ")");
    }
    return lo + (hi - lo) * next_double();
  }

  /// Uniform over {0, ..., n-1}, bias-free via rejection. Requires n > 0.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) {
      throw InvalidInputError("Rng::uniform_int: n must be positive");
    }
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t draw = engine_();
    while (draw >= limit) draw = engine_();
    return draw % n;
  }

  /// SplitMix64 finalizer (constants 0xBF58476D1CE4E5B9, 0x94D049BB133111EB,
  /// shifts 30/27/31). Used to derive decorrelated sub-stream seeds.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace glad
