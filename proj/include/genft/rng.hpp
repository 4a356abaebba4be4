#pragma once

#include <cstdint>
#include <random>

namespace genft {

/// Seeded random source with a portable output sequence.
///
/// std::mt19937_64 is bit-specified by the standard, but the standard
/// distributions are not, so every draw here is derived from raw 64-bit
/// words with fixed arithmetic.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 42) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Box-Muller; consumes exactly two words per call.
  double normal(double mean, double stddev);

  bool bernoulli(double p_true) { return uniform01() < p_true; }

  /// Index in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  /// Independent child stream derived from this seed and a stream id.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace genft
