#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "cael/errors.hpp"

namespace cael {

using RngSeed = std::uint64_t;

/// splitmix64 step; used to derive independent seeds from a base seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic per-stream seed: hash(base, index). Streams with distinct
/// indices are statistically independent; the map is stable across platforms.
inline RngSeed derive_seed(RngSeed base, std::uint64_t index) {
  std::uint64_t s = base;
  (void)splitmix64(s);
  s ^= 0x6a09e667f3bcc909ULL + index;
  (void)splitmix64(s);
  return splitmix64(s);
}

/// Seeded random source with library-owned distributions. The engine is
/// std::mt19937_64 (bit-exact by the standard) and every distribution is
/// implemented here, so identical seeds give identical streams on any
/// platform and standard library.
class Rng {
 public:
  explicit Rng(RngSeed seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    cached_ = r * std::sin(t);
    has_cached_ = true;
    return r * std::cos(t);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [0, n); unbiased via rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("uniform_int: n must be positive");
    const std::uint64_t threshold = (-n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= threshold) return x % n;
    }
  }

  /// Draws an index from a probability vector by inverse CDF.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double cum = 0.0;
    for (std::size_t a = 0; a < probs.size(); ++a) {
      cum += probs[a];
      if (u < cum) return static_cast<int>(a);
    }
    // u landed in the rounding slack past the last cumulative bin.
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::mt19937_64 gen_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace cael
