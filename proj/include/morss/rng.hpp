#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace morss {

// Deterministic random source. std::mt19937_64 has a portable, standardised
// output sequence; all distribution transforms below are written out by hand
// (instead of using std::*_distribution) because the standard leaves those
// algorithms implementation-defined and we require bit-identical streams
// across compilers and across serial/parallel execution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. The second variate of each pair is
  // discarded so a single draw never leaves hidden state behind.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    return r * std::cos(two_pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Uniform integer on [0, n) (Lemire's rejection method, multiply-shift).
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) return 0;
    __uint128_t m = static_cast<__uint128_t>(gen_()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0ULL - n) % n;
      while (lo < threshold) {
        m = static_cast<__uint128_t>(gen_()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::mt19937_64 gen_;
};

// Derives an independent child seed from a master seed and up to two stream
// labels (e.g. replication index and lane). splitmix64-style mixing: distinct
// labels give decorrelated generators, and the mapping is pure, so any
// replication can be reproduced in isolation.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b = 0) {
  std::uint64_t z = master;
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  z = mix(z ^ (a * 0xd1342543de82ef95ULL));
  z = mix(z ^ (b * 0x2545f4914f6cdd1dULL));
  return z;
}

}  // namespace morss
