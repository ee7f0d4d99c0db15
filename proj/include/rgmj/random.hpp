#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rgmj {

// 64-bit finalizer used for deriving per-lane / per-replicate seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic seed for stream `stream` of a master seed. Stream 0 is the
// master stream itself, never reuse indices across purposes.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x51ED2701u));
}

// Uniform bit source. Virtual so tests can script exact draw sequences;
// everything downstream consumes randomness only through this interface.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual std::uint64_t bits() = 0;

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n). Rejection keeps it exactly uniform.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = bits();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller (no spare caching, keeps replay simple).
  double normal() {
    double u1 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.28318530717958647692 * u2);
  }

  double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double log_uniform(double lo, double hi) {
    return std::exp(uniform_range(std::log(lo), std::log(hi)));
  }
};

class Mt19937Source final : public RandomSource {
 public:
  explicit Mt19937Source(std::uint64_t seed) : gen_(seed) {}
  std::uint64_t bits() override { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace rgmj
