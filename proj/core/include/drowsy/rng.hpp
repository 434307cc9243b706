#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace drowsy {

// SplitMix64 finalizer, used for all seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a) {
  return mix64(base ^ mix64(a + 0x51ed2701ULL));
}
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                    std::uint64_t b) {
  return derive_seed(derive_seed(base, a), b);
}
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                    std::uint64_t b, std::uint64_t c) {
  return derive_seed(derive_seed(base, a, b), c);
}

// Deterministic RNG. The engine is mt19937_64 (bit-reproducible by the
// standard); the samplers are hand-rolled because the std distributions are
// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased draw from [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t lim = (UINT64_MAX / n) * n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= lim);
    return r % n;
  }

  // Box-Muller with cached spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }
  double lognormal(double mu, double sigma) {
    return std::exp(normal(mu, sigma));
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stateless uniform stream: the value depends only on (key, index), so masks
// drawn from it are replayable and independent of evaluation order.
struct CounterRng {
  std::uint64_t key = 0;
  double uniform_at(std::uint64_t idx) const {
    return static_cast<double>(mix64(key ^ mix64(idx)) >> 11) * 0x1.0p-53;
  }
};

}  // namespace drowsy
