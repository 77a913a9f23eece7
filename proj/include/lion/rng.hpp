#pragma once

#include <cstdint>
#include <random>

namespace lion {

// Deterministic RNG wrapper. Engines are seeded via splitmix64 so that
// independent components of a run draw from decorrelated streams derived
// from one run seed. Sampling helpers avoid std distributions, whose
// output is not pinned by the standard.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    for (std::uint64_t i = 0; i <= stream; ++i) a = splitmix64(s);
    engine_.seed(a);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, bound). Rejection-free modulo is acceptable here:
  // bounds are tiny relative to 2^64, so bias is negligible.
  std::uint64_t uniform(std::uint64_t bound) {
    return bound == 0 ? 0 : next_u64() % bound;
  }

  // Uniform double in [0, 1).
  double uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform_real() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lion
