#pragma once

// Seeded random primitives shared by environments, search and training.
// All draws go through RandomSource so that a run is a pure function of
// its seed; per-run seeds are derived from the master seed with splitmix64.

#include <cstdint>
#include <random>

namespace dop {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed for run k is derive_seed(master, k) = splitmix64(master ^ splitmix64(k)).
// Sub-streams (evaluation episodes, weight init) hang off the run seed the
// same way with distinct salts.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return splitmix64(base ^ splitmix64(salt));
}

class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform in [0, n). Modulo bias is ~n/2^64, far below anything we measure.
  int uniform_int(int n) { return static_cast<int>(raw() % static_cast<std::uint64_t>(n)); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform_real() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform_real() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace dop
