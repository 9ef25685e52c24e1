#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gmclab {

/// Bessel function of the first kind, order zero.
/// Ascending series below |x| = 12, Hankel asymptotic expansion above;
/// relative error stays below 1e-10 away from the zeros.
double bessel_j0(double x) noexcept;

/// Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule gauss_legendre(int n);

/// SplitMix64 finalizer (Steele, Lea, Flood). Bit-exact on every platform.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of replica `replica` under `master`:
/// splitmix64(master ^ (replica * 0x9E3779B97F4A7C15)).
constexpr std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica) noexcept {
  return splitmix64(master ^ (replica * 0x9E3779B97F4A7C15ULL));
}

/// Seed for an independent stream tagged by `salt` (e.g. root draws vs field draws).
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  return splitmix64(seed ^ splitmix64(salt + 0xD1B54A32D192ED03ULL));
}

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline void fill_standard_normal(Rng& rng, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out) v = normal(rng);
}

}  // namespace gmclab
