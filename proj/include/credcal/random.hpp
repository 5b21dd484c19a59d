#ifndef CREDCAL_RANDOM_HPP
#define CREDCAL_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

#include "credcal/types.hpp"

namespace credcal {

/// splitmix64 finalizer; used to turn structured keys into stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives a seed for the stream identified by (root, keys...). Distinct key
/// tuples give distinct seeds with overwhelming probability.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(root);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632BE59BD9B4E019ULL));
  return h;
}

/// A single-owner random stream. Copying forks the exact state.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }
  double chi_squared(double dof) {
    return std::chi_squared_distribution<double>(dof)(engine_);
  }
  /// +1 or -1 with equal probability.
  double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

  VectorXd normal_vector(Index n) {
    VectorXd z(n);
    for (Index i = 0; i < n; ++i) z[i] = normal();
    return z;
  }
  VectorXd rademacher_vector(Index n) {
    VectorXd d(n);
    for (Index i = 0; i < n; ++i) d[i] = rademacher();
    return d;
  }

  engine_type& engine() { return engine_; }

 private:
  engine_type engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace credcal

#endif  // CREDCAL_RANDOM_HPP
