#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace traitpipe {

/// Deterministic pseudo-random generator (splitmix64 core).
///
/// Every stochastic component in the library draws from this class so
/// that a (data, seed) pair fully determines the result, independent of
/// platform or standard-library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal deviate (Box-Muller, cached spare).
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    has_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  /// Bernoulli draw with success probability p.
  bool next_bernoulli(double p) { return next_double() < p; }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derives a child seed from a base seed and a string tag. Stable across
  /// runs and insensitive to the order other seeds are derived in, so
  /// adding one job never perturbs another job's stream.
  static std::uint64_t derive(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = 14695981039346656037ULL ^ base;
    for (const char ch : tag) {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ULL;
    }
    // One splitmix finalization round to spread the FNV bits.
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace traitpipe
