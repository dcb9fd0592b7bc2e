#pragma once

// Self-contained, platform-independent random streams.
//
// Standard-library distributions are not bit-identical across
// implementations, so every sampler here is written out explicitly.
// Replica streams are derived from a master seed by counter-based
// splitting: stream(key) = xoshiro256** seeded from splitmix64 walks of
// (master ^ golden * (key+1)), which makes replica results independent of
// scheduling and worker count.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sep/common.hpp"

namespace sep::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& s : s_) s = splitmix64(sm);
  }

  // Counter-based stream splitting: replica index (or any key) is mixed into
  // the master seed, so streams are independent of scheduling order.
  static std::uint64_t derived_seed(std::uint64_t master_seed, std::uint64_t key) {
    return master_seed ^ (0x9e3779b97f4a7c15ULL * (key + 1));
  }
  static Stream for_key(std::uint64_t master_seed, std::uint64_t key) {
    return Stream(derived_seed(master_seed, key));
  }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t x, int k) {
      return (x << k) | (x >> (64 - k));
    };
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0,1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [a,b).
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's rejection-free-ish method with widening multiply.
    unsigned __int128 m =
        static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = (-n) % n;
      while (lo < t) {
        m = static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  double exponential(double rate) {
    return -std::log1p(-uniform01()) / rate;
  }

  // Standard normal via inverse-CDF (deterministic, no state carried over).
  double normal();

  // Exact Poisson sampling: inversion for small mean, PTRS rejection
  // (Hormann 1993) for large mean.
  std::uint64_t poisson(double mean);

 private:
  std::array<std::uint64_t, 4> s_{};
};

// Acklam-style rational approximation of the standard normal quantile,
// refined with one Halley step; |error| < 1e-15 over (0,1).
double normal_quantile(double p);

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Vose alias table: O(1) sampling from a fixed discrete distribution.
class AliasTable {
 public:
  explicit AliasTable(const std::vector<double>& weights);
  std::size_t sample(Stream& rng) const {
    const std::size_t i = static_cast<std::size_t>(rng.below(prob_.size()));
    return rng.uniform01() < prob_[i] ? i : alias_[i];
  }
  std::size_t size() const { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

}  // namespace sep::rng
