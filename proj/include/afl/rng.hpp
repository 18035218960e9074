#pragma once

// Seedable, splittable random source with a fully specified algorithm so that
// partitions and dummy datasets can be reproduced bit-for-bit elsewhere.
//
//   engine      xoshiro256** 1.0, state seeded by four SplitMix64 outputs
//   derive      derive_seed(parent, stream):
//                 s = SplitMix64(parent ^ (stream * 0xD1B54A32D192ED03));
//                 s.next(); return s.next();
//   uniform01   (next() >> 11) * 2^-53, in [0, 1)
//   below(n)    Lemire multiply-shift with rejection, unbiased in [0, n)
//   normal      Box-Muller cosine branch: sqrt(-2 ln(1 - u1)) cos(2 pi u2)
//   gamma       Marsaglia-Tsang; shape < 1 boosted as G(a+1) * U^(1/a),
//               evaluated in the log domain
//   dirichlet   normalized gammas (log-sum-exp), one draw per component
//   shuffle     Fisher-Yates, i = n-1 down to 1, j = below(i + 1)
//
// No std:: distribution is used: their output is implementation-defined.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "afl/error.hpp"

namespace afl {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  SplitMix64 sm(parent ^ (stream * 0xD1B54A32D192ED03ULL));
  sm.next();
  return sm.next();
}

// Stream tags for per-stage seeds derived from an experiment's master seed.
namespace stream {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kHoldout = 2;
inline constexpr std::uint64_t kPartition = 3;
inline constexpr std::uint64_t kOrder = 4;
inline constexpr std::uint64_t kBaseline = 5;
}  // namespace stream

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& s : s_) s = sm.next();
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return next(); }

  std::uint64_t next() {
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

  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ContractError("Rng::below: n must be positive");
    std::uint64_t x = next();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = next();
        m = static_cast<unsigned __int128>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // log of a Gamma(shape, 1) variate. Stays finite for tiny shapes where the
  // variate itself underflows to zero.
  double log_gamma_variate(double shape) {
    if (!(shape > 0.0)) throw ContractError("gamma shape must be > 0");
    if (shape < 1.0) {
      const double u = 1.0 - uniform01();
      return log_gamma_variate(shape + 1.0) + std::log(u) / shape;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = 0.0;
      double v = 0.0;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = 1.0 - uniform01();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return std::log(d) + std::log(v);
      }
    }
  }

  std::vector<double> dirichlet(double alpha, std::size_t k) {
    if (k == 0) throw ContractError("dirichlet: dimension must be >= 1");
    std::vector<double> logs(k);
    double hi = -std::numeric_limits<double>::infinity();
    for (auto& l : logs) {
      l = log_gamma_variate(alpha);
      hi = std::max(hi, l);
    }
    double total = 0.0;
    for (auto& l : logs) {
      l = std::exp(l - hi);
      total += l;
    }
    for (auto& l : logs) l /= total;
    return logs;
  }

  // Index drawn with probability proportional to weights[i].
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw ContractError("categorical: weights sum to 0");
    const double target = uniform01() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      last_positive = i;
      if (target < acc) return i;
    }
    return last_positive;
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

}  // namespace afl
