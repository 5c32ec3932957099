// SPDX-License-Identifier: Apache-2.0
//
// Seeded random source with platform-independent draws. std::mt19937_64 is
// fully specified by the standard, but the <random> distributions are not,
// so bounded integers and reals are derived here directly from raw words.

#ifndef CTXBIAS_RNG_H_
#define CTXBIAS_RNG_H_

#include <cstdint>
#include <random>
#include <vector>

namespace ctxbias {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t Next() { return engine_(); }

  // Uniform in [0, n). n must be positive.
  std::uint64_t UniformInt(std::uint64_t n);
  // Uniform in [lo, hi], inclusive.
  std::int64_t UniformRange(std::int64_t lo, std::int64_t hi);
  // Uniform in [0, 1) with 53 random bits.
  double UniformReal();
  double UniformReal(double lo, double hi) { return lo + (hi - lo) * UniformReal(); }
  // Standard normal via Box-Muller.
  double Normal();
  bool Bernoulli(double p) { return UniformReal() < p; }

  // Fisher-Yates over the whole vector.
  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[UniformInt(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ctxbias

#endif  // CTXBIAS_RNG_H_
