// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/rng.h"

#include <cmath>
#include <numbers>

#include "ctxbias/errors.h"

namespace ctxbias {

std::uint64_t Rng::UniformInt(std::uint64_t n) {
  if (n == 0) throw DomainError("UniformInt needs a positive bound");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::int64_t Rng::UniformRange(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw DomainError("UniformRange with hi < lo");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(UniformInt(span));
}

double Rng::UniformReal() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::Normal() {
  double u1 = UniformReal();
  while (u1 <= 0.0) u1 = UniformReal();
  const double u2 = UniformReal();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ctxbias
