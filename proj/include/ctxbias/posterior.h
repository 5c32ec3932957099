// SPDX-License-Identifier: Apache-2.0

#ifndef CTXBIAS_POSTERIOR_H_
#define CTXBIAS_POSTERIOR_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ctxbias/nncore.h"

namespace ctxbias {

using TokenId = std::int32_t;
using LabelSeq = std::vector<TokenId>;

inline constexpr TokenId kBlankId = 0;

// T x V per-frame log posteriors from a CTC head. Every row log-sum-exps to
// zero (checked on construction against `tolerance`).
class PosteriorMatrix {
 public:
  static constexpr double kDefaultTolerance = 1e-6;
  // Slack used when the values went through 32-bit storage.
  static constexpr double kStorageTolerance = 1e-4;

  PosteriorMatrix() = default;
  explicit PosteriorMatrix(Matrix logp, double tolerance = kDefaultTolerance);

  // Normalizes each row of unnormalized logits with log-softmax.
  static PosteriorMatrix FromLogits(const Matrix& logits);
  // Takes linear-domain probabilities (rows sum to one).
  static PosteriorMatrix FromProbs(const Matrix& probs,
                                   double tolerance = kDefaultTolerance);

  std::size_t num_frames() const { return logp_.rows(); }
  std::size_t vocab_size() const { return logp_.cols(); }

  double logp(std::size_t t, std::size_t v) const { return logp_(t, v); }
  double prob(std::size_t t, std::size_t v) const;
  std::span<const double> row(std::size_t t) const { return logp_.row(t); }

  const Matrix& log_probs() const { return logp_; }
  // Linear-domain copy.
  Matrix Probs() const;

  bool operator==(const PosteriorMatrix& other) const = default;

 private:
  Matrix logp_;
};

}  // namespace ctxbias

#endif  // CTXBIAS_POSTERIOR_H_
