// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/posterior.h"

#include <cmath>
#include <limits>
#include <string>

#include "ctxbias/errors.h"

namespace ctxbias {

PosteriorMatrix::PosteriorMatrix(Matrix logp, double tolerance)
    : logp_(std::move(logp)) {
  if (logp_.rows() == 0 || logp_.cols() < 2) {
    throw DomainError("posterior needs at least one frame and two tokens");
  }
  for (std::size_t t = 0; t < logp_.rows(); ++t) {
    for (double v : logp_.row(t)) {
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        throw DomainError("posterior frame " + std::to_string(t) +
                          " holds a non-finite log probability");
      }
    }
    const double lse = LogSumExp(logp_.row(t));
    if (!(std::fabs(lse) <= tolerance)) {
      throw DomainError("posterior frame " + std::to_string(t) +
                        " is not normalized (log-sum-exp " +
                        std::to_string(lse) + ")");
    }
  }
}

PosteriorMatrix PosteriorMatrix::FromLogits(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    const Vector row = LogSoftmax(logits.row(t));
    std::copy(row.begin(), row.end(), out.row(t).begin());
  }
  return PosteriorMatrix(std::move(out));
}

PosteriorMatrix PosteriorMatrix::FromProbs(const Matrix& probs,
                                           double tolerance) {
  Matrix out(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.data().size(); ++i) {
    const double p = probs.data()[i];
    if (p < 0) throw DomainError("negative probability in posterior");
    out.data()[i] = std::log(p);
  }
  return PosteriorMatrix(std::move(out), tolerance);
}

double PosteriorMatrix::prob(std::size_t t, std::size_t v) const {
  return std::exp(logp_(t, v));
}

Matrix PosteriorMatrix::Probs() const {
  Matrix out(logp_.rows(), logp_.cols());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = std::exp(logp_.data()[i]);
  }
  return out;
}

}  // namespace ctxbias
