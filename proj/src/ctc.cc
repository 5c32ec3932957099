// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/ctc.h"

#include <cmath>
#include <limits>
#include <string>

#include "ctxbias/errors.h"

namespace ctxbias {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

void CheckLabel(const LabelSeq& label, std::size_t vocab_size) {
  for (TokenId id : label) {
    if (id <= kBlankId || static_cast<std::size_t>(id) >= vocab_size) {
      throw DomainError("label id " + std::to_string(id) + " outside [1, " +
                        std::to_string(vocab_size) + ")");
    }
  }
}

}  // namespace

std::size_t MinFramesForLabel(const LabelSeq& label) {
  std::size_t n = label.size();
  for (std::size_t i = 1; i < label.size(); ++i) {
    if (label[i] == label[i - 1]) ++n;
  }
  return n;
}

LossResult CtcLoss(const PosteriorMatrix& post, const LabelSeq& label,
                   bool want_grad) {
  const std::size_t num_frames = post.num_frames();
  const std::size_t vocab = post.vocab_size();
  CheckLabel(label, vocab);
  if (MinFramesForLabel(label) > num_frames) {
    throw InfeasibleAlignmentError(
        "label of length " + std::to_string(label.size()) + " needs at least " +
        std::to_string(MinFramesForLabel(label)) + " frames, posterior has " +
        std::to_string(num_frames));
  }

  // Extended label: blank, l1, blank, l2, ..., lL, blank.
  const std::size_t num_states = 2 * label.size() + 1;
  LabelSeq ext(num_states, kBlankId);
  for (std::size_t k = 0; k < label.size(); ++k) ext[2 * k + 1] = label[k];
  auto can_skip = [&](std::size_t s) {
    return s >= 2 && ext[s] != kBlankId && ext[s] != ext[s - 2];
  };

  Matrix alpha(num_frames, num_states, kLogZero);
  alpha(0, 0) = post.logp(0, ext[0]);
  if (num_states > 1) alpha(0, 1) = post.logp(0, ext[1]);
  for (std::size_t t = 1; t < num_frames; ++t) {
    for (std::size_t s = 0; s < num_states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = LogAdd(acc, alpha(t - 1, s - 1));
      if (can_skip(s)) acc = LogAdd(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc == kLogZero ? kLogZero : acc + post.logp(t, ext[s]);
    }
  }
  double log_likelihood = alpha(num_frames - 1, num_states - 1);
  if (num_states > 1) {
    log_likelihood = LogAdd(log_likelihood, alpha(num_frames - 1, num_states - 2));
  }
  if (log_likelihood == kLogZero) {
    throw DomainError("label has zero probability under the posterior");
  }

  LossResult result;
  result.loss = std::max(0.0, -log_likelihood);
  if (!want_grad) return result;

  // beta(t, s): log probability of emitting the rest of the label from
  // frame t+1 on, given state s at frame t.
  Matrix beta(num_frames, num_states, kLogZero);
  beta(num_frames - 1, num_states - 1) = 0.0;
  if (num_states > 1) beta(num_frames - 1, num_states - 2) = 0.0;
  for (std::size_t t = num_frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < num_states; ++s) {
      double acc = beta(t + 1, s) + post.logp(t + 1, ext[s]);
      if (s + 1 < num_states) {
        acc = LogAdd(acc, beta(t + 1, s + 1) + post.logp(t + 1, ext[s + 1]));
      }
      if (s + 2 < num_states && can_skip(s + 2)) {
        acc = LogAdd(acc, beta(t + 1, s + 2) + post.logp(t + 1, ext[s + 2]));
      }
      beta(t, s) = acc;
    }
  }

  Matrix grad(num_frames, vocab);
  Vector occupancy(vocab);
  for (std::size_t t = 0; t < num_frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kLogZero);
    for (std::size_t s = 0; s < num_states; ++s) {
      occupancy[ext[s]] = LogAdd(occupancy[ext[s]], alpha(t, s) + beta(t, s));
    }
    for (std::size_t k = 0; k < vocab; ++k) {
      grad(t, k) = post.prob(t, k) - std::exp(occupancy[k] - log_likelihood);
    }
  }
  result.grad_logits = std::move(grad);
  return result;
}

LabelSeq CollapsePath(const LabelSeq& path) {
  LabelSeq out;
  TokenId prev = -1;
  for (TokenId id : path) {
    if (id != prev && id != kBlankId) out.push_back(id);
    prev = id;
  }
  return out;
}

double CtcLossOracle(const PosteriorMatrix& post, const LabelSeq& label,
                     std::uint64_t budget) {
  const std::size_t num_frames = post.num_frames();
  const std::uint64_t vocab = post.vocab_size();
  CheckLabel(label, vocab);
  std::uint64_t num_paths = 1;
  for (std::size_t t = 0; t < num_frames; ++t) {
    if (num_paths > budget / vocab) {
      throw OracleRefusedError("enumerating " + std::to_string(vocab) + "^" +
                               std::to_string(num_frames) +
                               " paths exceeds the budget of " +
                               std::to_string(budget));
    }
    num_paths *= vocab;
  }

  LabelSeq path(num_frames, 0);
  double total = kLogZero;
  for (std::uint64_t n = 0; n < num_paths; ++n) {
    if (CollapsePath(path) == label) {
      double lp = 0.0;
      for (std::size_t t = 0; t < num_frames; ++t) lp += post.logp(t, path[t]);
      total = LogAdd(total, lp);
    }
    // Odometer increment, last frame fastest.
    for (std::size_t t = num_frames; t-- > 0;) {
      if (static_cast<std::uint64_t>(++path[t]) < vocab) break;
      path[t] = 0;
    }
  }
  if (total == kLogZero) {
    if (MinFramesForLabel(label) > num_frames) {
      throw InfeasibleAlignmentError("no frame path collapses to the label");
    }
    throw DomainError("label has zero probability under the posterior");
  }
  return std::max(0.0, -total);
}

LabelSeq GreedyDecode(const PosteriorMatrix& post) {
  LabelSeq path(post.num_frames());
  for (std::size_t t = 0; t < post.num_frames(); ++t) {
    const auto row = post.row(t);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k) {
      if (row[k] > row[best]) best = k;
    }
    path[t] = static_cast<TokenId>(best);
  }
  return CollapsePath(path);
}

double GreedyPathLogProb(const PosteriorMatrix& post) {
  double lp = 0.0;
  for (std::size_t t = 0; t < post.num_frames(); ++t) {
    const auto row = post.row(t);
    double best = row[0];
    for (double v : row) best = std::max(best, v);
    lp += best;
  }
  return lp;
}

}  // namespace ctxbias
