// SPDX-License-Identifier: Apache-2.0

#ifndef CTXBIAS_CTC_H_
#define CTXBIAS_CTC_H_

#include <cstdint>
#include <optional>

#include "ctxbias/nncore.h"
#include "ctxbias/posterior.h"

namespace ctxbias {

struct LossResult {
  double loss = 0.0;  // -log p(label | posterior)
  // d loss / d logits, where the posterior is log_softmax(logits). T x V.
  std::optional<Matrix> grad_logits;
};

// Number of frames the shortest alignment of `label` needs: one per token
// plus one separating blank for every adjacent repeat.
std::size_t MinFramesForLabel(const LabelSeq& label);

// Forward-backward over the blank-interleaved label lattice in log space.
// Throws InfeasibleAlignmentError when T < MinFramesForLabel(label) and
// DomainError for ids outside [1, V).
LossResult CtcLoss(const PosteriorMatrix& post, const LabelSeq& label,
                   bool want_grad = false);

// Exact loss by enumerating all V^T frame paths. Throws OracleRefusedError
// when V^T exceeds `budget`.
double CtcLossOracle(const PosteriorMatrix& post, const LabelSeq& label,
                     std::uint64_t budget = 10'000'000);

// Collapses a frame path: merge repeats, then drop blanks.
LabelSeq CollapsePath(const LabelSeq& path);

// Per-frame argmax (ties to the lowest id) collapsed.
LabelSeq GreedyDecode(const PosteriorMatrix& post);

// Log probability of the per-frame argmax path itself.
double GreedyPathLogProb(const PosteriorMatrix& post);

}  // namespace ctxbias

#endif  // CTXBIAS_CTC_H_
