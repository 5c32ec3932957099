// SPDX-License-Identifier: Apache-2.0
//
// Training-side pieces: CPP reference extraction and the joint objective
// that adds the weighted bias loss to the base model loss.

#ifndef CTXBIAS_OBJECTIVE_H_
#define CTXBIAS_OBJECTIVE_H_

#include <optional>
#include <span>
#include <string>

#include "ctxbias/biasing_list.h"
#include "ctxbias/context_bias.h"

namespace ctxbias {

// Scans transcript words left to right; at each position takes the list
// phrase that matches the most words (earliest list entry on ties) and
// jumps past it. The matched phrases' token sequences are concatenated in
// utterance order. Words are compared after NormalizeText.
LabelSeq ExtractBiasTargets(std::span<const std::string> words,
                            const BiasingList& list);

enum class LossMode { kCtc, kAed, kTransducer };

struct LossComponents {
  double ctc = 0.0;
  std::optional<double> attention;   // AED decoder loss, required in kAed
  std::optional<double> transducer;  // required in kTransducer
  double cpp = 0.0;
};

struct LossWeights {
  double ctc_weight = 0.3;  // lambda_1, unused in kCtc
  double cpp_weight = 0.1;  // lambda_2
};

// kCtc:        ctc + l2 * cpp
// kAed:        l1 * ctc + (1 - l1) * attention + l1 * l2 * cpp
// kTransducer: l1 * ctc + (1 - l1) * transducer + l1 * l2 * cpp
// Throws DomainError for a missing component or weights outside [0, 1].
double ComposeLoss(const LossComponents& parts, const LossWeights& weights,
                   LossMode mode);

struct CtcObjective {
  double ctc_loss = 0.0;
  double cpp_loss = 0.0;
  double total = 0.0;
  LabelSeq bias_targets;
};

// Forward pass of a contextualized CTC model with its CPP head: the CTC loss
// on the transcript plus the CPP loss against the in-list phrases it
// contains. An empty CPP target is scored as the all-blank sequence.
CtcObjective ComputeCtcObjective(const Matrix& audio, const BiasingList& list,
                                 std::span<const std::string> transcript_words,
                                 const Vocab& vocab, const BiasModelWeights& weights,
                                 double cpp_weight = 0.1);

}  // namespace ctxbias

#endif  // CTXBIAS_OBJECTIVE_H_
