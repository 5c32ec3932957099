// SPDX-License-Identifier: Apache-2.0
//
// Two-stage biasing-list filter driven by a first-pass CTC posterior that was
// computed with a no-bias-only list.
//
// Stage 1 (phrase score confidence, PSC) ignores token order: inside each
// sliding window every phrase token takes its best posterior, and the sum
// is divided by the phrase length. Stage 2 (sequence order confidence, SOC)
// only runs for stage-1 survivors and requires the tokens to sit on strictly
// increasing frames. Scores are the maximum over windows, in [0, 1].

#ifndef CTXBIAS_PHRASE_FILTER_H_
#define CTXBIAS_PHRASE_FILTER_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxbias/biasing_list.h"
#include "ctxbias/context_bias.h"
#include "ctxbias/posterior.h"

namespace ctxbias {

struct FilterConfig {
  double window_scale = 2.0;  // window = max(U, ceil(window_scale * U)) frames
  std::size_t stride = 1;     // frames between window starts
  double psc_threshold = 0.3;
  double soc_threshold = 0.4;
  std::size_t max_kept = 100;

  // Throws ConfigError for window_scale < 1, stride < 1 or thresholds
  // outside [0, 1].
  void Validate() const;
  std::size_t WindowWidth(std::size_t phrase_len) const;
};

// Half-open frame ranges visited for a phrase of `phrase_len` tokens over
// `num_frames` frames. Starts step by `stride`; a final window flush with
// the last frame is added when the stride skips it. Windows wider than the
// utterance are clamped to [0, T).
std::vector<std::pair<std::size_t, std::size_t>> FilterWindows(
    std::size_t num_frames, std::size_t phrase_len, const FilterConfig& config);

double PhraseScoreConfidence(const Matrix& probs, const LabelSeq& phrase,
                             const FilterConfig& config);
double PhraseScoreConfidence(const PosteriorMatrix& post, const LabelSeq& phrase,
                             const FilterConfig& config);

double SequenceOrderConfidence(const Matrix& probs, const LabelSeq& phrase,
                               const FilterConfig& config);
double SequenceOrderConfidence(const PosteriorMatrix& post, const LabelSeq& phrase,
                               const FilterConfig& config);

// Exhaustive SOC over every strictly increasing frame assignment inside each
// window. Throws OracleRefusedError beyond `budget` assignments in total.
double SequenceOrderConfidenceOracle(const PosteriorMatrix& post,
                                     const LabelSeq& phrase,
                                     const FilterConfig& config,
                                     std::uint64_t budget = 1'000'000);

enum class FilterVerdict { kKept, kDroppedStage1, kDroppedStage2, kDroppedCapacity };

const char* VerdictName(FilterVerdict v);

struct PhraseFilterEntry {
  std::size_t list_index = 0;  // index in the input list (>= 1)
  std::string text;
  Provenance provenance = Provenance::kTrueBias;
  double psc = 0.0;
  std::optional<double> soc;  // present only for stage-1 survivors
  FilterVerdict verdict = FilterVerdict::kDroppedStage1;
};

struct FilterCounters {
  std::size_t phrases_in = 0;
  std::size_t stage1_evaluated = 0;
  std::size_t stage2_evaluated = 0;
  std::size_t kept = 0;
  std::uint64_t stage1_window_cells = 0;  // token x frame cells scanned
  std::uint64_t stage2_dp_cells = 0;      // DP cells filled
};

struct FilterReport {
  FilterConfig config;
  std::vector<PhraseFilterEntry> entries;  // input order
  FilterCounters counters;
};

struct FilterResult {
  FilterReport report;
  BiasingList filtered;  // no-bias first, then survivors by SOC rank
};

// Survivors are ranked by SOC (ties keep input order) and truncated to
// max_kept.
FilterResult FilterList(const PosteriorMatrix& first_pass, const BiasingList& list,
                        const FilterConfig& config);

// Posterior of the no-bias-only first pass over retained audio embeddings.
PosteriorMatrix FirstPass(const Matrix& audio, const BiasModelWeights& weights);

// Reruns only phrase encoding, biasing attention, combiner and CTC head on
// the retained audio embeddings with the filtered list.
PosteriorMatrix SecondPass(const Matrix& audio, const BiasingList& filtered,
                           const BiasModelWeights& weights);

}  // namespace ctxbias

#endif  // CTXBIAS_PHRASE_FILTER_H_
