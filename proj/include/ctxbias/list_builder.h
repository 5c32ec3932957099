// SPDX-License-Identifier: Apache-2.0
//
// Biasing-list construction for training batches and test utterances.

#ifndef CTXBIAS_LIST_BUILDER_H_
#define CTXBIAS_LIST_BUILDER_H_

#include <string>
#include <vector>

#include "ctxbias/biasing_list.h"
#include "ctxbias/eval.h"
#include "ctxbias/rng.h"

namespace ctxbias {

struct ListBuildConfig {
  std::size_t phrases_per_utt = 3;
  std::size_t min_phrase_words = 1;
  std::size_t max_phrase_words = 3;
  std::size_t target_size = 60;  // real phrases, the no-bias entry excluded

  void Validate() const;
};

// Per utterance: phrases_per_utt contiguous n-grams with n uniform in
// [min, max] (clamped to the utterance length) and a uniform start. Phrases
// are pooled across the batch without duplicates, then distractors drawn
// without replacement from `distractor_lexicon` pad the list to target_size.
// A pool already at or above target_size is kept whole. Empty utterances
// contribute nothing.
BiasingList BuildTrainList(const std::vector<WordSeq>& batch,
                           const std::vector<std::string>& distractor_lexicon,
                           const ListBuildConfig& config, const Vocab& vocab, Rng& rng);

// True-bias entries are the reference words found in `rare_lexicon`, in
// first-occurrence order; then n_distractors lexicon words that are not in
// the reference, drawn without replacement (fewer if the lexicon runs out).
BiasingList BuildTestList(const WordSeq& reference,
                          const std::vector<std::string>& rare_lexicon,
                          std::size_t n_distractors, const Vocab& vocab, Rng& rng);

}  // namespace ctxbias

#endif  // CTXBIAS_LIST_BUILDER_H_
