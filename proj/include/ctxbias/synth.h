// SPDX-License-Identifier: Apache-2.0
//
// Synthetic corpus generator: toy character vocabulary, random common and
// rare words, and CTC posteriors built directly from the reference
// alignment. Tokens of rare words can be attenuated so that a plain decoder
// confuses them with a fixed substitute letter, which is the failure mode
// contextual biasing is meant to repair.

#ifndef CTXBIAS_SYNTH_H_
#define CTXBIAS_SYNTH_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxbias/posterior.h"
#include "ctxbias/vocab.h"

namespace ctxbias {

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t num_utterances = 40;
  std::size_t min_words = 4;
  std::size_t max_words = 8;
  std::size_t common_words = 60;   // size of the common-word pool
  std::size_t rare_lexicon = 600;  // size of the rare-word lexicon
  std::size_t active_rare = 30;    // rare words that may appear in utterances
  double rare_word_prob = 0.25;
  // Multiplier on the target-token mass of rare-word frames; the removed mass
  // goes to the token's confuser. 1.0 leaves rare words intact.
  double attenuation = 1.0;
  double peak = 0.9;               // target mass of a clean frame
  // Frames per token are drawn from [1, max_token_frames]. CTC posteriors are
  // spiky, so the default emits each token on a single frame.
  std::size_t max_token_frames = 1;
  std::size_t distractor_factor = 10;
  std::size_t feature_dim = 0;     // > 0 also emits random features

  void Validate() const;
};

struct SynthUtterance {
  std::string id;
  std::string text;
  PosteriorMatrix posterior;
  std::optional<Matrix> features;
};

struct SynthCorpus {
  Vocab vocab{std::vector<std::string>{"<blank>", "<space>"}};
  std::vector<SynthUtterance> utterances;
  std::vector<std::string> common_words;
  std::vector<std::string> rare_lexicon;
  std::vector<std::string> true_bias;    // rare words that occur, sorted
  std::vector<std::string> distractors;  // distractor_factor x |true_bias|
};

// Letters a-z plus <blank> and <space>.
Vocab ToyVocab();

SynthCorpus GenerateSynthCorpus(const SynthConfig& config);

}  // namespace ctxbias

#endif  // CTXBIAS_SYNTH_H_
