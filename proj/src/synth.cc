// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/synth.h"

#include <algorithm>
#include <cstdio>
#include <set>

#include "ctxbias/errors.h"
#include "ctxbias/rng.h"

namespace ctxbias {

namespace {

constexpr TokenId kFirstLetter = 2;
constexpr std::size_t kNumLetters = 26;

std::string RandomWord(Rng& rng, std::size_t min_len, std::size_t max_len) {
  const auto len = static_cast<std::size_t>(
      rng.UniformRange(static_cast<std::int64_t>(min_len), static_cast<std::int64_t>(max_len)));
  std::string w;
  for (std::size_t i = 0; i < len; ++i) {
    w.push_back(static_cast<char>('a' + rng.UniformInt(kNumLetters)));
  }
  return w;
}

std::vector<std::string> UniqueWords(Rng& rng, std::size_t count, std::size_t min_len,
                                     std::size_t max_len, std::set<std::string>& taken) {
  std::vector<std::string> out;
  while (out.size() < count) {
    std::string w = RandomWord(rng, min_len, max_len);
    if (taken.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

// One frame: `target` gets `mass`, optional `confuser` gets `confuser_mass`,
// and the rest is spread over the remaining tokens with random weights.
void FillFrame(std::span<double> row, TokenId target, double mass,
               std::optional<TokenId> confuser, double confuser_mass, Rng& rng) {
  double total = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    const bool reserved = static_cast<TokenId>(k) == target ||
                          (confuser && static_cast<TokenId>(k) == *confuser);
    row[k] = reserved ? 0.0 : 1e-3 + rng.UniformReal();
    total += row[k];
  }
  const double rest = 1.0 - mass - confuser_mass;
  for (double& v : row) v *= rest / total;
  row[target] = mass;
  if (confuser) row[*confuser] += confuser_mass;
}

}  // namespace

void SynthConfig::Validate() const {
  if (num_utterances == 0) throw ConfigError("synth needs at least one utterance");
  if (min_words == 0 || max_words < min_words) {
    throw ConfigError("word count range must satisfy 1 <= min <= max");
  }
  if (common_words == 0 || active_rare == 0 || rare_lexicon < active_rare) {
    throw ConfigError("word pools must be non-empty and the rare lexicon must cover the active words");
  }
  if (!(rare_word_prob >= 0.0 && rare_word_prob <= 1.0)) {
    throw ConfigError("rare word probability must lie in [0, 1]");
  }
  if (!(attenuation > 0.0 && attenuation <= 1.0)) {
    throw ConfigError("attenuation must lie in (0, 1]");
  }
  if (!(peak > 0.0 && peak < 1.0)) throw ConfigError("peak mass must lie in (0, 1)");
  if (max_token_frames == 0) throw ConfigError("tokens need at least one frame");
}

Vocab ToyVocab() {
  std::vector<std::string> tokens = {std::string(Vocab::kBlankSymbol),
                                     std::string(Vocab::kSpaceSymbol)};
  for (std::size_t i = 0; i < kNumLetters; ++i) {
    tokens.emplace_back(1, static_cast<char>('a' + i));
  }
  return Vocab(std::move(tokens));
}

SynthCorpus GenerateSynthCorpus(const SynthConfig& config) {
  config.Validate();
  // Text and frame noise use separate streams so that changing the
  // attenuation or feature flags leaves the transcripts untouched.
  Rng rng(config.seed);
  Rng noise(config.seed ^ 0x9e3779b97f4a7c15ULL);
  SynthCorpus corpus;
  corpus.vocab = ToyVocab();

  std::set<std::string> taken;
  corpus.common_words = UniqueWords(rng, config.common_words, 2, 5, taken);
  corpus.rare_lexicon = UniqueWords(rng, config.rare_lexicon, 5, 8, taken);
  std::vector<std::string> active = corpus.rare_lexicon;
  rng.Shuffle(active);
  active.resize(config.active_rare);
  std::set<std::string> active_set(active.begin(), active.end());

  // Each letter is confused with the letter `shift` places later.
  const std::size_t shift = 1 + rng.UniformInt(kNumLetters - 1);
  auto confuser_of = [&](TokenId letter) {
    const std::size_t idx = static_cast<std::size_t>(letter - kFirstLetter);
    return static_cast<TokenId>(kFirstLetter + (idx + shift) % kNumLetters);
  };

  std::set<std::string> used_rare;
  for (std::size_t u = 0; u < config.num_utterances; ++u) {
    const auto n_words = static_cast<std::size_t>(rng.UniformRange(
        static_cast<std::int64_t>(config.min_words), static_cast<std::int64_t>(config.max_words)));
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n_words; ++i) {
      if (rng.Bernoulli(config.rare_word_prob)) {
        words.push_back(active[rng.UniformInt(active.size())]);
        used_rare.insert(words.back());
      } else {
        words.push_back(corpus.common_words[rng.UniformInt(corpus.common_words.size())]);
      }
    }

    // Frame-level alignment: (token, is_rare) per frame.
    std::vector<std::pair<TokenId, bool>> frames;
    auto blanks = [&](std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) frames.emplace_back(kBlankId, false);
    };
    blanks(1 + rng.UniformInt(2));
    TokenId prev = -1;
    for (std::size_t w = 0; w < words.size(); ++w) {
      std::vector<std::pair<TokenId, bool>> toks;
      if (w > 0) toks.emplace_back(*corpus.vocab.space_id(), false);
      const bool rare = active_set.contains(words[w]);
      for (TokenId id : Tokenize(words[w], corpus.vocab)) toks.emplace_back(id, rare);
      for (const auto& [tok, is_rare] : toks) {
        if (tok == prev) {
          blanks(1);
        } else if (prev >= 0 && rng.Bernoulli(0.5)) {
          blanks(1);
        }
        const std::size_t repeat = 1 + rng.UniformInt(config.max_token_frames);
        for (std::size_t r = 0; r < repeat; ++r) frames.emplace_back(tok, is_rare);
        prev = tok;
      }
    }
    blanks(1 + rng.UniformInt(2));

    Matrix probs(frames.size(), corpus.vocab.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const auto [tok, is_rare] = frames[t];
      if (is_rare && config.attenuation < 1.0) {
        FillFrame(probs.row(t), tok, config.attenuation * config.peak, confuser_of(tok),
                  (1.0 - config.attenuation) * config.peak, noise);
      } else {
        FillFrame(probs.row(t), tok, config.peak, std::nullopt, 0.0, noise);
      }
    }

    SynthUtterance utt{"", "", PosteriorMatrix::FromProbs(probs, 1e-9), std::nullopt};
    char id[32];
    std::snprintf(id, sizeof(id), "utt%04zu", u + 1);
    utt.id = id;
    for (const std::string& w : words) {
      if (!utt.text.empty()) utt.text.push_back(' ');
      utt.text += w;
    }
    if (config.feature_dim > 0) {
      Matrix feats(frames.size(), config.feature_dim);
      for (double& v : feats.data()) v = noise.Normal();
      utt.features = std::move(feats);
    }
    corpus.utterances.push_back(std::move(utt));
  }

  corpus.true_bias.assign(used_rare.begin(), used_rare.end());
  std::vector<std::string> pool;
  for (const std::string& w : corpus.rare_lexicon) {
    if (!used_rare.contains(w)) pool.push_back(w);
  }
  rng.Shuffle(pool);
  pool.resize(std::min(pool.size(), config.distractor_factor * corpus.true_bias.size()));
  std::sort(pool.begin(), pool.end());
  corpus.distractors = std::move(pool);
  return corpus;
}

}  // namespace ctxbias
