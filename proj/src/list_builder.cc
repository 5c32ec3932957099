// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/list_builder.h"

#include <set>

#include "ctxbias/errors.h"

namespace ctxbias {

namespace {

std::string JoinWords(const WordSeq& words, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += words[i];
  }
  return NormalizeText(out);
}

// Draws up to `count` entries of `pool` (in random order) that are not in
// `exclude`, inserting each drawn entry into `exclude`.
std::vector<std::string> DrawDistinct(const std::vector<std::string>& pool,
                                      std::size_t count, std::set<std::string>& exclude,
                                      Rng& rng) {
  std::vector<std::string> candidates;
  std::set<std::string> seen;
  for (const std::string& p : pool) {
    std::string n = NormalizeText(p);
    if (!n.empty() && !exclude.contains(n) && seen.insert(n).second) {
      candidates.push_back(std::move(n));
    }
  }
  std::vector<std::string> out;
  // Partial Fisher-Yates: only the first `count` slots are needed.
  for (std::size_t i = 0; i < candidates.size() && out.size() < count; ++i) {
    const std::size_t j = i + rng.UniformInt(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
    exclude.insert(candidates[i]);
    out.push_back(candidates[i]);
  }
  return out;
}

}  // namespace

void ListBuildConfig::Validate() const {
  if (min_phrase_words == 0 || max_phrase_words < min_phrase_words) {
    throw ConfigError("phrase word range must satisfy 1 <= min <= max");
  }
}

BiasingList BuildTrainList(const std::vector<WordSeq>& batch,
                           const std::vector<std::string>& distractor_lexicon,
                           const ListBuildConfig& config, const Vocab& vocab, Rng& rng) {
  config.Validate();
  BiasingList list;
  std::set<std::string> present;
  for (const WordSeq& utt : batch) {
    if (utt.empty()) continue;
    for (std::size_t k = 0; k < config.phrases_per_utt; ++k) {
      auto n = static_cast<std::size_t>(rng.UniformRange(
          static_cast<std::int64_t>(config.min_phrase_words),
          static_cast<std::int64_t>(config.max_phrase_words)));
      n = std::min(n, utt.size());
      const std::size_t start = rng.UniformInt(utt.size() - n + 1);
      std::string phrase = JoinWords(utt, start, start + n);
      if (present.insert(phrase).second) {
        list.Add(ContextPhrase::FromText(phrase, vocab), Provenance::kTrueBias);
      }
    }
  }
  if (list.num_phrases() < config.target_size) {
    const std::size_t missing = config.target_size - list.num_phrases();
    for (const std::string& d : DrawDistinct(distractor_lexicon, missing, present, rng)) {
      list.Add(ContextPhrase::FromText(d, vocab), Provenance::kDistractor);
    }
  }
  return list;
}

BiasingList BuildTestList(const WordSeq& reference,
                          const std::vector<std::string>& rare_lexicon,
                          std::size_t n_distractors, const Vocab& vocab, Rng& rng) {
  std::set<std::string> rare;
  for (const std::string& w : rare_lexicon) rare.insert(NormalizeText(w));
  BiasingList list;
  std::set<std::string> exclude;
  for (const std::string& w : reference) exclude.insert(NormalizeText(w));
  std::set<std::string> added;
  for (const std::string& w : reference) {
    const std::string n = NormalizeText(w);
    if (rare.contains(n) && added.insert(n).second) {
      list.Add(ContextPhrase::FromText(n, vocab), Provenance::kTrueBias);
    }
  }
  for (const std::string& d : DrawDistinct(rare_lexicon, n_distractors, exclude, rng)) {
    list.Add(ContextPhrase::FromText(d, vocab), Provenance::kDistractor);
  }
  return list;
}

}  // namespace ctxbias
