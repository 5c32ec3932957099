// SPDX-License-Identifier: Apache-2.0
//
// Word-level scoring: Levenshtein alignment, WER split into words inside
// (B-WER) and outside (U-WER) the biasing list, and phrase-level
// recall/precision/F1.

#ifndef CTXBIAS_EVAL_H_
#define CTXBIAS_EVAL_H_

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ctxbias/biasing_list.h"

namespace ctxbias {

using WordSeq = std::vector<std::string>;

enum class EditKind { kMatch, kSubstitution, kDeletion, kInsertion };

struct AlignOp {
  EditKind kind;
  std::optional<std::size_t> ref_index;  // absent for insertions
  std::optional<std::size_t> hyp_index;  // absent for deletions

  bool operator==(const AlignOp&) const = default;
};

// Minimal edit-distance alignment. During backtrace a diagonal step
// (match/substitution) is preferred over a deletion, and a deletion over an
// insertion.
std::vector<AlignOp> Align(std::span<const std::string> ref,
                           std::span<const std::string> hyp);

std::size_t EditDistance(std::span<const AlignOp> ops);

struct ErrorRate {
  std::size_t errors = 0;
  std::size_t ref_words = 0;

  // errors / ref_words; empty when there are no reference words.
  std::optional<double> rate() const;
  ErrorRate& operator+=(const ErrorRate& o) {
    errors += o.errors;
    ref_words += o.ref_words;
    return *this;
  }
  bool operator==(const ErrorRate&) const = default;
};

struct ScoredTranscript {
  std::vector<AlignOp> ops;
  std::vector<bool> ref_biased;  // per reference word
  ErrorRate wer;
  ErrorRate u_wer;
  ErrorRate b_wer;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
};

// Every distinct word of every real list phrase, normalized.
std::set<std::string> BiasedWordSet(const BiasingList& list);

// Reference words are tagged biased when they occur in the list's word set.
// Substitutions and deletions follow the reference word's tag; insertions go
// to B-WER when the inserted word is in the set and to U-WER otherwise.
ScoredTranscript Score(std::span<const std::string> ref, std::span<const std::string> hyp,
                       const std::set<std::string>& biased_words);
ScoredTranscript Score(std::span<const std::string> ref, std::span<const std::string> hyp,
                       const BiasingList& list);

// Micro-averaged corpus totals.
struct CorpusScore {
  ErrorRate wer;
  ErrorRate u_wer;
  ErrorRate b_wer;
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t utterances = 0;

  void Add(const ScoredTranscript& s);
};

struct PhraseMetrics {
  std::size_t ref_occurrences = 0;
  std::size_t hyp_occurrences = 0;
  std::size_t matched = 0;
  std::optional<double> recall;
  std::optional<double> precision;
  std::optional<double> f1;
};

// Non-overlapping, word-aligned occurrences of `phrase` in `words`.
std::size_t CountPhraseOccurrences(std::span<const std::string> words,
                                   std::span<const std::string> phrase);

// Per utterance and phrase, min(ref count, hyp count) occurrences count as
// matched. Recall and precision are pooled over the corpus.
PhraseMetrics PhrasePrf(const std::vector<WordSeq>& refs, const std::vector<WordSeq>& hyps,
                        const std::vector<WordSeq>& phrases);

}  // namespace ctxbias

#endif  // CTXBIAS_EVAL_H_
