// SPDX-License-Identifier: Apache-2.0

#ifndef CTXBIAS_BIASING_LIST_H_
#define CTXBIAS_BIASING_LIST_H_

#include <span>
#include <string>
#include <vector>

#include "ctxbias/posterior.h"
#include "ctxbias/vocab.h"

namespace ctxbias {

enum class Provenance { kNoBias, kTrueBias, kDistractor };

const char* ProvenanceName(Provenance p);

struct ContextPhrase {
  static constexpr const char* kNoBiasText = "<no-bias>";

  std::string text;
  LabelSeq token_ids;
  bool is_no_bias = false;

  // The sentinel entry: a single blank token.
  static ContextPhrase NoBias();
  // Tokenizes `text` (strictly). Throws DomainError for text with no tokens.
  static ContextPhrase FromText(const std::string& text, const Vocab& vocab);

  bool operator==(const ContextPhrase&) const = default;
};

// Phrase list handed to the context encoder. Entry 0 is always the no-bias
// sentinel; entries 1..K are real phrases tagged with their provenance.
class BiasingList {
 public:
  BiasingList();

  static BiasingList FromTexts(const std::vector<std::string>& texts,
                               const Vocab& vocab,
                               Provenance provenance = Provenance::kTrueBias);

  // Appends a real phrase. Rejects the sentinel, empty token lists and blank
  // tokens inside a phrase.
  void Add(ContextPhrase phrase, Provenance provenance = Provenance::kTrueBias);

  // K + 1.
  std::size_t size() const { return phrases_.size(); }
  // K.
  std::size_t num_phrases() const { return phrases_.size() - 1; }

  const ContextPhrase& phrase(std::size_t i) const { return phrases_.at(i); }
  Provenance provenance(std::size_t i) const { return provenance_.at(i); }
  const std::vector<ContextPhrase>& phrases() const { return phrases_; }

  // New list holding the given real-phrase indices (each >= 1), in order.
  BiasingList Subset(std::span<const std::size_t> indices) const;

  bool operator==(const BiasingList&) const = default;

 private:
  std::vector<ContextPhrase> phrases_;
  std::vector<Provenance> provenance_;
};

}  // namespace ctxbias

#endif  // CTXBIAS_BIASING_LIST_H_
