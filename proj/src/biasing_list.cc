// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/biasing_list.h"

#include "ctxbias/errors.h"

namespace ctxbias {

const char* ProvenanceName(Provenance p) {
  switch (p) {
    case Provenance::kNoBias:
      return "no-bias";
    case Provenance::kTrueBias:
      return "true-bias";
    case Provenance::kDistractor:
      return "distractor";
  }
  return "?";
}

ContextPhrase ContextPhrase::NoBias() {
  return ContextPhrase{kNoBiasText, LabelSeq{kBlankId}, true};
}

ContextPhrase ContextPhrase::FromText(const std::string& text,
                                      const Vocab& vocab) {
  ContextPhrase phrase{NormalizeText(text), Tokenize(text, vocab), false};
  if (phrase.token_ids.empty()) {
    throw DomainError("context phrase '" + text + "' has no tokens");
  }
  return phrase;
}

BiasingList::BiasingList()
    : phrases_{ContextPhrase::NoBias()}, provenance_{Provenance::kNoBias} {}

BiasingList BiasingList::FromTexts(const std::vector<std::string>& texts,
                                   const Vocab& vocab, Provenance provenance) {
  BiasingList list;
  for (const std::string& t : texts) list.Add(ContextPhrase::FromText(t, vocab), provenance);
  return list;
}

void BiasingList::Add(ContextPhrase phrase, Provenance provenance) {
  if (phrase.is_no_bias || provenance == Provenance::kNoBias) {
    throw DomainError("the no-bias entry is implicit and cannot be added");
  }
  if (phrase.token_ids.empty()) {
    throw DomainError("context phrase '" + phrase.text + "' is empty");
  }
  for (TokenId id : phrase.token_ids) {
    if (id <= kBlankId) {
      throw DomainError("context phrase '" + phrase.text +
                        "' contains a blank or negative token id");
    }
  }
  phrases_.push_back(std::move(phrase));
  provenance_.push_back(provenance);
}

BiasingList BiasingList::Subset(std::span<const std::size_t> indices) const {
  BiasingList out;
  for (std::size_t i : indices) {
    if (i == 0 || i >= phrases_.size()) {
      throw DomainError("subset index " + std::to_string(i) + " out of range");
    }
    out.Add(phrases_[i], provenance_[i]);
  }
  return out;
}

}  // namespace ctxbias
