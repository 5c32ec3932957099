// SPDX-License-Identifier: Apache-2.0
//
// Character-level vocabulary and tokenizer shared by the CTC head, the
// context encoder and the decoders.

#ifndef CTXBIAS_VOCAB_H_
#define CTXBIAS_VOCAB_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxbias/posterior.h"

namespace ctxbias {

class Vocab {
 public:
  static constexpr std::string_view kBlankSymbol = "<blank>";
  static constexpr std::string_view kSpaceSymbol = "<space>";

  // tokens[0] must be kBlankSymbol; tokens must be unique and there must be
  // at least one non-blank entry. Every other token is either kSpaceSymbol or
  // a single UTF-8 character.
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& symbol(TokenId id) const;
  std::optional<TokenId> Find(std::string_view symbol) const;
  std::optional<TokenId> space_id() const { return space_id_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::optional<TokenId> space_id_;
};

enum class UnknownPolicy { kStrict, kSkip };

// Lowercases ASCII letters, collapses whitespace runs to one space token and
// trims leading/trailing whitespace. Under kStrict an unmappable character
// raises TokenizationError naming it; under kSkip it is dropped.
LabelSeq Tokenize(std::string_view text, const Vocab& vocab,
                  UnknownPolicy policy = UnknownPolicy::kStrict);

// Inverse of Tokenize for label sequences (blanks are skipped).
std::string Detokenize(std::span<const TokenId> ids, const Vocab& vocab);

// Splits on ASCII whitespace.
std::vector<std::string> SplitWords(std::string_view text);

// Lowercase + whitespace normalization, the canonical text form for scoring.
std::string NormalizeText(std::string_view text);

}  // namespace ctxbias

#endif  // CTXBIAS_VOCAB_H_
