// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/vocab.h"

#include <cctype>

#include "ctxbias/errors.h"

namespace ctxbias {

namespace {

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Byte length of the UTF-8 sequence introduced by `lead`; malformed leads
// count as one byte so that they surface as unknown characters.
std::size_t Utf8Length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

bool IsSingleCharacter(std::string_view s) {
  return !s.empty() && Utf8Length(static_cast<unsigned char>(s[0])) == s.size();
}

}  // namespace

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2) throw DomainError("vocab needs at least two tokens");
  if (tokens_[0] != kBlankSymbol) {
    throw DomainError("vocab token 0 must be " + std::string(kBlankSymbol));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const std::string& tok = tokens_[i];
    if (i > 0 && tok == kBlankSymbol) {
      throw DomainError("blank symbol may only appear at index 0");
    }
    if (i > 0 && tok != kSpaceSymbol && !IsSingleCharacter(tok)) {
      throw DomainError("vocab token '" + tok + "' at index " +
                        std::to_string(i) + " is not a single character");
    }
    if (!index_.emplace(tok, static_cast<TokenId>(i)).second) {
      throw DomainError("duplicate vocab token '" + tok + "'");
    }
    if (tok == kSpaceSymbol) space_id_ = static_cast<TokenId>(i);
  }
}

const std::string& Vocab::symbol(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DomainError("token id " + std::to_string(id) + " outside vocab of " +
                      std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::optional<TokenId> Vocab::Find(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

LabelSeq Tokenize(std::string_view text, const Vocab& vocab,
                  UnknownPolicy policy) {
  LabelSeq out;
  bool pending_space = false;
  std::size_t i = 0;
  while (i < text.size()) {
    if (IsSpace(text[i])) {
      pending_space = !out.empty();
      ++i;
      continue;
    }
    if (pending_space) {
      if (!vocab.space_id()) {
        if (policy == UnknownPolicy::kStrict) {
          throw TokenizationError("vocab has no " + std::string(Vocab::kSpaceSymbol) +
                                  " token for whitespace in '" +
                                  std::string(text) + "'");
        }
      } else {
        out.push_back(*vocab.space_id());
      }
      pending_space = false;
    }
    const std::size_t len =
        std::min(Utf8Length(static_cast<unsigned char>(text[i])), text.size() - i);
    std::string ch(text.substr(i, len));
    if (len == 1) {
      ch[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(ch[0])));
    }
    i += len;
    if (auto id = vocab.Find(ch); id && *id != kBlankId && ch != Vocab::kSpaceSymbol) {
      out.push_back(*id);
    } else if (policy == UnknownPolicy::kStrict) {
      throw TokenizationError("character '" + ch + "' in '" + std::string(text) +
                              "' is not in the vocab");
    }
  }
  return out;
}

std::string Detokenize(std::span<const TokenId> ids, const Vocab& vocab) {
  std::string out;
  for (TokenId id : ids) {
    if (id == kBlankId) continue;
    if (vocab.space_id() && id == *vocab.space_id()) {
      out.push_back(' ');
    } else {
      out += vocab.symbol(id);
    }
  }
  return out;
}

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && IsSpace(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !IsSpace(text[j])) ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string NormalizeText(std::string_view text) {
  std::string out;
  for (const std::string& w : SplitWords(text)) {
    if (!out.empty()) out.push_back(' ');
    for (char c : w) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

}  // namespace ctxbias
