// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/objective.h"

#include <algorithm>
#include <string>
#include <vector>

#include "ctxbias/ctc.h"
#include "ctxbias/errors.h"

namespace ctxbias {

LabelSeq ExtractBiasTargets(std::span<const std::string> words,
                            const BiasingList& list) {
  std::vector<std::string> norm_words;
  norm_words.reserve(words.size());
  for (const std::string& w : words) norm_words.push_back(NormalizeText(w));

  std::vector<std::vector<std::string>> phrase_words(list.size());
  for (std::size_t i = 1; i < list.size(); ++i) {
    phrase_words[i] = SplitWords(NormalizeText(list.phrase(i).text));
  }

  LabelSeq targets;
  std::size_t pos = 0;
  while (pos < norm_words.size()) {
    std::size_t best = 0;
    std::size_t best_len = 0;
    for (std::size_t i = 1; i < list.size(); ++i) {
      const auto& pw = phrase_words[i];
      if (pw.empty() || pw.size() <= best_len || pos + pw.size() > norm_words.size()) {
        continue;
      }
      if (std::equal(pw.begin(), pw.end(), norm_words.begin() + static_cast<std::ptrdiff_t>(pos))) {
        best = i;
        best_len = pw.size();
      }
    }
    if (best_len == 0) {
      ++pos;
      continue;
    }
    const LabelSeq& ids = list.phrase(best).token_ids;
    targets.insert(targets.end(), ids.begin(), ids.end());
    pos += best_len;
  }
  return targets;
}

double ComposeLoss(const LossComponents& parts, const LossWeights& weights,
                   LossMode mode) {
  const double l1 = weights.ctc_weight;
  const double l2 = weights.cpp_weight;
  if (!(l2 >= 0.0 && l2 <= 1.0)) throw DomainError("CPP loss weight must lie in [0, 1]");
  switch (mode) {
    case LossMode::kCtc:
      return parts.ctc + l2 * parts.cpp;
    case LossMode::kAed:
    case LossMode::kTransducer: {
      if (!(l1 >= 0.0 && l1 <= 1.0)) throw DomainError("CTC loss weight must lie in [0, 1]");
      const std::optional<double>& base =
          mode == LossMode::kAed ? parts.attention : parts.transducer;
      if (!base) {
        throw DomainError(mode == LossMode::kAed
                              ? "AED mode needs the attention decoder loss"
                              : "transducer mode needs the transducer loss");
      }
      return l1 * parts.ctc + (1.0 - l1) * *base + l1 * l2 * parts.cpp;
    }
  }
  throw DomainError("unknown loss mode");
}

CtcObjective ComputeCtcObjective(const Matrix& audio, const BiasingList& list,
                                 std::span<const std::string> transcript_words,
                                 const Vocab& vocab, const BiasModelWeights& weights,
                                 double cpp_weight) {
  std::string transcript;
  for (const std::string& w : transcript_words) {
    if (!transcript.empty()) transcript.push_back(' ');
    transcript += w;
  }
  const ContextualOutput out = ContextualForward(audio, list, weights);
  CtcObjective obj;
  obj.ctc_loss = CtcLoss(out.posterior, Tokenize(transcript, vocab)).loss;
  obj.bias_targets = ExtractBiasTargets(transcript_words, list);
  const PosteriorMatrix cpp_post = CppForward(out.attention.context, weights);
  obj.cpp_loss = CtcLoss(cpp_post, obj.bias_targets).loss;
  obj.total = ComposeLoss({obj.ctc_loss, std::nullopt, std::nullopt, obj.cpp_loss},
                          {0.0, cpp_weight}, LossMode::kCtc);
  return obj;
}

}  // namespace ctxbias
