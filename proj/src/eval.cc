// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/eval.h"

#include <algorithm>

#include "ctxbias/errors.h"

namespace ctxbias {

std::vector<AlignOp> Align(std::span<const std::string> ref,
                           std::span<const std::string> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  std::vector<AlignOp> ops;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        ops.push_back({same ? EditKind::kMatch : EditKind::kSubstitution, i - 1, j - 1});
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ops.push_back({EditKind::kDeletion, i - 1, std::nullopt});
      --i;
    } else {
      ops.push_back({EditKind::kInsertion, std::nullopt, j - 1});
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

std::size_t EditDistance(std::span<const AlignOp> ops) {
  return static_cast<std::size_t>(std::count_if(
      ops.begin(), ops.end(), [](const AlignOp& op) { return op.kind != EditKind::kMatch; }));
}

std::optional<double> ErrorRate::rate() const {
  if (ref_words == 0) return std::nullopt;
  return static_cast<double>(errors) / static_cast<double>(ref_words);
}

std::set<std::string> BiasedWordSet(const BiasingList& list) {
  std::set<std::string> words;
  for (std::size_t i = 1; i < list.size(); ++i) {
    for (std::string& w : SplitWords(NormalizeText(list.phrase(i).text))) {
      words.insert(std::move(w));
    }
  }
  return words;
}

ScoredTranscript Score(std::span<const std::string> ref, std::span<const std::string> hyp,
                       const std::set<std::string>& biased_words) {
  ScoredTranscript s;
  s.ops = Align(ref, hyp);
  s.ref_biased.resize(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    s.ref_biased[i] = biased_words.contains(ref[i]);
    (s.ref_biased[i] ? s.b_wer : s.u_wer).ref_words += 1;
  }
  s.wer.ref_words = ref.size();
  for (const AlignOp& op : s.ops) {
    switch (op.kind) {
      case EditKind::kMatch:
        continue;
      case EditKind::kSubstitution:
        ++s.substitutions;
        break;
      case EditKind::kDeletion:
        ++s.deletions;
        break;
      case EditKind::kInsertion:
        ++s.insertions;
        break;
    }
    const bool biased = op.ref_index ? s.ref_biased[*op.ref_index]
                                     : biased_words.contains(hyp[*op.hyp_index]);
    (biased ? s.b_wer : s.u_wer).errors += 1;
    s.wer.errors += 1;
  }
  return s;
}

ScoredTranscript Score(std::span<const std::string> ref, std::span<const std::string> hyp,
                       const BiasingList& list) {
  return Score(ref, hyp, BiasedWordSet(list));
}

void CorpusScore::Add(const ScoredTranscript& s) {
  wer += s.wer;
  u_wer += s.u_wer;
  b_wer += s.b_wer;
  substitutions += s.substitutions;
  deletions += s.deletions;
  insertions += s.insertions;
  ++utterances;
}

std::size_t CountPhraseOccurrences(std::span<const std::string> words,
                                   std::span<const std::string> phrase) {
  if (phrase.empty()) return 0;
  std::size_t count = 0;
  std::size_t i = 0;
  while (i + phrase.size() <= words.size()) {
    if (std::equal(phrase.begin(), phrase.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
      ++count;
      i += phrase.size();
    } else {
      ++i;
    }
  }
  return count;
}

PhraseMetrics PhrasePrf(const std::vector<WordSeq>& refs, const std::vector<WordSeq>& hyps,
                        const std::vector<WordSeq>& phrases) {
  if (refs.size() != hyps.size()) {
    throw DomainError("phrase metrics need one hypothesis per reference");
  }
  PhraseMetrics m;
  for (std::size_t u = 0; u < refs.size(); ++u) {
    for (const WordSeq& phrase : phrases) {
      const std::size_t r = CountPhraseOccurrences(refs[u], phrase);
      const std::size_t h = CountPhraseOccurrences(hyps[u], phrase);
      m.ref_occurrences += r;
      m.hyp_occurrences += h;
      m.matched += std::min(r, h);
    }
  }
  if (m.ref_occurrences > 0) {
    m.recall = static_cast<double>(m.matched) / static_cast<double>(m.ref_occurrences);
  }
  if (m.hyp_occurrences > 0) {
    m.precision = static_cast<double>(m.matched) / static_cast<double>(m.hyp_occurrences);
  }
  if (m.recall && m.precision) {
    const double sum = *m.recall + *m.precision;
    m.f1 = sum > 0 ? 2.0 * *m.recall * *m.precision / sum : 0.0;
  }
  return m;
}

}  // namespace ctxbias
