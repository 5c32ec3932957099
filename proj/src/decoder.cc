// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/decoder.h"

#include <algorithm>
#include <limits>

#include "ctxbias/errors.h"
#include "ctxbias/nncore.h"

namespace ctxbias {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

struct PrefixEntry {
  double log_blank = kLogZero;      // mass of alignments ending in blank
  double log_nonblank = kLogZero;   // mass of alignments ending in the last token
  BoostState boost_state;
  double boost_total = 0.0;         // confirmed + unconfirmed credit

  double LogTotal() const { return LogAdd(log_blank, log_nonblank); }
  double Score() const { return LogTotal() + boost_total; }
};

using PrefixMap = std::map<LabelSeq, PrefixEntry>;

// Entry for `prefix + token`, created from `parent` on first sight. The boost
// state depends only on the token sequence, so any parent gives the same one.
PrefixEntry& Extend(PrefixMap& next, const LabelSeq& prefix, const PrefixEntry& parent,
                    TokenId token, const DecodeOptions& options) {
  LabelSeq extended = prefix;
  extended.push_back(token);
  auto [it, inserted] = next.try_emplace(std::move(extended));
  if (inserted) {
    if (options.boost != nullptr) {
      const BoostStep step =
          AdvanceBoost(*options.boost, parent.boost_state, token, options.boost_weight);
      it->second.boost_state = step.next;
      it->second.boost_total = parent.boost_total + step.delta;
    }
  }
  return it->second;
}

PrefixEntry& Keep(PrefixMap& next, const LabelSeq& prefix, const PrefixEntry& parent) {
  auto [it, inserted] = next.try_emplace(prefix);
  if (inserted) {
    it->second.boost_state = parent.boost_state;
    it->second.boost_total = parent.boost_total;
  }
  return it->second;
}

bool Better(double score_a, const LabelSeq& a, double score_b, const LabelSeq& b) {
  if (score_a != score_b) return score_a > score_b;
  return a < b;
}

}  // namespace

BoostTrie::BoostTrie() : nodes_(1) {}

BoostTrie::BoostTrie(const std::vector<LabelSeq>& phrases) : BoostTrie() {
  for (const LabelSeq& p : phrases) Insert(p);
}

BoostTrie BoostTrie::FromList(const BiasingList& list) {
  BoostTrie trie;
  for (std::size_t i = 1; i < list.size(); ++i) trie.Insert(list.phrase(i).token_ids);
  return trie;
}

void BoostTrie::Insert(const LabelSeq& phrase) {
  if (phrase.empty()) throw DomainError("cannot insert an empty phrase into the boost trie");
  NodeId node = kRoot;
  for (TokenId tok : phrase) {
    if (tok <= kBlankId) throw DomainError("boost phrases cannot contain blank");
    auto it = nodes_[node].children.find(tok);
    if (it == nodes_[node].children.end()) {
      nodes_.emplace_back();
      it = nodes_[node].children.emplace(tok, nodes_.size() - 1).first;
    }
    node = it->second;
  }
  if (!nodes_[node].is_end) {
    nodes_[node].is_end = true;
    ++num_phrases_;
  }
}

BoostTrie::NodeId BoostTrie::Child(NodeId node, TokenId token) const {
  const auto& children = nodes_[node].children;
  auto it = children.find(token);
  return it == children.end() ? kRoot : it->second;
}

BoostStep AdvanceBoost(const BoostTrie& trie, const BoostState& state,
                       TokenId token, double weight) {
  BoostStep step;
  BoostState from = state;
  BoostTrie::NodeId child = trie.Child(from.node, token);
  if (child == BoostTrie::kRoot && from.node != BoostTrie::kRoot) {
    // Failure arc: give back the unconfirmed credit and retry from the root.
    step.delta -= weight * static_cast<double>(from.pending);
    from = BoostState{};
    child = trie.Child(BoostTrie::kRoot, token);
  }
  if (child == BoostTrie::kRoot) {
    step.next = BoostState{};
    return step;
  }
  step.delta += weight;
  step.next = {child, from.pending + 1};
  if (trie.IsPhraseEnd(child)) {
    step.next.pending = 0;
    if (!trie.HasChildren(child)) step.next.node = BoostTrie::kRoot;
  }
  return step;
}

double FinalizeBoost(const BoostState& state, double weight) {
  return -weight * static_cast<double>(state.pending);
}

std::vector<Hypothesis> PrefixBeamDecode(const PosteriorMatrix& post,
                                         const DecodeOptions& options) {
  if (options.beam == 0) throw DomainError("beam width must be at least 1");
  const std::size_t vocab = post.vocab_size();

  std::vector<std::pair<LabelSeq, PrefixEntry>> beam;
  PrefixEntry start;
  start.log_blank = 0.0;
  beam.emplace_back(LabelSeq{}, start);

  for (std::size_t t = 0; t < post.num_frames(); ++t) {
    PrefixMap next;
    for (const auto& [prefix, entry] : beam) {
      const double total = entry.LogTotal();
      for (std::size_t k = 0; k < vocab; ++k) {
        const auto token = static_cast<TokenId>(k);
        const double lp = post.logp(t, k);
        if (token == kBlankId) {
          PrefixEntry& same = Keep(next, prefix, entry);
          same.log_blank = LogAdd(same.log_blank, total + lp);
        } else if (!prefix.empty() && prefix.back() == token) {
          PrefixEntry& same = Keep(next, prefix, entry);
          same.log_nonblank = LogAdd(same.log_nonblank, entry.log_nonblank + lp);
          PrefixEntry& ext = Extend(next, prefix, entry, token, options);
          ext.log_nonblank = LogAdd(ext.log_nonblank, entry.log_blank + lp);
        } else {
          PrefixEntry& ext = Extend(next, prefix, entry, token, options);
          ext.log_nonblank = LogAdd(ext.log_nonblank, total + lp);
        }
      }
    }

    // Prefixes with no surviving path (e.g. a repeat with no blank yet) hold
    // no mass and must not occupy beam slots.
    beam.clear();
    for (auto& [prefix, entry] : next) {
      if (entry.LogTotal() > -std::numeric_limits<double>::infinity()) {
        beam.emplace_back(prefix, std::move(entry));
      }
    }
    const std::size_t keep = std::min(options.beam, beam.size());
    std::partial_sort(beam.begin(), beam.begin() + static_cast<std::ptrdiff_t>(keep),
                      beam.end(), [](const auto& a, const auto& b) {
                        return Better(a.second.Score(), a.first, b.second.Score(), b.first);
                      });
    beam.resize(keep);
  }

  std::vector<Hypothesis> hyps;
  hyps.reserve(beam.size());
  for (auto& [prefix, entry] : beam) {
    Hypothesis h;
    h.tokens = prefix;
    h.ctc_log_prob = entry.LogTotal();
    h.boost = entry.boost_total;
    if (options.boost != nullptr) {
      h.boost += FinalizeBoost(entry.boost_state, options.boost_weight);
    }
    h.score = h.ctc_log_prob + h.boost;
    hyps.push_back(std::move(h));
  }
  std::stable_sort(hyps.begin(), hyps.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return Better(a.score, a.tokens, b.score, b.tokens);
  });
  return hyps;
}

}  // namespace ctxbias
