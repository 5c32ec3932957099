// SPDX-License-Identifier: Apache-2.0
//
// CTC prefix beam search with optional on-the-fly phrase boosting.
//
// Boosting walks a prefix trie of the biasing phrases alongside each
// hypothesis. Every token that extends a partial phrase match earns
// `boost_weight`; credit becomes permanent once a phrase end is reached.
// When the match dies (or the utterance ends mid-phrase) the unconfirmed
// credit is taken back, so dead prefixes keep no free score.

#ifndef CTXBIAS_DECODER_H_
#define CTXBIAS_DECODER_H_

#include <cstddef>
#include <map>
#include <vector>

#include "ctxbias/biasing_list.h"
#include "ctxbias/posterior.h"

namespace ctxbias {

class BoostTrie {
 public:
  using NodeId = std::size_t;
  static constexpr NodeId kRoot = 0;

  BoostTrie();
  explicit BoostTrie(const std::vector<LabelSeq>& phrases);
  // Real phrases of the list; the no-bias entry is skipped.
  static BoostTrie FromList(const BiasingList& list);

  void Insert(const LabelSeq& phrase);

  // NodeId of the child reached by `token`, or kRoot if there is none (the
  // root is never anyone's child).
  NodeId Child(NodeId node, TokenId token) const;
  bool IsPhraseEnd(NodeId node) const { return nodes_[node].is_end; }
  bool HasChildren(NodeId node) const { return !nodes_[node].children.empty(); }

  bool empty() const { return num_phrases_ == 0; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_phrases() const { return num_phrases_; }

 private:
  struct Node {
    std::map<TokenId, NodeId> children;
    bool is_end = false;
  };
  std::vector<Node> nodes_;
  std::size_t num_phrases_ = 0;
};

// Position of a hypothesis inside the trie plus the number of matched
// tokens whose credit is not yet confirmed.
struct BoostState {
  BoostTrie::NodeId node = BoostTrie::kRoot;
  std::size_t pending = 0;

  bool operator==(const BoostState&) const = default;
};

struct BoostStep {
  BoostState next;
  double delta = 0.0;  // score change caused by emitting the token
};

BoostStep AdvanceBoost(const BoostTrie& trie, const BoostState& state,
                       TokenId token, double weight);

// Score change applied at the end of decoding: unconfirmed credit is removed.
double FinalizeBoost(const BoostState& state, double weight);

struct DecodeOptions {
  std::size_t beam = 8;
  const BoostTrie* boost = nullptr;  // not owned; null disables boosting
  double boost_weight = 1.0;
};

struct Hypothesis {
  LabelSeq tokens;
  double score = 0.0;     // ctc_log_prob + boost
  double ctc_log_prob = 0.0;
  double boost = 0.0;     // confirmed boost credit

  bool operator==(const Hypothesis&) const = default;
};

// Returns up to `beam` hypotheses ranked by score (ties: lexicographically
// smaller token sequence first, which also puts shorter prefixes first).
// Throws DomainError for beam == 0.
std::vector<Hypothesis> PrefixBeamDecode(const PosteriorMatrix& post,
                                         const DecodeOptions& options);

}  // namespace ctxbias

#endif  // CTXBIAS_DECODER_H_
