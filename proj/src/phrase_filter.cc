// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/phrase_filter.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctxbias/errors.h"

namespace ctxbias {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void CheckPhrase(const Matrix& probs, const LabelSeq& phrase) {
  if (phrase.empty()) throw DomainError("cannot score an empty phrase");
  if (probs.rows() == 0) throw DomainError("posterior has no frames");
  for (TokenId id : phrase) {
    if (id < 0 || static_cast<std::size_t>(id) >= probs.cols()) {
      throw DomainError("phrase token " + std::to_string(id) +
                        " outside posterior vocab of " + std::to_string(probs.cols()));
    }
  }
}

// Best strictly-ordered token placement inside [lo, hi); 0 if it cannot fit.
double WindowSoc(const Matrix& probs, const LabelSeq& phrase, std::size_t lo,
                 std::size_t hi, std::vector<double>& prev, std::vector<double>& cur) {
  const std::size_t width = hi - lo;
  if (phrase.size() > width) return 0.0;
  prev.assign(width, kNegInf);
  cur.assign(width, kNegInf);
  for (std::size_t t = 0; t < width; ++t) prev[t] = probs(lo + t, phrase[0]);
  for (std::size_t u = 1; u < phrase.size(); ++u) {
    double running = kNegInf;
    for (std::size_t t = 0; t < width; ++t) {
      cur[t] = running == kNegInf ? kNegInf : probs(lo + t, phrase[u]) + running;
      running = std::max(running, prev[t]);
    }
    std::swap(prev, cur);
  }
  const double best = *std::max_element(prev.begin(), prev.end());
  return best == kNegInf ? 0.0 : best;
}

double PscImpl(const Matrix& probs, const LabelSeq& phrase, const FilterConfig& config,
               std::uint64_t* cells) {
  CheckPhrase(probs, phrase);
  const double u = static_cast<double>(phrase.size());
  double best = 0.0;
  for (const auto& [lo, hi] : FilterWindows(probs.rows(), phrase.size(), config)) {
    double sum = 0.0;
    for (TokenId tok : phrase) {
      double m = 0.0;
      for (std::size_t t = lo; t < hi; ++t) m = std::max(m, probs(t, tok));
      sum += m;
    }
    if (cells != nullptr) *cells += phrase.size() * (hi - lo);
    best = std::max(best, sum / u);
  }
  return best;
}

double SocImpl(const Matrix& probs, const LabelSeq& phrase, const FilterConfig& config,
               std::uint64_t* cells) {
  CheckPhrase(probs, phrase);
  const double u = static_cast<double>(phrase.size());
  std::vector<double> prev;
  std::vector<double> cur;
  double best = 0.0;
  for (const auto& [lo, hi] : FilterWindows(probs.rows(), phrase.size(), config)) {
    best = std::max(best, WindowSoc(probs, phrase, lo, hi, prev, cur) / u);
    if (cells != nullptr) *cells += phrase.size() * (hi - lo);
  }
  return best;
}

std::uint64_t Binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

void FilterConfig::Validate() const {
  if (!(window_scale >= 1.0)) throw ConfigError("window scale must be at least 1");
  if (stride < 1) throw ConfigError("stride must be at least 1");
  if (!(psc_threshold >= 0.0 && psc_threshold <= 1.0)) {
    throw ConfigError("PSC threshold must lie in [0, 1]");
  }
  if (!(soc_threshold >= 0.0 && soc_threshold <= 1.0)) {
    throw ConfigError("SOC threshold must lie in [0, 1]");
  }
}

std::size_t FilterConfig::WindowWidth(std::size_t phrase_len) const {
  const auto scaled =
      static_cast<std::size_t>(std::ceil(window_scale * static_cast<double>(phrase_len)));
  return std::max(phrase_len, scaled);
}

std::vector<std::pair<std::size_t, std::size_t>> FilterWindows(
    std::size_t num_frames, std::size_t phrase_len, const FilterConfig& config) {
  config.Validate();
  const std::size_t width = std::min(config.WindowWidth(phrase_len), num_frames);
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  if (num_frames == 0) return windows;
  std::size_t start = 0;
  for (; start + width <= num_frames; start += config.stride) {
    windows.emplace_back(start, start + width);
  }
  if (windows.back().second < num_frames) {
    windows.emplace_back(num_frames - width, num_frames);
  }
  return windows;
}

double PhraseScoreConfidence(const Matrix& probs, const LabelSeq& phrase,
                             const FilterConfig& config) {
  return PscImpl(probs, phrase, config, nullptr);
}

double PhraseScoreConfidence(const PosteriorMatrix& post, const LabelSeq& phrase,
                             const FilterConfig& config) {
  return PscImpl(post.Probs(), phrase, config, nullptr);
}

double SequenceOrderConfidence(const Matrix& probs, const LabelSeq& phrase,
                               const FilterConfig& config) {
  return SocImpl(probs, phrase, config, nullptr);
}

double SequenceOrderConfidence(const PosteriorMatrix& post, const LabelSeq& phrase,
                               const FilterConfig& config) {
  return SocImpl(post.Probs(), phrase, config, nullptr);
}

double SequenceOrderConfidenceOracle(const PosteriorMatrix& post,
                                     const LabelSeq& phrase,
                                     const FilterConfig& config,
                                     std::uint64_t budget) {
  const Matrix probs = post.Probs();
  CheckPhrase(probs, phrase);
  const auto windows = FilterWindows(probs.rows(), phrase.size(), config);
  std::uint64_t total = 0;
  for (const auto& [lo, hi] : windows) {
    total += Binomial(hi - lo, phrase.size());
    if (total > budget) {
      throw OracleRefusedError("SOC enumeration exceeds the budget of " +
                               std::to_string(budget) + " assignments");
    }
  }

  const std::size_t u = phrase.size();
  double best = 0.0;
  std::vector<std::size_t> frames(u);
  for (const auto& [lo, hi] : windows) {
    if (hi - lo < u) continue;
    // Lexicographic walk over all strictly increasing u-tuples in [lo, hi).
    for (std::size_t i = 0; i < u; ++i) frames[i] = lo + i;
    while (true) {
      double sum = 0.0;
      for (std::size_t i = 0; i < u; ++i) sum += probs(frames[i], phrase[i]);
      best = std::max(best, sum / static_cast<double>(u));
      std::size_t i = u;
      while (i > 0 && frames[i - 1] == hi - u + (i - 1)) --i;
      if (i == 0) break;
      ++frames[i - 1];
      for (std::size_t j = i; j < u; ++j) frames[j] = frames[j - 1] + 1;
    }
  }
  return best;
}

const char* VerdictName(FilterVerdict v) {
  switch (v) {
    case FilterVerdict::kKept:
      return "kept";
    case FilterVerdict::kDroppedStage1:
      return "dropped_stage1";
    case FilterVerdict::kDroppedStage2:
      return "dropped_stage2";
    case FilterVerdict::kDroppedCapacity:
      return "dropped_capacity";
  }
  return "?";
}

FilterResult FilterList(const PosteriorMatrix& first_pass, const BiasingList& list,
                        const FilterConfig& config) {
  config.Validate();
  const Matrix probs = first_pass.Probs();
  FilterResult result;
  FilterReport& report = result.report;
  report.config = config;
  report.counters.phrases_in = list.num_phrases();

  std::vector<std::size_t> survivors;  // positions in report.entries
  for (std::size_t i = 1; i < list.size(); ++i) {
    PhraseFilterEntry entry;
    entry.list_index = i;
    entry.text = list.phrase(i).text;
    entry.provenance = list.provenance(i);
    const LabelSeq& tokens = list.phrase(i).token_ids;
    entry.psc = PscImpl(probs, tokens, config, &report.counters.stage1_window_cells);
    ++report.counters.stage1_evaluated;
    if (entry.psc >= config.psc_threshold) {
      entry.soc = SocImpl(probs, tokens, config, &report.counters.stage2_dp_cells);
      ++report.counters.stage2_evaluated;
      entry.verdict = *entry.soc >= config.soc_threshold ? FilterVerdict::kKept
                                                         : FilterVerdict::kDroppedStage2;
      if (entry.verdict == FilterVerdict::kKept) survivors.push_back(report.entries.size());
    }
    report.entries.push_back(std::move(entry));
  }

  std::stable_sort(survivors.begin(), survivors.end(), [&](std::size_t a, std::size_t b) {
    return *report.entries[a].soc > *report.entries[b].soc;
  });
  std::vector<std::size_t> kept_indices;
  for (std::size_t rank = 0; rank < survivors.size(); ++rank) {
    PhraseFilterEntry& entry = report.entries[survivors[rank]];
    if (rank < config.max_kept) {
      kept_indices.push_back(entry.list_index);
    } else {
      entry.verdict = FilterVerdict::kDroppedCapacity;
    }
  }
  report.counters.kept = kept_indices.size();
  result.filtered = list.Subset(kept_indices);
  return result;
}

PosteriorMatrix FirstPass(const Matrix& audio, const BiasModelWeights& weights) {
  return ContextualForward(audio, BiasingList(), weights).posterior;
}

PosteriorMatrix SecondPass(const Matrix& audio, const BiasingList& filtered,
                           const BiasModelWeights& weights) {
  return ContextualForward(audio, filtered, weights).posterior;
}

}  // namespace ctxbias
