// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/selfcheck.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "ctxbias/context_bias.h"
#include "ctxbias/eval.h"
#include "ctxbias/phrase_filter.h"
#include "ctxbias/rng.h"

namespace ctxbias {

namespace {

Matrix RandomLogits(std::size_t rows, std::size_t cols, Rng& rng, double scale) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.Normal();
  return m;
}

// Every label over tokens 1..V-1 of length <= max_len, shortest first.
std::vector<LabelSeq> AllLabels(std::size_t vocab, std::size_t max_len) {
  std::vector<LabelSeq> out = {LabelSeq{}};
  std::size_t begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t k = 1; k < vocab; ++k) {
        LabelSeq next = out[i];
        next.push_back(static_cast<TokenId>(k));
        out.push_back(std::move(next));
      }
    }
    begin = end;
  }
  return out;
}

std::string Describe(const LabelSeq& label) {
  std::ostringstream ss;
  ss << "[";
  for (std::size_t i = 0; i < label.size(); ++i) ss << (i ? "," : "") << label[i];
  ss << "]";
  return ss.str();
}

void Record(SuiteResult& suite, bool ok, double error, const std::string& what) {
  ++suite.total;
  suite.max_error = std::max(suite.max_error, error);
  if (ok) {
    ++suite.passed;
  } else if (suite.first_failure.empty()) {
    suite.first_failure = what;
  }
}

SuiteResult CtcOracleSuite(const CtcLossFn& loss, Rng& rng) {
  SuiteResult suite;
  suite.name = "ctc_oracle";
  for (int n = 0; n < 200; ++n) {
    const auto frames = static_cast<std::size_t>(rng.UniformRange(1, 5));
    const auto vocab = static_cast<std::size_t>(rng.UniformRange(2, 4));
    const PosteriorMatrix post = PosteriorMatrix::FromLogits(RandomLogits(frames, vocab, rng, 1.5));
    for (const LabelSeq& label : AllLabels(vocab, 3)) {
      if (MinFramesForLabel(label) > frames) continue;
      const double fast = loss(post, label, false).loss;
      const double slow = CtcLossOracle(post, label);
      const double err = std::fabs(fast - slow);
      Record(suite, err < 1e-9, err,
             "T=" + std::to_string(frames) + " V=" + std::to_string(vocab) + " label=" +
                 Describe(label));
    }
  }
  return suite;
}

SuiteResult CtcGradientSuite(const CtcLossFn& loss, Rng& rng) {
  SuiteResult suite;
  suite.name = "ctc_gradient";
  constexpr std::size_t kFrames = 4;
  constexpr std::size_t kVocab = 4;
  for (int n = 0; n < 50; ++n) {
    const Matrix logits = RandomLogits(kFrames, kVocab, rng, 1.0);
    LabelSeq label;
    const auto len = static_cast<std::size_t>(rng.UniformRange(0, 2));
    for (std::size_t i = 0; i < len; ++i) {
      label.push_back(static_cast<TokenId>(rng.UniformRange(1, kVocab - 1)));
    }
    const LossResult analytic = loss(PosteriorMatrix::FromLogits(logits), label, true);
    const Matrix numeric = NumericCtcGradient(logits, label, 1e-5, loss);
    double worst = 0.0;
    for (std::size_t i = 0; i < numeric.data().size(); ++i) {
      const double a = analytic.grad_logits->data()[i];
      const double b = numeric.data()[i];
      const double scale = std::max(std::fabs(a), std::fabs(b));
      if (scale > 0.0) worst = std::max(worst, std::fabs(a - b) / scale);
    }
    Record(suite, worst < 1e-4, worst, "label=" + Describe(label));
  }
  return suite;
}

SuiteResult SocOracleSuite(Rng& rng) {
  SuiteResult suite;
  suite.name = "soc_oracle";
  for (int n = 0; n < 500; ++n) {
    const auto frames = static_cast<std::size_t>(rng.UniformRange(1, 8));
    const auto vocab = static_cast<std::size_t>(rng.UniformRange(2, 5));
    const auto len = static_cast<std::size_t>(rng.UniformRange(1, 3));
    const PosteriorMatrix post = PosteriorMatrix::FromLogits(RandomLogits(frames, vocab, rng, 2.0));
    LabelSeq phrase;
    for (std::size_t i = 0; i < len; ++i) {
      phrase.push_back(static_cast<TokenId>(rng.UniformRange(1, static_cast<std::int64_t>(vocab) - 1)));
    }
    FilterConfig config;
    config.window_scale = 1.0 + 0.5 * static_cast<double>(rng.UniformInt(5));
    config.stride = 1 + rng.UniformInt(3);
    const double soc = SequenceOrderConfidence(post, phrase, config);
    const double oracle = SequenceOrderConfidenceOracle(post, phrase, config);
    const double psc = PhraseScoreConfidence(post, phrase, config);
    const double err = std::fabs(soc - oracle);
    Record(suite, err <= 1e-12 && soc <= psc && soc >= 0.0 && psc <= 1.0, err,
           "T=" + std::to_string(frames) + " phrase=" + Describe(phrase));
  }
  return suite;
}

SuiteResult SecondPassSuite(Rng& rng) {
  SuiteResult suite;
  suite.name = "second_pass_idempotence";
  for (int n = 0; n < 20; ++n) {
    ModelConfig config;
    config.model_dim = 8;
    config.hidden_size = 4;
    config.vocab_size = 6;
    config.num_heads = n % 2 == 0 ? 1 : 2;
    const BiasModelWeights weights = BiasModelWeights::Random(config, rng);
    const auto frames = static_cast<std::size_t>(rng.UniformRange(1, 6));
    const Matrix audio = RandomLogits(frames, config.model_dim, rng, 1.0);
    const PosteriorMatrix first = FirstPass(audio, weights);
    const PosteriorMatrix second = SecondPass(audio, BiasingList(), weights);
    Record(suite, first == second, first == second ? 0.0 : 1.0,
           "instance " + std::to_string(n));
  }
  return suite;
}

std::size_t DistanceOnly(const WordSeq& a, const WordSeq& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

SuiteResult WerBookkeepingSuite(Rng& rng) {
  SuiteResult suite;
  suite.name = "wer_bookkeeping";
  const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f"};
  auto random_words = [&](std::size_t max_len) {
    WordSeq out(rng.UniformInt(max_len + 1));
    for (auto& w : out) w = words[rng.UniformInt(words.size())];
    return out;
  };
  for (int n = 0; n < 1000; ++n) {
    const WordSeq ref = random_words(8);
    const WordSeq hyp = random_words(8);
    std::set<std::string> biased;
    for (const auto& w : words) {
      if (rng.Bernoulli(0.3)) biased.insert(w);
    }
    const ScoredTranscript s = Score(ref, hyp, biased);
    const bool ok = s.wer.errors == s.u_wer.errors + s.b_wer.errors &&
                    s.wer.ref_words == s.u_wer.ref_words + s.b_wer.ref_words &&
                    EditDistance(s.ops) == DistanceOnly(ref, hyp) &&
                    s.wer.errors == DistanceOnly(ref, hyp);
    Record(suite, ok, ok ? 0.0 : 1.0, "triple " + std::to_string(n));
  }
  return suite;
}

}  // namespace

Matrix NumericCtcGradient(const Matrix& logits, const LabelSeq& label, double step,
                          const CtcLossFn& loss) {
  Matrix grad(logits.rows(), logits.cols());
  Matrix probe = logits;
  for (std::size_t i = 0; i < probe.data().size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + step;
    const double up = loss(PosteriorMatrix::FromLogits(probe), label, false).loss;
    probe.data()[i] = orig - step;
    const double down = loss(PosteriorMatrix::FromLogits(probe), label, false).loss;
    probe.data()[i] = orig;
    grad.data()[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

std::vector<SuiteResult> RunSelfCheck(const SelfCheckOptions& options) {
  const CtcLossFn loss = options.ctc_loss ? options.ctc_loss : CtcLossFn(CtcLoss);
  Rng rng(options.seed);
  std::vector<SuiteResult> suites;
  auto timed = [&](auto&& run) {
    const auto start = std::chrono::steady_clock::now();
    SuiteResult r = run();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    suites.push_back(std::move(r));
  };
  timed([&] { return CtcOracleSuite(loss, rng); });
  timed([&] { return CtcGradientSuite(loss, rng); });
  timed([&] { return SocOracleSuite(rng); });
  timed([&] { return SecondPassSuite(rng); });
  timed([&] { return WerBookkeepingSuite(rng); });
  return suites;
}

}  // namespace ctxbias
