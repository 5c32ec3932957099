// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/context_bias.h"

#include <gtest/gtest.h>

#include <cmath>

#include "ctxbias/biasing_list.h"
#include "ctxbias/errors.h"
#include "ctxbias/rng.h"
#include "ctxbias/vocab.h"

namespace ctxbias {
namespace {

Vocab SmallVocab() { return Vocab({"<blank>", "a", "b", "<space>"}); }

ModelConfig SmallConfig(std::size_t d = 4, std::size_t h = 3, std::size_t v = 4,
                        std::size_t heads = 1) {
  ModelConfig c;
  c.model_dim = d;
  c.hidden_size = h;
  c.vocab_size = v;
  c.num_heads = heads;
  return c;
}

Matrix RandomMatrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.Normal();
  return m;
}

// ---- vocab and tokenizer --------------------------------------------------

TEST(Tokenize, Empty) { EXPECT_TRUE(Tokenize("", SmallVocab()).empty()); }

TEST(Tokenize, DirectLookup) { EXPECT_EQ(Tokenize("aa", SmallVocab()), (LabelSeq{1, 1})); }

TEST(Tokenize, SpaceToken) { EXPECT_EQ(Tokenize("ab a", SmallVocab()), (LabelSeq{1, 2, 3, 1})); }

TEST(Tokenize, LowercasesAndCollapsesWhitespace) {
  EXPECT_EQ(Tokenize("  AB \t A ", SmallVocab()), (LabelSeq{1, 2, 3, 1}));
}

TEST(Tokenize, StrictPolicyNamesCharacter) {
  try {
    Tokenize("abz", SmallVocab());
    FAIL() << "expected TokenizationError";
  } catch (const TokenizationError& e) {
    EXPECT_NE(std::string(e.what()).find("'z'"), std::string::npos) << e.what();
  }
}

TEST(Tokenize, SkipPolicyDropsUnknown) {
  EXPECT_EQ(Tokenize("azb", SmallVocab(), UnknownPolicy::kSkip), (LabelSeq{1, 2}));
}

TEST(Tokenize, DetokenizeRoundTrip) {
  const Vocab v = SmallVocab();
  EXPECT_EQ(Detokenize(Tokenize("ab ba a", v), v), "ab ba a");
}

TEST(Vocab, Invariants) {
  EXPECT_THROW(Vocab({"a", "<blank>"}), DomainError);
  EXPECT_THROW(Vocab({"<blank>", "a", "a"}), DomainError);
  EXPECT_THROW(Vocab({"<blank>"}), DomainError);
  EXPECT_EQ(SmallVocab().size(), 4u);
}

// ---- phrases and lists ----------------------------------------------------

TEST(BiasingList, NoBiasFirst) {
  const BiasingList list = BiasingList::FromTexts({"ab", "b"}, SmallVocab());
  ASSERT_EQ(list.size(), 3u);
  EXPECT_EQ(list.num_phrases(), 2u);
  EXPECT_TRUE(list.phrase(0).is_no_bias);
  EXPECT_EQ(list.phrase(0).token_ids, LabelSeq{kBlankId});
  EXPECT_EQ(list.phrase(1).token_ids, (LabelSeq{1, 2}));
}

TEST(BiasingList, RejectsEmptyAndSecondNoBias) {
  BiasingList list;
  EXPECT_THROW(list.Add(ContextPhrase::NoBias()), DomainError);
  EXPECT_THROW(ContextPhrase::FromText("   ", SmallVocab()), DomainError);
}

// ---- context encoder ------------------------------------------------------

TEST(EncodePhrase, ZeroLstmGivesReadoutBias) {
  BiasModelWeights w = BiasModelWeights::Zeros(SmallConfig());
  w.encoder_readout.bias = {0.5, -1.0, 2.0, 0.25};
  for (const char* text : {"a", "ab ba"}) {
    EXPECT_EQ(EncodePhrase(ContextPhrase::FromText(text, SmallVocab()), w),
              w.encoder_readout.bias);
  }
}

TEST(EncodePhrase, SingleTokenSymmetricWeights) {
  Rng rng(21);
  BiasModelWeights w = BiasModelWeights::Random(SmallConfig(), rng);
  w.encoder_bwd = w.encoder_fwd;
  // Readout [A, B, A, B] so the symmetric [s, s] concat is visible in the output.
  const std::size_t h = w.config.hidden_size;
  for (std::size_t r = 0; r < w.config.model_dim; ++r) {
    for (std::size_t j = 0; j < 2 * h; ++j) w.encoder_readout.weight(r, 2 * h + j) = 0.0;
  }
  const Vector half = EncodePhrase(ContextPhrase::FromText("b", SmallVocab()), w);
  for (std::size_t r = 0; r < w.config.model_dim; ++r) {
    for (std::size_t j = 0; j < 2 * h; ++j) {
      w.encoder_readout.weight(r, 2 * h + j) = w.encoder_readout.weight(r, j);
    }
  }
  const Vector full = EncodePhrase(ContextPhrase::FromText("b", SmallVocab()), w);
  for (std::size_t r = 0; r < full.size(); ++r) {
    EXPECT_NEAR(full[r] - w.encoder_readout.bias[r], 2.0 * (half[r] - w.encoder_readout.bias[r]),
                1e-12);
  }
}

TEST(EncodePhrase, TwoTokenScalarHandValue) {
  ModelConfig c = SmallConfig(1, 1, 4, 1);
  BiasModelWeights w = BiasModelWeights::Zeros(c);
  for (LstmWeights* l : {&w.encoder_fwd, &w.encoder_bwd}) {
    l->w_ih = Matrix(4, 4, 1.0);
    l->w_hh = Matrix(4, 1, 1.0);
    l->bias = Vector(4, 1.0);
  }
  w.encoder_readout.weight = Matrix(1, 4, 1.0);
  w.encoder_readout.bias = {0.0};
  const Vector e = EncodePhrase(ContextPhrase::FromText("ab", SmallVocab()), w);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_NEAR(e[0], 5.1696695543986364369, 1e-13);
}

TEST(EncodePhrase, ReversalWithSwappedDirections) {
  Rng rng(22);
  const Vocab vocab = SmallVocab();
  for (int n = 0; n < 20; ++n) {
    const BiasModelWeights w = BiasModelWeights::Random(SmallConfig(), rng);
    BiasModelWeights swapped = w;
    std::swap(swapped.encoder_fwd, swapped.encoder_bwd);
    const std::size_t h = w.config.hidden_size;
    for (std::size_t r = 0; r < w.config.model_dim; ++r) {
      for (std::size_t j = 0; j < 2 * h; ++j) {
        std::swap(swapped.encoder_readout.weight(r, j), swapped.encoder_readout.weight(r, 2 * h + j));
      }
    }
    ContextPhrase phrase = ContextPhrase::FromText("ab ba", vocab);
    ContextPhrase reversed = phrase;
    std::reverse(reversed.token_ids.begin(), reversed.token_ids.end());
    const Vector a = EncodePhrase(phrase, w);
    const Vector b = EncodePhrase(reversed, swapped);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(EncodePhrase, OutOfVocabIdIsDomainError) {
  const BiasModelWeights w = BiasModelWeights::Zeros(SmallConfig());
  ContextPhrase p{"x", {1, 9}, false};
  EXPECT_THROW(EncodePhrase(p, w), DomainError);
}

TEST(EncodePhrase, Deterministic) {
  Rng rng(23);
  const BiasModelWeights w = BiasModelWeights::Random(SmallConfig(), rng);
  const ContextPhrase p = ContextPhrase::FromText("abab", SmallVocab());
  EXPECT_EQ(EncodePhrase(p, w), EncodePhrase(p, w));
}

TEST(EncodeBiasingList, ShapesAndOrder) {
  Rng rng(24);
  const BiasModelWeights w = BiasModelWeights::Random(SmallConfig(), rng);
  EXPECT_EQ(EncodeBiasingList(BiasingList(), w).rows(), 1u);
  const BiasingList list = BiasingList::FromTexts({"ab", "b", "ab"}, SmallVocab());
  const Matrix e = EncodeBiasingList(list, w);
  ASSERT_EQ(e.rows(), 4u);
  const Vector no_bias = EncodePhrase(ContextPhrase::NoBias(), w);
  for (std::size_t j = 0; j < e.cols(); ++j) {
    EXPECT_EQ(e(0, j), no_bias[j]);
    EXPECT_EQ(e(1, j), e(3, j));
  }
}

// ---- biasing attention ----------------------------------------------------

TEST(BiasingAttention, NoBiasOnly) {
  Rng rng(25);
  const BiasModelWeights w = BiasModelWeights::Random(SmallConfig(), rng);
  const Matrix audio = RandomMatrix(rng, 5, 4);
  const Matrix emb = EncodeBiasingList(BiasingList(), w);
  const AttentionResult r = BiasingAttention(audio, emb, w);
  const Vector value = MatVec(w.value, emb.row(0));
  const Vector expected = MatVec(w.output, value);
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_EQ(r.head_weights[0](t, 0), 1.0);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(r.context(t, j), expected[j], 1e-15);
  }
}

TEST(BiasingAttention, IdenticalEmbeddingsGiveUniformRows) {
  Rng rng(26);
  const BiasModelWeights w = BiasModelWeights::Random(SmallConfig(), rng);
  Matrix emb(3, 4);
  const Matrix one = RandomMatrix(rng, 1, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) emb(i, j) = one(0, j);
  }
  const AttentionResult r = BiasingAttention(RandomMatrix(rng, 2, 4), emb, w);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.head_weights[0](t, i), 1.0 / 3.0, 1e-15);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(r.context(t, j), one(0, j), 1e-12);
  }
}

TEST(BiasingAttention, HandComputedTwoDim) {
  BiasModelWeights w = BiasModelWeights::Zeros(SmallConfig(2, 1, 4, 1));
  w.query = Matrix::Identity(2);
  w.key = Matrix::Identity(2);
  const Matrix emb = Matrix::FromRows({{0, 0}, {1, 1}, {2, -1}});
  const AttentionResult r = BiasingAttention(Matrix::FromRows({{1, 0}}), emb, w);
  EXPECT_NEAR(r.head_weights[0](0, 0), 0.14002924504337800991, 1e-15);
  EXPECT_NEAR(r.head_weights[0](0, 1), 0.28399540974126001526, 1e-15);
  EXPECT_NEAR(r.head_weights[0](0, 2), 0.57597534521536197482, 1e-15);
  EXPECT_NEAR(r.context(0, 0), 1.4359461001719839649, 1e-14);
  EXPECT_NEAR(r.context(0, 1), -0.29197993547410195956, 1e-14);
}

TEST(BiasingAttention, HeadsMustDivideDim) {
  ModelConfig c = SmallConfig(4, 3, 4, 3);
  EXPECT_THROW(c.Validate(), ConfigError);
  BiasModelWeights w = BiasModelWeights::Zeros(SmallConfig());
  w.config.num_heads = 3;
  EXPECT_THROW(BiasingAttention(Matrix(1, 4), Matrix(1, 4), w), ConfigError);
}

TEST(BiasingAttention, RowsSumToOneEveryHead) {
  Rng rng(27);
  for (std::size_t heads : {1u, 2u, 4u}) {
    const BiasModelWeights w = BiasModelWeights::Random(SmallConfig(8, 3, 4, heads), rng);
    const AttentionResult r = BiasingAttention(RandomMatrix(rng, 6, 8), RandomMatrix(rng, 5, 8), w);
    ASSERT_EQ(r.head_weights.size(), heads);
    for (const Matrix& m : r.head_weights) {
      for (std::size_t t = 0; t < m.rows(); ++t) {
        double sum = 0.0;
        for (double v : m.row(t)) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-9);
      }
    }
  }
}

TEST(BiasingAttention, PermutationEquivariant) {
  Rng rng(28);
  for (std::size_t heads : {1u, 2u}) {
    const BiasModelWeights w = BiasModelWeights::Random(SmallConfig(4, 3, 4, heads), rng);
    const Matrix audio = RandomMatrix(rng, 3, 4);
    const Matrix emb = RandomMatrix(rng, 4, 4);
    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    Matrix permuted(4, 4);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) permuted(i, j) = emb(perm[i], j);
    }
    const AttentionResult a = BiasingAttention(audio, emb, w);
    const AttentionResult b = BiasingAttention(audio, permuted, w);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t i = 0; i < 4; ++i) {
          EXPECT_NEAR(b.head_weights[hd](t, i), a.head_weights[hd](t, perm[i]), 1e-15);
        }
      }
    }
    for (std::size_t k = 0; k < a.context.data().size(); ++k) {
      EXPECT_NEAR(a.context.data()[k], b.context.data()[k], 1e-12);
    }
  }
}

TEST(BiasingAttention, GeneralPathEqualsLiteralWeightedSum) {
  Rng rng(29);
  BiasModelWeights w = BiasModelWeights::Random(SmallConfig(), rng);
  w.value = Matrix::Identity(4);
  w.output = Matrix::Identity(4);
  const Matrix audio = RandomMatrix(rng, 4, 4);
  const Matrix emb = RandomMatrix(rng, 3, 4);
  const AttentionResult r = BiasingAttention(audio, emb, w);
  for (std::size_t t = 0; t < 4; ++t) {
    const Vector q = MatVec(w.query, audio.row(t));
    Vector scores(3);
    for (std::size_t i = 0; i < 3; ++i) {
      const Vector k = MatVec(w.key, emb.row(i));
      for (std::size_t j = 0; j < 4; ++j) scores[i] += q[j] * k[j];
      scores[i] /= 2.0;
    }
    const Vector alpha = Softmax(scores);
    for (std::size_t j = 0; j < 4; ++j) {
      double c = 0.0;
      for (std::size_t i = 0; i < 3; ++i) c += alpha[i] * emb(i, j);
      EXPECT_NEAR(r.context(t, j), c, 1e-12);
    }
  }
}

// ---- combiner, CPP and CTC head ------------------------------------------

TEST(Combine, ZeroFeedForwardGivesBias) {
  BiasModelWeights w = BiasModelWeights::Zeros(SmallConfig());
  w.combiner_ff.bias = {1, 2, 3, 4};
  Rng rng(30);
  const Matrix out = Combine(RandomMatrix(rng, 3, 4), RandomMatrix(rng, 3, 4), w);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(out(t, j), w.combiner_ff.bias[j]);
  }
}

TEST(Combine, SymmetricConcatWeights) {
  Rng rng(31);
  BiasModelWeights w = BiasModelWeights::Zeros(SmallConfig());
  const Matrix a = RandomMatrix(rng, 4, 4);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t j = 0; j < 4; ++j) {
      w.combiner_ff.weight(r, j) = a(r, j);
      w.combiner_ff.weight(r, 4 + j) = a(r, j);
    }
  }
  const Matrix h = RandomMatrix(rng, 2, 4);
  const Matrix out = Combine(h, h, w);
  for (std::size_t t = 0; t < 2; ++t) {
    Vector ln = LayerNorm(h.row(t), w.ln_audio_gain, w.ln_audio_bias, w.config.layer_norm_eps);
    for (double& v : ln) v *= 2.0;
    const Vector expected = Linear(ln, a, w.combiner_ff.bias);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out(t, j), expected[j], 1e-12);
  }
}

TEST(Combine, HandComputedTwoDim) {
  BiasModelWeights w = BiasModelWeights::Zeros(SmallConfig(2, 1, 4, 1));
  w.combiner_ff.weight = Matrix::FromRows({{1, 2, 0, -1}, {0, 1, 1, 1}});
  w.combiner_ff.bias = {0.5, -1.0};
  const Matrix out = Combine(Matrix::FromRows({{1, 3}}), Matrix::FromRows({{2, -2}}), w);
  EXPECT_NEAR(out(0, 0), 2.4999937500398434326, 1e-14);
  EXPECT_NEAR(out(0, 1), -4.9999625003124972656e-6, 1e-14);
}

TEST(Combine, ShapeMismatch) {
  const BiasModelWeights w = BiasModelWeights::Zeros(SmallConfig());
  EXPECT_THROW(Combine(Matrix(2, 4), Matrix(3, 4), w), DomainError);
  EXPECT_THROW(Combine(Matrix(2, 3), Matrix(2, 3), w), DomainError);
}

BiasModelWeights HandHeadWeights() {
  BiasModelWeights w = BiasModelWeights::Zeros(SmallConfig(2, 1, 3, 1));
  w.cpp_hidden.weight = Matrix::FromRows({{1, 0}, {0, -1}});
  w.cpp_hidden.bias = {0.5, 0.0};
  w.ctc_linear.weight = Matrix::FromRows({{1, 1}, {2, 0}, {0, -1}});
  w.ctc_linear.bias = {0.0, 0.1, 0.2};
  return w;
}

TEST(CppForward, ConstantRowFromSharedBias) {
  BiasModelWeights w = BiasModelWeights::Zeros(SmallConfig());
  w.ctc_linear.bias = {0.0, 1.0, 2.0, 3.0};
  Rng rng(32);
  const PosteriorMatrix p = CppForward(RandomMatrix(rng, 3, 4), w);
  const Vector expected = LogSoftmax(w.ctc_linear.bias);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t v = 0; v < 4; ++v) EXPECT_NEAR(p.logp(t, v), expected[v], 1e-15);
  }
}

TEST(CppForward, IdenticalFramesIdenticalRows) {
  Rng rng(33);
  const BiasModelWeights w = BiasModelWeights::Random(SmallConfig(), rng);
  Matrix c = RandomMatrix(rng, 2, 4);
  for (std::size_t j = 0; j < 4; ++j) c(1, j) = c(0, j);
  const PosteriorMatrix p = CppForward(c, w);
  for (std::size_t v = 0; v < 4; ++v) EXPECT_EQ(p.logp(0, v), p.logp(1, v));
}

TEST(CppForward, HandComputed) {
  const PosteriorMatrix p = CppForward(Matrix::FromRows({{0.3, 0.7}}), HandHeadWeights());
  EXPECT_NEAR(p.logp(0, 0), -1.9508812117530605747, 1e-14);
  EXPECT_NEAR(p.logp(0, 1), -0.58247666436804811466, 1e-14);
  EXPECT_NEAR(p.logp(0, 2), -1.2061824277865825457, 1e-14);
}

TEST(CtcHead, HandComputed) {
  const PosteriorMatrix p = CtcHead(Matrix::FromRows({{0.3, 0.7}}), HandHeadWeights());
  EXPECT_NEAR(p.logp(0, 0), -0.67495692691383775398, 1e-14);
  EXPECT_NEAR(p.logp(0, 1), -0.97495692691383775398, 1e-14);
  EXPECT_NEAR(p.logp(0, 2), -2.174956926913837754, 1e-14);
}

TEST(CtcHead, ConstantInputConstantRows) {
  Rng rng(34);
  const BiasModelWeights w = BiasModelWeights::Random(SmallConfig(), rng);
  const PosteriorMatrix p = CtcHead(Matrix(3, 4, 0.7), w);
  for (std::size_t v = 0; v < 4; ++v) {
    EXPECT_EQ(p.logp(0, v), p.logp(1, v));
    EXPECT_EQ(p.logp(0, v), p.logp(2, v));
  }
}

TEST(CtcHead, SharedLinearVisibleThroughBothHeads) {
  BiasModelWeights w = HandHeadWeights();
  const Matrix x = Matrix::FromRows({{0.3, 0.7}});
  const PosteriorMatrix cpp_before = CppForward(x, w);
  const PosteriorMatrix ctc_before = CtcHead(x, w);
  w.ctc_linear.weight(1, 1) += 0.5;
  EXPECT_NE(CppForward(x, w), cpp_before);
  EXPECT_NE(CtcHead(x, w), ctc_before);
}

TEST(ContextualForward, RowsNormalized) {
  Rng rng(35);
  const BiasModelWeights w = BiasModelWeights::Random(SmallConfig(8, 4, 4, 2), rng);
  const BiasingList list = BiasingList::FromTexts({"ab", "ba b"}, SmallVocab());
  const ContextualOutput out = ContextualForward(RandomMatrix(rng, 5, 8), list, w);
  EXPECT_EQ(out.posterior.num_frames(), 5u);
  EXPECT_EQ(out.attention.head_weights[0].cols(), 3u);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_NEAR(LogSumExp(out.posterior.row(t)), 0.0, 1e-9);
}

TEST(BiasModelWeights, ValidateCatchesShapes) {
  BiasModelWeights w = BiasModelWeights::Zeros(SmallConfig());
  EXPECT_NO_THROW(w.Validate());
  w.combiner_ff.weight = Matrix(4, 4);
  EXPECT_THROW(w.Validate(), DomainError);
}

}  // namespace
}  // namespace ctxbias
