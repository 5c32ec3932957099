// SPDX-License-Identifier: Apache-2.0
//
// The contextual stack of an attention-based deep-biasing CTC model:
//
//   phrases --BLSTM context encoder--> h^CE (one d-vector per phrase)
//   audio h^E, h^CE --biasing attention--> c^E (one d-vector per frame)
//   [LN(h^E), LN(c^E)] --feed-forward--> h^CA --CTC linear--> posterior
//   c^E --linear, tanh, CTC linear--> CPP posterior (training-only head)
//
// The CPP network's output layer is the CTC linear itself, so the two heads
// always see the same parameters.

#ifndef CTXBIAS_CONTEXT_BIAS_H_
#define CTXBIAS_CONTEXT_BIAS_H_

#include <cstddef>
#include <vector>

#include "ctxbias/biasing_list.h"
#include "ctxbias/nncore.h"
#include "ctxbias/posterior.h"
#include "ctxbias/rng.h"

namespace ctxbias {

struct ModelConfig {
  std::size_t model_dim = 16;   // d
  std::size_t hidden_size = 8;  // h, per LSTM direction
  std::size_t vocab_size = 0;   // V
  std::size_t num_heads = 1;
  double layer_norm_eps = 1e-5;

  std::size_t head_dim() const { return model_dim / num_heads; }
  // Throws ConfigError on zero sizes, V < 2, heads not dividing d or eps <= 0.
  void Validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct BiasModelWeights {
  ModelConfig config;

  // Context encoder. LSTM inputs are one-hot tokens, so w_ih is 4h x V.
  LstmWeights encoder_fwd;
  LstmWeights encoder_bwd;
  // Reads [h_fwd, c_fwd, h_bwd, c_bwd] (4h) into d.
  AffineLayer encoder_readout;

  // Biasing attention, all d x d and bias-free.
  Matrix query;
  Matrix key;
  Matrix value;   // identity reproduces unprojected values
  Matrix output;  // identity skips the output projection

  // Combiner.
  Vector ln_audio_gain;
  Vector ln_audio_bias;
  Vector ln_context_gain;
  Vector ln_context_bias;
  AffineLayer combiner_ff;  // d x 2d

  // CPP network first layer (d x d, followed by tanh).
  AffineLayer cpp_hidden;
  // V x d. Shared: CTC head output layer and CPP network output layer.
  AffineLayer ctc_linear;

  // Throws DomainError if any tensor disagrees with `config`.
  void Validate() const;

  // Zero tensors except identity value/output projections and unit
  // layer-norm gains.
  static BiasModelWeights Zeros(const ModelConfig& config);
  // Gaussian tensors scaled by `scale` / sqrt(fan_in); value/output stay
  // identity and layer-norm gains stay one.
  static BiasModelWeights Random(const ModelConfig& config, Rng& rng,
                                 double scale = 1.0);

  bool operator==(const BiasModelWeights&) const = default;
};

// Context-encoder embedding of one phrase (length d).
Vector EncodePhrase(const ContextPhrase& phrase, const BiasModelWeights& weights);

// (K+1) x d, row i is the embedding of list entry i (row 0 = no-bias).
Matrix EncodeBiasingList(const BiasingList& list, const BiasModelWeights& weights);

struct AttentionResult {
  Matrix context;                    // T x d, c^E
  std::vector<Matrix> head_weights;  // one T x (K+1) matrix per head

  // Head-averaged T x (K+1) attention.
  Matrix MeanWeights() const;
};

// Scaled dot-product attention with the audio frames as queries and the
// phrase embeddings as keys and values.
AttentionResult BiasingAttention(const Matrix& audio, const Matrix& phrase_embeddings,
                                 const BiasModelWeights& weights);

// h^CA = FF([LN(h^E_t), LN(c^E_t)]) for every frame.
Matrix Combine(const Matrix& audio, const Matrix& context,
               const BiasModelWeights& weights);

// CPP head over c^E: linear, tanh, shared CTC linear, log-softmax.
PosteriorMatrix CppForward(const Matrix& context, const BiasModelWeights& weights);

// CTC head over h^CA: shared CTC linear, log-softmax.
PosteriorMatrix CtcHead(const Matrix& combined, const BiasModelWeights& weights);

struct ContextualOutput {
  PosteriorMatrix posterior;
  AttentionResult attention;
};

// Biasing attention, combiner and CTC head on retained audio embeddings.
// This is all that must be recomputed when only the biasing list changes.
ContextualOutput ContextualForward(const Matrix& audio, const BiasingList& list,
                                   const BiasModelWeights& weights);

}  // namespace ctxbias

#endif  // CTXBIAS_CONTEXT_BIAS_H_
