// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/context_bias.h"

#include <cmath>
#include <string>

#include "ctxbias/errors.h"

namespace ctxbias {

namespace {

void CheckSquare(const Matrix& m, std::size_t d, const char* name) {
  if (m.rows() != d || m.cols() != d) {
    throw DomainError(std::string(name) + " must be " + std::to_string(d) + "x" +
                      std::to_string(d));
  }
}

void CheckLength(const Vector& v, std::size_t n, const char* name) {
  if (v.size() != n) {
    throw DomainError(std::string(name) + " must have length " + std::to_string(n));
  }
}

void CheckFrames(const Matrix& m, std::size_t d, const char* name) {
  if (m.rows() == 0) throw DomainError(std::string(name) + " has no frames");
  if (m.cols() != d) {
    throw DomainError(std::string(name) + " width " + std::to_string(m.cols()) +
                      " does not match model dim " + std::to_string(d));
  }
}

Matrix RandomMatrix(std::size_t rows, std::size_t cols, Rng& rng, double scale) {
  Matrix m(rows, cols);
  const double s = scale / std::sqrt(static_cast<double>(cols));
  for (double& v : m.data()) v = s * rng.Normal();
  return m;
}

Vector RandomVector(std::size_t n, Rng& rng, double scale) {
  Vector v(n);
  for (double& x : v) x = scale * rng.Normal();
  return v;
}

LstmWeights ZeroLstm(std::size_t in, std::size_t h) {
  return {Matrix(4 * h, in), Matrix(4 * h, h), Vector(4 * h, 0.0)};
}

AffineLayer ZeroAffine(std::size_t in, std::size_t out) {
  return {Matrix(out, in), Vector(out, 0.0)};
}

LstmState RunLstm(const LabelSeq& tokens, bool reverse, const LstmWeights& w,
                  std::size_t vocab_size) {
  LstmState state = LstmState::Zeros(w.hidden_size());
  Vector one_hot(vocab_size, 0.0);
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const TokenId tok = tokens[reverse ? tokens.size() - 1 - k : k];
    one_hot[tok] = 1.0;
    state = LstmCell(one_hot, state, w);
    one_hot[tok] = 0.0;
  }
  return state;
}

Matrix ApplyAffineRows(const Matrix& in, const AffineLayer& layer) {
  Matrix out(in.rows(), layer.out_dim());
  for (std::size_t t = 0; t < in.rows(); ++t) {
    const Vector y = Linear(in.row(t), layer);
    std::copy(y.begin(), y.end(), out.row(t).begin());
  }
  return out;
}

}  // namespace

void ModelConfig::Validate() const {
  if (model_dim == 0 || hidden_size == 0 || num_heads == 0) {
    throw ConfigError("model dim, hidden size and head count must be positive");
  }
  if (vocab_size < 2) throw ConfigError("vocab size must be at least 2");
  if (model_dim % num_heads != 0) {
    throw ConfigError(std::to_string(num_heads) + " heads do not divide model dim " +
                      std::to_string(model_dim));
  }
  if (!(layer_norm_eps > 0)) throw ConfigError("layer norm eps must be positive");
}

void BiasModelWeights::Validate() const {
  config.Validate();
  const std::size_t d = config.model_dim;
  const std::size_t h = config.hidden_size;
  const std::size_t v = config.vocab_size;
  CheckLstm(encoder_fwd, v, h, "encoder_fwd");
  CheckLstm(encoder_bwd, v, h, "encoder_bwd");
  CheckAffine(encoder_readout, 4 * h, d, "encoder_readout");
  CheckSquare(query, d, "query");
  CheckSquare(key, d, "key");
  CheckSquare(value, d, "value");
  CheckSquare(output, d, "output");
  CheckLength(ln_audio_gain, d, "ln_audio_gain");
  CheckLength(ln_audio_bias, d, "ln_audio_bias");
  CheckLength(ln_context_gain, d, "ln_context_gain");
  CheckLength(ln_context_bias, d, "ln_context_bias");
  CheckAffine(combiner_ff, 2 * d, d, "combiner_ff");
  CheckAffine(cpp_hidden, d, d, "cpp_hidden");
  CheckAffine(ctc_linear, d, v, "ctc_linear");
}

BiasModelWeights BiasModelWeights::Zeros(const ModelConfig& config) {
  config.Validate();
  const std::size_t d = config.model_dim;
  const std::size_t h = config.hidden_size;
  const std::size_t v = config.vocab_size;
  BiasModelWeights w;
  w.config = config;
  w.encoder_fwd = ZeroLstm(v, h);
  w.encoder_bwd = ZeroLstm(v, h);
  w.encoder_readout = ZeroAffine(4 * h, d);
  w.query = Matrix(d, d);
  w.key = Matrix(d, d);
  w.value = Matrix::Identity(d);
  w.output = Matrix::Identity(d);
  w.ln_audio_gain = Vector(d, 1.0);
  w.ln_audio_bias = Vector(d, 0.0);
  w.ln_context_gain = Vector(d, 1.0);
  w.ln_context_bias = Vector(d, 0.0);
  w.combiner_ff = ZeroAffine(2 * d, d);
  w.cpp_hidden = ZeroAffine(d, d);
  w.ctc_linear = ZeroAffine(d, v);
  return w;
}

BiasModelWeights BiasModelWeights::Random(const ModelConfig& config, Rng& rng,
                                          double scale) {
  BiasModelWeights w = Zeros(config);
  const std::size_t d = config.model_dim;
  const std::size_t h = config.hidden_size;
  const std::size_t v = config.vocab_size;
  const double bias_scale = 0.1 * scale;
  for (LstmWeights* lstm : {&w.encoder_fwd, &w.encoder_bwd}) {
    lstm->w_ih = RandomMatrix(4 * h, v, rng, scale);
    lstm->w_hh = RandomMatrix(4 * h, h, rng, scale);
    lstm->bias = RandomVector(4 * h, rng, bias_scale);
  }
  w.encoder_readout = {RandomMatrix(d, 4 * h, rng, scale), RandomVector(d, rng, bias_scale)};
  w.query = RandomMatrix(d, d, rng, scale);
  w.key = RandomMatrix(d, d, rng, scale);
  w.combiner_ff = {RandomMatrix(d, 2 * d, rng, scale), RandomVector(d, rng, bias_scale)};
  w.cpp_hidden = {RandomMatrix(d, d, rng, scale), RandomVector(d, rng, bias_scale)};
  w.ctc_linear = {RandomMatrix(v, d, rng, scale), RandomVector(v, rng, bias_scale)};
  return w;
}

Vector EncodePhrase(const ContextPhrase& phrase, const BiasModelWeights& weights) {
  if (phrase.token_ids.empty()) throw DomainError("cannot encode an empty phrase");
  const std::size_t v = weights.config.vocab_size;
  for (TokenId id : phrase.token_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw DomainError("token id " + std::to_string(id) + " in phrase '" +
                        phrase.text + "' is outside vocab of " + std::to_string(v));
    }
  }
  const LstmState fwd = RunLstm(phrase.token_ids, false, weights.encoder_fwd, v);
  const LstmState bwd = RunLstm(phrase.token_ids, true, weights.encoder_bwd, v);
  Vector concat;
  concat.reserve(4 * weights.config.hidden_size);
  concat.insert(concat.end(), fwd.hidden.begin(), fwd.hidden.end());
  concat.insert(concat.end(), fwd.cell.begin(), fwd.cell.end());
  concat.insert(concat.end(), bwd.hidden.begin(), bwd.hidden.end());
  concat.insert(concat.end(), bwd.cell.begin(), bwd.cell.end());
  return Linear(concat, weights.encoder_readout);
}

Matrix EncodeBiasingList(const BiasingList& list, const BiasModelWeights& weights) {
  Matrix out(list.size(), weights.config.model_dim);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Vector e = EncodePhrase(list.phrase(i), weights);
    std::copy(e.begin(), e.end(), out.row(i).begin());
  }
  return out;
}

Matrix AttentionResult::MeanWeights() const {
  if (head_weights.empty()) return Matrix();
  Matrix mean(head_weights.front().rows(), head_weights.front().cols());
  for (const Matrix& m : head_weights) {
    for (std::size_t i = 0; i < m.data().size(); ++i) mean.data()[i] += m.data()[i];
  }
  const double n = static_cast<double>(head_weights.size());
  for (double& v : mean.data()) v /= n;
  return mean;
}

AttentionResult BiasingAttention(const Matrix& audio, const Matrix& phrase_embeddings,
                                 const BiasModelWeights& weights) {
  weights.config.Validate();
  const std::size_t d = weights.config.model_dim;
  const std::size_t heads = weights.config.num_heads;
  const std::size_t dh = weights.config.head_dim();
  CheckFrames(audio, d, "audio embeddings");
  CheckFrames(phrase_embeddings, d, "phrase embeddings");

  const std::size_t num_frames = audio.rows();
  const std::size_t num_entries = phrase_embeddings.rows();
  std::vector<Vector> keys(num_entries);
  std::vector<Vector> values(num_entries);
  for (std::size_t i = 0; i < num_entries; ++i) {
    keys[i] = MatVec(weights.key, phrase_embeddings.row(i));
    values[i] = MatVec(weights.value, phrase_embeddings.row(i));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionResult result;
  result.context = Matrix(num_frames, d);
  result.head_weights.assign(heads, Matrix(num_frames, num_entries));
  Vector scores(num_entries);
  Vector concat(d);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const Vector q = MatVec(weights.query, audio.row(t));
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const std::size_t lo = hd * dh;
      for (std::size_t i = 0; i < num_entries; ++i) {
        double s = 0.0;
        for (std::size_t j = lo; j < lo + dh; ++j) s += q[j] * keys[i][j];
        scores[i] = s * scale;
      }
      const Vector alpha = Softmax(scores);
      std::copy(alpha.begin(), alpha.end(), result.head_weights[hd].row(t).begin());
      for (std::size_t j = lo; j < lo + dh; ++j) {
        double c = 0.0;
        for (std::size_t i = 0; i < num_entries; ++i) c += alpha[i] * values[i][j];
        concat[j] = c;
      }
    }
    const Vector c = MatVec(weights.output, concat);
    std::copy(c.begin(), c.end(), result.context.row(t).begin());
  }
  return result;
}

Matrix Combine(const Matrix& audio, const Matrix& context,
               const BiasModelWeights& weights) {
  const std::size_t d = weights.config.model_dim;
  CheckFrames(audio, d, "audio embeddings");
  CheckFrames(context, d, "context embeddings");
  if (audio.rows() != context.rows()) {
    throw DomainError("audio has " + std::to_string(audio.rows()) +
                      " frames but context has " + std::to_string(context.rows()));
  }
  const double eps = weights.config.layer_norm_eps;
  Matrix out(audio.rows(), weights.combiner_ff.out_dim());
  Vector concat(2 * d);
  for (std::size_t t = 0; t < audio.rows(); ++t) {
    const Vector a = LayerNorm(audio.row(t), weights.ln_audio_gain,
                               weights.ln_audio_bias, eps);
    const Vector c = LayerNorm(context.row(t), weights.ln_context_gain,
                               weights.ln_context_bias, eps);
    std::copy(a.begin(), a.end(), concat.begin());
    std::copy(c.begin(), c.end(), concat.begin() + static_cast<std::ptrdiff_t>(d));
    const Vector y = Linear(concat, weights.combiner_ff);
    std::copy(y.begin(), y.end(), out.row(t).begin());
  }
  return out;
}

PosteriorMatrix CppForward(const Matrix& context, const BiasModelWeights& weights) {
  CheckFrames(context, weights.config.model_dim, "context embeddings");
  Matrix hidden = ApplyAffineRows(context, weights.cpp_hidden);
  for (double& v : hidden.data()) v = std::tanh(v);
  return PosteriorMatrix::FromLogits(ApplyAffineRows(hidden, weights.ctc_linear));
}

PosteriorMatrix CtcHead(const Matrix& combined, const BiasModelWeights& weights) {
  CheckFrames(combined, weights.config.model_dim, "combined embeddings");
  return PosteriorMatrix::FromLogits(ApplyAffineRows(combined, weights.ctc_linear));
}

ContextualOutput ContextualForward(const Matrix& audio, const BiasingList& list,
                                   const BiasModelWeights& weights) {
  const Matrix embeddings = EncodeBiasingList(list, weights);
  AttentionResult attention = BiasingAttention(audio, embeddings, weights);
  const Matrix combined = Combine(audio, attention.context, weights);
  return {CtcHead(combined, weights), std::move(attention)};
}

}  // namespace ctxbias
