// SPDX-License-Identifier: Apache-2.0

#include "ctxbias/nncore.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ctxbias/errors.h"

namespace ctxbias {

namespace {

std::string Shape(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DomainError("matrix data length " + std::to_string(data_.size()) +
                      " does not match shape " + Shape(rows, cols));
  }
}

Matrix Matrix::Identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::FromRows(const std::vector<Vector>& rows) {
  if (rows.empty()) return Matrix();
  const std::size_t cols = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const Vector& r : rows) {
    if (r.size() != cols) throw DomainError("ragged rows in Matrix::FromRows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Matrix(rows.size(), cols, std::move(data));
}

bool Matrix::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double LogSumExp(std::span<const double> x) {
  if (x.empty()) throw DomainError("log-sum-exp of an empty vector");
  const double m = *std::max_element(x.begin(), x.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

double LogAdd(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

Vector Softmax(std::span<const double> x) {
  if (x.empty()) throw DomainError("softmax of an empty vector");
  const double m = *std::max_element(x.begin(), x.end());
  Vector out(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

Vector LogSoftmax(std::span<const double> x) {
  const double lse = LogSumExp(x);
  Vector out(x.begin(), x.end());
  for (double& v : out) v -= lse;
  return out;
}

Vector LayerNorm(std::span<const double> x, std::span<const double> gain,
                 std::span<const double> bias, double eps) {
  if (x.size() != gain.size() || x.size() != bias.size()) {
    throw DomainError("layer norm length mismatch: x=" +
                      std::to_string(x.size()) + " gain=" +
                      std::to_string(gain.size()) + " bias=" +
                      std::to_string(bias.size()));
  }
  if (x.empty()) throw DomainError("layer norm of an empty vector");
  if (!(eps > 0)) throw DomainError("layer norm eps must be positive");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + eps);
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = gain[i] * (x[i] - mean) * inv + bias[i];
  }
  return out;
}

Vector MatVec(const Matrix& w, std::span<const double> x) {
  if (w.cols() != x.size()) {
    throw DomainError("matrix " + Shape(w.rows(), w.cols()) +
                      " cannot multiply vector of length " +
                      std::to_string(x.size()));
  }
  Vector out(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
    out[r] = s;
  }
  return out;
}

Vector Linear(std::span<const double> x, const Matrix& w,
              std::span<const double> b) {
  if (b.size() != w.rows()) {
    throw DomainError("bias length " + std::to_string(b.size()) +
                      " does not match " + std::to_string(w.rows()) +
                      " output rows");
  }
  Vector out = MatVec(w, x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

LstmState LstmCell(std::span<const double> x, const LstmState& prev,
                   const LstmWeights& weights) {
  const std::size_t h = weights.hidden_size();
  CheckLstm(weights, x.size(), h, "lstm");
  if (prev.hidden.size() != h || prev.cell.size() != h) {
    throw DomainError("lstm state size does not match hidden size " +
                      std::to_string(h));
  }
  Vector gates = Linear(x, weights.w_ih, weights.bias);
  const Vector rec = MatVec(weights.w_hh, prev.hidden);
  for (std::size_t i = 0; i < gates.size(); ++i) gates[i] += rec[i];

  LstmState next{Vector(h), Vector(h)};
  for (std::size_t j = 0; j < h; ++j) {
    const double in = Sigmoid(gates[j]);
    const double forget = Sigmoid(gates[h + j]);
    const double cand = std::tanh(gates[2 * h + j]);
    const double out = Sigmoid(gates[3 * h + j]);
    next.cell[j] = forget * prev.cell[j] + in * cand;
    next.hidden[j] = out * std::tanh(next.cell[j]);
  }
  return next;
}

void CheckAffine(const AffineLayer& layer, std::size_t in, std::size_t out,
                 const char* name) {
  if (layer.weight.rows() != out || layer.weight.cols() != in ||
      layer.bias.size() != out) {
    throw DomainError(std::string(name) + ": expected weight " +
                      Shape(out, in) + " and bias " + std::to_string(out) +
                      ", got " + Shape(layer.weight.rows(), layer.weight.cols()) +
                      " and " + std::to_string(layer.bias.size()));
  }
}

void CheckLstm(const LstmWeights& weights, std::size_t in, std::size_t hidden,
               const char* name) {
  if (weights.w_ih.rows() != 4 * hidden || weights.w_ih.cols() != in ||
      weights.w_hh.rows() != 4 * hidden || weights.w_hh.cols() != hidden ||
      weights.bias.size() != 4 * hidden) {
    throw DomainError(std::string(name) + ": lstm weights inconsistent with input " +
                      std::to_string(in) + " and hidden " +
                      std::to_string(hidden));
  }
}

}  // namespace ctxbias
