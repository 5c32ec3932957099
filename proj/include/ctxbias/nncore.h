// SPDX-License-Identifier: Apache-2.0
//
// Small dense numeric primitives used by every forward pass in the toolkit.
// Everything is double precision and row-major; there is no BLAS and no
// autodiff. All functions are pure.

#ifndef CTXBIAS_NNCORE_H_
#define CTXBIAS_NNCORE_H_

#include <cstddef>
#include <span>
#include <vector>

namespace ctxbias {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Takes ownership of row-major data; data.size() must equal rows*cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix Identity(std::size_t n);
  // Builds from nested rows; all rows must share one length.
  static Matrix FromRows(const std::vector<Vector>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool AllFinite() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Affine map y = W x + b.
struct AffineLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  bool operator==(const AffineLayer&) const = default;
};

// Gate rows are stacked in the order input, forget, candidate, output.
struct LstmWeights {
  Matrix w_ih;  // 4h x in
  Matrix w_hh;  // 4h x h
  Vector bias;  // 4h

  std::size_t hidden_size() const { return w_hh.cols(); }
  std::size_t input_size() const { return w_ih.cols(); }
  bool operator==(const LstmWeights&) const = default;
};

struct LstmState {
  Vector hidden;
  Vector cell;

  static LstmState Zeros(std::size_t h) { return {Vector(h, 0.0), Vector(h, 0.0)}; }
};

double Sigmoid(double x);

// Numerically stable log(sum(exp(x))). Empty input is a DomainError.
double LogSumExp(std::span<const double> x);

// log(exp(a) + exp(b)) with -inf handled.
double LogAdd(double a, double b);

Vector Softmax(std::span<const double> x);
Vector LogSoftmax(std::span<const double> x);

Vector LayerNorm(std::span<const double> x, std::span<const double> gain,
                 std::span<const double> bias, double eps);

Vector Linear(std::span<const double> x, const Matrix& w,
              std::span<const double> b);
inline Vector Linear(std::span<const double> x, const AffineLayer& layer) {
  return Linear(x, layer.weight, layer.bias);
}

// W x without bias.
Vector MatVec(const Matrix& w, std::span<const double> x);

LstmState LstmCell(std::span<const double> x, const LstmState& prev,
                   const LstmWeights& weights);

// Throws DomainError unless the layer shapes agree with (in, out).
void CheckAffine(const AffineLayer& layer, std::size_t in, std::size_t out,
                 const char* name);
void CheckLstm(const LstmWeights& weights, std::size_t in, std::size_t hidden,
               const char* name);

}  // namespace ctxbias

#endif  // CTXBIAS_NNCORE_H_
