// Copyright 2026 The s2p Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tape-free reverse-mode automatic differentiation over dense 2-D matrices.
//
// Every tensor in the model is a (rows x cols) double matrix: sequences are
// laid out time-major (one row per phoneme or frame, one column per channel).
// A Var is a cheap handle to a graph node; graphs are built eagerly by the
// free functions below and released when the last handle goes away.

#ifndef S2P_AUTOGRAD_H_
#define S2P_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace s2p::ag {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  // Zero matrix of matching shape when nothing flowed into this node.
  Matrix grad() const;
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  double scalar() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var constant(double value);
Var leaf(Matrix value);

// Runs reverse accumulation from a 1x1 root, seeding d(root) = 1.
void backward(const Var& root);

// Arithmetic. Shapes must match exactly unless noted.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);            // elementwise
Var matmul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_row(const Var& a, const Var& row);       // row is 1 x cols, broadcast
Var mul_col(const Var& a, const Var& col);       // col is rows x 1, broadcast
Var neg(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }

// Pointwise nonlinearities.
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
// log(max(a, floor)); the gradient is zero where the clamp is active.
Var clamped_log(const Var& a, double floor);
Var square(const Var& a);
Var abs(const Var& a);
Var sqrt(const Var& a);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);
Var mean_rows(const Var& a);                     // -> 1 x cols

// Row-wise normalizations.
Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta,
                    double eps = 1e-5);

// Structure.
Var transpose(const Var& a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(const Var& a, Index start, Index count);
Var slice_cols(const Var& a, Index start, Index count);
// out.row(i) = a.row(index[i]); repeated indices accumulate on backward.
Var gather_rows(const Var& a, std::span<const Index> index);
// Zero-pads (or truncates) to exactly `rows` rows.
Var pad_rows(const Var& a, Index rows);

enum class Padding { kZero, kReplicate };

// Unfolds a (T x C) sequence into (T_out x K*C) windows for a 1-D convolution
// with "same" alignment: window t covers input rows t*stride - (K-1)/2 + j.
// T_out = ceil(T / stride).
Var unfold_rows(const Var& a, int kernel, int stride, Padding padding);

// Linear interpolation into a (K x D) embedding table: each value in
// [0, 1] maps to position v * (K-1); the result row blends the two
// neighbouring table rows. `values` is (n x 1).
Var interp_embed(const Var& values, const Var& table);

// Graph convolution over J joints for each of T frames.
// x: (T x J*Cin), adjacency: (J x J), weight: (Cin x Cout), bias: (1 x Cout).
// out[t, j*Cout + o] = sum_i adj(j,i) * sum_c x[t, i*Cin + c] * w(c,o) + b(o).
Var graph_conv(const Var& x, const Var& adjacency, const Var& weight,
               const Var& bias, int joints);

}  // namespace s2p::ag

#endif  // S2P_AUTOGRAD_H_
