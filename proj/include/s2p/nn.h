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

// Parameters, layers and the optimizer shared by every network in the
// project.

#ifndef S2P_NN_H_
#define S2P_NN_H_

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "s2p/autograd.h"

namespace s2p::nn {

using ag::Index;
using ag::Matrix;
using ag::Var;

// Persistent learnable tensor. Stored values are always exactly
// representable in float32 so checkpoints restore training bit-for-bit.
struct Parameter {
  std::string name;
  Matrix value;
};

using ParamList = std::vector<Parameter*>;
using ConstParamList = std::vector<const Parameter*>;

// Rounds every entry through float32.
void round_to_float(Matrix& m);

Matrix xavier_uniform(Index rows, Index cols, std::mt19937_64& rng);

// Maps parameters onto graph leaves for one forward pass. Parameters listed
// as trainable become gradient-tracking leaves; everything else enters the
// graph as a constant, so frozen weights never accumulate gradients.
class Binder {
 public:
  Binder() = default;
  explicit Binder(const ParamList& trainable);
  explicit Binder(const ConstParamList& trainable);

  Var operator()(const Parameter& p);

  // Gradient of the last backward() for `p`; zeros if untouched or frozen.
  Matrix grad(const Parameter& p) const;

 private:
  std::unordered_set<const Parameter*> trainable_;
  std::unordered_map<const Parameter*, Var> bound_;
};

class GradMap {
 public:
  void add(const Parameter& p, const Matrix& g);
  void add_from(const Binder& binder, const ParamList& params);
  void scale(double s);
  const Matrix* find(const Parameter& p) const;
  bool all_zero() const;

 private:
  std::unordered_map<const Parameter*, Matrix> grads_;
};

struct Linear {
  Parameter weight;  // in x out
  Parameter bias;    // 1 x out

  Linear() = default;
  Linear(const std::string& name, Index in, Index out, std::mt19937_64& rng,
         bool zero_init = false);
  Var operator()(Binder& b, const Var& x) const;
  void collect(ParamList& out);
};

struct Conv1d {
  Parameter weight;  // kernel*in x out
  Parameter bias;    // 1 x out
  int kernel = 1;
  int stride = 1;
  ag::Padding padding = ag::Padding::kZero;

  Conv1d() = default;
  Conv1d(const std::string& name, Index in, Index out, int kernel, int stride,
         ag::Padding padding, std::mt19937_64& rng);
  Var operator()(Binder& b, const Var& x) const;
  void collect(ParamList& out);
};

struct LayerNorm {
  Parameter gamma;
  Parameter beta;

  LayerNorm() = default;
  LayerNorm(const std::string& name, Index width);
  Var operator()(Binder& b, const Var& x) const;
  void collect(ParamList& out);
};

struct MultiHeadAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, Index width, int heads,
                     std::mt19937_64& rng);
  // queries: n x width, memory: m x width -> n x width.
  Var operator()(Binder& b, const Var& queries, const Var& memory) const;
  void collect(ParamList& out);
};

// Transformer block with a convolutional position-wise network:
// self-attention + residual + norm, then conv(k) -> relu -> conv(1) +
// residual + norm.
struct FftBlock {
  MultiHeadAttention attention;
  LayerNorm norm1;
  Conv1d conv1;
  Conv1d conv2;
  LayerNorm norm2;

  FftBlock() = default;
  FftBlock(const std::string& name, Index width, int heads, Index hidden,
           int kernel, std::mt19937_64& rng);
  Var operator()(Binder& b, const Var& x) const;
  void collect(ParamList& out);
};

Matrix sinusoid_positions(Index length, Index width);

// Decoupled-weight-decay Adam. Moments are kept at float32 precision, like
// the parameters, so optimizer state serializes exactly.
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  AdamW() = default;
  AdamW(ParamList params, Options options);

  void step(const GradMap& grads);

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  const ParamList& params() const { return params_; }
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  const Options& options() const { return options_; }

 private:
  ParamList params_;
  Options options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t t_ = 0;
};

}  // namespace s2p::nn

#endif  // S2P_NN_H_
