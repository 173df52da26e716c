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

#include "s2p/nn.h"

#include <cmath>
#include <stdexcept>

#include "s2p/rng.h"

namespace s2p::nn {

void round_to_float(Matrix& m) {
  m = m.unaryExpr([](double x) {
    return static_cast<double>(static_cast<float>(x));
  });
}

Matrix xavier_uniform(Index rows, Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = uniform(rng, -limit, limit);
  }
  round_to_float(m);
  return m;
}

Binder::Binder(const ParamList& trainable)
    : trainable_(trainable.begin(), trainable.end()) {}

Binder::Binder(const ConstParamList& trainable)
    : trainable_(trainable.begin(), trainable.end()) {}

Var Binder::operator()(const Parameter& p) {
  auto it = bound_.find(&p);
  if (it != bound_.end()) return it->second;
  Var v = trainable_.count(&p) ? ag::leaf(p.value) : ag::constant(p.value);
  bound_.emplace(&p, v);
  return v;
}

Matrix Binder::grad(const Parameter& p) const {
  auto it = bound_.find(&p);
  if (it == bound_.end()) return Matrix::Zero(p.value.rows(), p.value.cols());
  return it->second.grad();
}

void GradMap::add(const Parameter& p, const Matrix& g) {
  auto it = grads_.find(&p);
  if (it == grads_.end()) {
    grads_.emplace(&p, g);
  } else {
    it->second += g;
  }
}

void GradMap::add_from(const Binder& binder, const ParamList& params) {
  for (const Parameter* p : params) add(*p, binder.grad(*p));
}

void GradMap::scale(double s) {
  for (auto& [p, g] : grads_) g *= s;
}

const Matrix* GradMap::find(const Parameter& p) const {
  auto it = grads_.find(&p);
  return it == grads_.end() ? nullptr : &it->second;
}

bool GradMap::all_zero() const {
  for (const auto& [p, g] : grads_) {
    if (!g.isZero(0.0)) return false;
  }
  return true;
}

Linear::Linear(const std::string& name, Index in, Index out,
               std::mt19937_64& rng, bool zero_init)
    : weight{name + ".weight",
             zero_init ? Matrix::Zero(in, out) : xavier_uniform(in, out, rng)},
      bias{name + ".bias", Matrix::Zero(1, out)} {}

Var Linear::operator()(Binder& b, const Var& x) const {
  return ag::add_row(ag::matmul(x, b(weight)), b(bias));
}

void Linear::collect(ParamList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Conv1d::Conv1d(const std::string& name, Index in, Index out, int kernel_size,
               int stride_size, ag::Padding pad, std::mt19937_64& rng)
    : weight{name + ".weight", xavier_uniform(kernel_size * in, out, rng)},
      bias{name + ".bias", Matrix::Zero(1, out)},
      kernel(kernel_size),
      stride(stride_size),
      padding(pad) {}

Var Conv1d::operator()(Binder& b, const Var& x) const {
  Var cols = kernel == 1 && stride == 1
                 ? x
                 : ag::unfold_rows(x, kernel, stride, padding);
  return ag::add_row(ag::matmul(cols, b(weight)), b(bias));
}

void Conv1d::collect(ParamList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, Index width)
    : gamma{name + ".gamma", Matrix::Ones(1, width)},
      beta{name + ".beta", Matrix::Zero(1, width)} {}

Var LayerNorm::operator()(Binder& b, const Var& x) const {
  return ag::layer_norm_rows(x, b(gamma), b(beta));
}

void LayerNorm::collect(ParamList& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

MultiHeadAttention::MultiHeadAttention(const std::string& name, Index width,
                                       int num_heads, std::mt19937_64& rng)
    : query(name + ".query", width, width, rng),
      key(name + ".key", width, width, rng),
      value(name + ".value", width, width, rng),
      output(name + ".output", width, width, rng),
      heads(num_heads) {
  if (width % num_heads != 0) {
    throw std::invalid_argument("attention width not divisible by heads");
  }
}

Var MultiHeadAttention::operator()(Binder& b, const Var& queries,
                                   const Var& memory) const {
  const Var q = query(b, queries);
  const Var k = key(b, memory);
  const Var v = value(b, memory);
  const Index dh = q.cols() / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Var qh = ag::slice_cols(q, h * dh, dh);
    const Var kh = ag::slice_cols(k, h * dh, dh);
    const Var vh = ag::slice_cols(v, h * dh, dh);
    const Var att =
        ag::softmax_rows(ag::scale(ag::matmul(qh, ag::transpose(kh)), inv));
    outs.push_back(ag::matmul(att, vh));
  }
  const Var merged = heads == 1 ? outs[0] : ag::concat_cols(outs);
  return output(b, merged);
}

void MultiHeadAttention::collect(ParamList& out) {
  query.collect(out);
  key.collect(out);
  value.collect(out);
  output.collect(out);
}

FftBlock::FftBlock(const std::string& name, Index width, int heads,
                   Index hidden, int kernel, std::mt19937_64& rng)
    : attention(name + ".attention", width, heads, rng),
      norm1(name + ".norm1", width),
      conv1(name + ".conv1", width, hidden, kernel, 1, ag::Padding::kZero, rng),
      conv2(name + ".conv2", hidden, width, 1, 1, ag::Padding::kZero, rng),
      norm2(name + ".norm2", width) {}

Var FftBlock::operator()(Binder& b, const Var& x) const {
  const Var h = norm1(b, x + attention(b, x, x));
  const Var f = conv2(b, ag::relu(conv1(b, h)));
  return norm2(b, h + f);
}

void FftBlock::collect(ParamList& out) {
  attention.collect(out);
  norm1.collect(out);
  conv1.collect(out);
  conv2.collect(out);
  norm2.collect(out);
}

Matrix sinusoid_positions(Index length, Index width) {
  Matrix pe(length, width);
  for (Index pos = 0; pos < length; ++pos) {
    for (Index i = 0; i < width; ++i) {
      const double rate = std::pow(
          10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      const double angle = static_cast<double>(pos) * rate;
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

AdamW::AdamW(ParamList params, Options options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step(const GradMap& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    const Matrix* g = grads.find(p);
    Matrix zero;
    if (g == nullptr) {
      zero = Matrix::Zero(p.value.rows(), p.value.cols());
      g = &zero;
    }
    p.value *= (1.0 - options_.lr * options_.weight_decay);
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * (*g);
    v_[i] = options_.beta2 * v_[i] +
            (1.0 - options_.beta2) * g->cwiseProduct(*g);
    round_to_float(m_[i]);
    round_to_float(v_[i]);
    const Matrix update =
        (m_[i] / bc1).array() /
        ((v_[i] / bc2).array().sqrt() + options_.eps);
    p.value -= options_.lr * update;
    round_to_float(p.value);
  }
}

}  // namespace s2p::nn
