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

#include "s2p/autograd.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "s2p/gradcheck.h"
#include "s2p/nn.h"

namespace s2p {
namespace {

using ag::Index;
using ag::Matrix;
using ag::Var;

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Weighted sum so every output entry carries a distinct upstream gradient.
Var probe(const Var& out) {
  return ag::sum(ag::mul(out, ag::constant(random_matrix(out.rows(), out.cols(), 99))));
}

void expect_grad_ok(const std::string& name, std::vector<Matrix> inputs,
                    const std::function<Var(const std::vector<Var>&)>& f) {
  const auto r = gradcheck::check_inputs(name, std::move(inputs),
                                         [&](const std::vector<Var>& v) { return probe(f(v)); });
  EXPECT_TRUE(r.passed) << name << " " << r.max_rel_error;
  EXPECT_GT(r.entries, 0) << name;
}

TEST(Backward, ReusedInputAccumulates) {
  const Var x = ag::leaf(Matrix::Constant(1, 1, 3.0));
  const Var y = ag::add(ag::mul(x, x), x);
  ag::backward(y);
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 7.0);
}

TEST(Backward, ConstantsGetNoGradient) {
  const Var c = ag::constant(Matrix::Constant(2, 2, 1.5));
  const Var x = ag::leaf(Matrix::Constant(2, 2, 0.5));
  ag::backward(ag::sum(ag::mul(c, x)));
  EXPECT_FALSE(c.requires_grad());
  EXPECT_TRUE((c.grad().array() == 0.0).all());
  EXPECT_TRUE((x.grad().array() == 1.5).all());
}

TEST(Ops, ForwardExamples) {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  const Var v = ag::constant(a);
  EXPECT_EQ(ag::sum(v).scalar(), 10.0);
  EXPECT_EQ(ag::mean(v).scalar(), 2.5);
  EXPECT_EQ(ag::mean_rows(v).value(), (Matrix(1, 2) << 2, 3).finished());
  EXPECT_EQ(ag::transpose(v).value(), a.transpose());
  const Matrix sm = ag::softmax_rows(v).value();
  EXPECT_NEAR(sm.row(0).sum(), 1.0, 1e-15);
  EXPECT_NEAR(sm(0, 1) / sm(0, 0), std::exp(1.0), 1e-12);
  EXPECT_EQ(ag::clamped_log(ag::constant(0.0), 1e-12).scalar(), std::log(1e-12));
}

TEST(Ops, GatherRepeatsAndAccumulates) {
  const Var x = ag::leaf(Matrix::Identity(3, 3));
  const std::vector<Index> idx = {2, 2, 0};
  const Var g = ag::gather_rows(x, idx);
  EXPECT_EQ(g.value().row(0), Matrix::Identity(3, 3).row(2));
  ag::backward(ag::sum(g));
  EXPECT_EQ(x.grad().row(2), Matrix::Constant(1, 3, 2.0));
  EXPECT_EQ(x.grad().row(1), Matrix::Zero(1, 3));
}

TEST(Ops, UnfoldShapesAndPadding) {
  Matrix a(5, 1);
  a << 1, 2, 3, 4, 5;
  const Matrix z = ag::unfold_rows(ag::constant(a), 3, 2, ag::Padding::kZero).value();
  ASSERT_EQ(z.rows(), 3);
  ASSERT_EQ(z.cols(), 3);
  EXPECT_EQ(z.row(0), (Matrix(1, 3) << 0, 1, 2).finished());
  EXPECT_EQ(z.row(2), (Matrix(1, 3) << 4, 5, 0).finished());
  const Matrix r = ag::unfold_rows(ag::constant(a), 3, 2, ag::Padding::kReplicate).value();
  EXPECT_EQ(r.row(0), (Matrix(1, 3) << 1, 1, 2).finished());
  EXPECT_EQ(r.row(2), (Matrix(1, 3) << 4, 5, 5).finished());
}

TEST(Ops, InterpEmbedEndpointsAreExactRows) {
  const Matrix table = random_matrix(5, 3, 1);
  Matrix v(3, 1);
  v << 0.0, 1.0, 0.375;
  const Matrix out = ag::interp_embed(ag::constant(v), ag::constant(table)).value();
  EXPECT_EQ(out.row(0), table.row(0));
  EXPECT_EQ(out.row(1), table.row(4));
  EXPECT_LT((out.row(2) - 0.5 * (table.row(1) + table.row(2))).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Ops, PadRows) {
  const Var x = ag::constant(Matrix::Ones(2, 3));
  const Matrix p = ag::pad_rows(x, 4).value();
  EXPECT_EQ(p.rows(), 4);
  EXPECT_EQ(p.bottomRows(2), Matrix::Zero(2, 3));
  EXPECT_EQ(ag::pad_rows(x, 1).value().rows(), 1);
}

TEST(Gradients, Arithmetic) {
  const Matrix a = random_matrix(3, 4, 1), b = random_matrix(3, 4, 2);
  expect_grad_ok("add", {a, b}, [](auto& v) { return ag::add(v[0], v[1]); });
  expect_grad_ok("sub", {a, b}, [](auto& v) { return ag::sub(v[0], v[1]); });
  expect_grad_ok("mul", {a, b}, [](auto& v) { return ag::mul(v[0], v[1]); });
  expect_grad_ok("matmul", {a, random_matrix(4, 2, 3)},
                 [](auto& v) { return ag::matmul(v[0], v[1]); });
  expect_grad_ok("scale", {a}, [](auto& v) { return ag::scale(v[0], -1.7); });
  expect_grad_ok("add_row", {a, random_matrix(1, 4, 4)},
                 [](auto& v) { return ag::add_row(v[0], v[1]); });
  expect_grad_ok("mul_col", {a, random_matrix(3, 1, 5)},
                 [](auto& v) { return ag::mul_col(v[0], v[1]); });
}

TEST(Gradients, Pointwise) {
  // Keep inputs away from the kinks of relu and abs.
  Matrix a = random_matrix(3, 4, 6);
  for (Index i = 0; i < a.size(); ++i) {
    if (std::abs(a.data()[i]) < 0.1) a.data()[i] += 0.3;
  }
  const Matrix pos = a.cwiseAbs().array() + 0.2;
  expect_grad_ok("relu", {a}, [](auto& v) { return ag::relu(v[0]); });
  expect_grad_ok("leaky_relu", {a}, [](auto& v) { return ag::leaky_relu(v[0], 0.2); });
  expect_grad_ok("sigmoid", {a}, [](auto& v) { return ag::sigmoid(v[0]); });
  expect_grad_ok("tanh", {a}, [](auto& v) { return ag::tanh(v[0]); });
  expect_grad_ok("exp", {a}, [](auto& v) { return ag::exp(v[0]); });
  expect_grad_ok("square", {a}, [](auto& v) { return ag::square(v[0]); });
  expect_grad_ok("abs", {a}, [](auto& v) { return ag::abs(v[0]); });
  expect_grad_ok("sqrt", {pos}, [](auto& v) { return ag::sqrt(v[0]); });
  expect_grad_ok("clamped_log", {pos}, [](auto& v) { return ag::clamped_log(v[0], 1e-12); });
}

TEST(Gradients, ReductionsAndNorms) {
  const Matrix a = random_matrix(4, 5, 7);
  expect_grad_ok("mean", {a}, [](auto& v) { return ag::mean(v[0]); });
  expect_grad_ok("mean_rows", {a}, [](auto& v) { return ag::mean_rows(v[0]); });
  expect_grad_ok("softmax_rows", {a}, [](auto& v) { return ag::softmax_rows(v[0]); });
  expect_grad_ok("layer_norm_rows", {a, random_matrix(1, 5, 8), random_matrix(1, 5, 9)},
                 [](auto& v) { return ag::layer_norm_rows(v[0], v[1], v[2]); });
}

TEST(Gradients, Structure) {
  const Matrix a = random_matrix(4, 3, 10), b = random_matrix(4, 2, 11);
  expect_grad_ok("transpose", {a}, [](auto& v) { return ag::transpose(v[0]); });
  expect_grad_ok("concat_cols", {a, b}, [](auto& v) {
    const Var parts[] = {v[0], v[1]};
    return ag::concat_cols(parts);
  });
  expect_grad_ok("concat_rows", {a, random_matrix(2, 3, 12)}, [](auto& v) {
    const Var parts[] = {v[0], v[1]};
    return ag::concat_rows(parts);
  });
  expect_grad_ok("slice_rows", {a}, [](auto& v) { return ag::slice_rows(v[0], 1, 2); });
  expect_grad_ok("slice_cols", {a}, [](auto& v) { return ag::slice_cols(v[0], 1, 2); });
  expect_grad_ok("gather_rows", {a}, [](auto& v) {
    const std::vector<Index> idx = {3, 0, 3, 1};
    return ag::gather_rows(v[0], idx);
  });
  expect_grad_ok("pad_rows", {a}, [](auto& v) { return ag::pad_rows(v[0], 6); });
  for (auto pad : {ag::Padding::kZero, ag::Padding::kReplicate}) {
    expect_grad_ok("unfold_rows", {random_matrix(7, 2, 13)},
                   [pad](auto& v) { return ag::unfold_rows(v[0], 3, 2, pad); });
  }
}

TEST(Gradients, EmbeddingAndGraph) {
  Matrix vals(4, 1);
  vals << 0.1, 0.37, 0.62, 0.9;  // interior of table cells
  expect_grad_ok("interp_embed", {vals, random_matrix(6, 3, 14)},
                 [](auto& v) { return ag::interp_embed(v[0], v[1]); });
  const int joints = 3;
  expect_grad_ok("graph_conv",
                 {random_matrix(5, joints * 2, 15), random_matrix(joints, joints, 16),
                  random_matrix(2, 4, 17), random_matrix(1, 4, 18)},
                 [](auto& v) { return ag::graph_conv(v[0], v[1], v[2], v[3], joints); });
}

TEST(Nn, RoundToFloatAndXavier) {
  Matrix m(1, 2);
  m << 0.1, 1.0 / 3.0;
  nn::round_to_float(m);
  EXPECT_EQ(m(0, 0), static_cast<double>(0.1f));
  std::mt19937_64 rng(1);
  const Matrix w = nn::xavier_uniform(20, 30, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
  for (Index i = 0; i < w.size(); ++i) {
    EXPECT_EQ(w.data()[i], static_cast<double>(static_cast<float>(w.data()[i])));
  }
}

TEST(Nn, BinderFreezesUnlistedParameters) {
  std::mt19937_64 rng(2);
  nn::Linear a("a", 3, 2, rng), frozen("f", 2, 1, rng);
  nn::ParamList trainable;
  a.collect(trainable);
  nn::Binder b(trainable);
  const Var out = frozen(b, a(b, ag::constant(random_matrix(4, 3, 3))));
  ag::backward(ag::sum(out));
  EXPECT_GT(b.grad(a.weight).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE((b.grad(frozen.weight).array() == 0.0).all());
}

TEST(Nn, ZeroInitLinearOutputsZero) {
  std::mt19937_64 rng(3);
  nn::Linear z("z", 4, 3, rng, /*zero_init=*/true);
  nn::Binder b;
  EXPECT_TRUE((z(b, ag::constant(random_matrix(5, 4, 4))).value().array() == 0.0).all());
}

TEST(Nn, AdamFirstStepMovesByLearningRate) {
  nn::Parameter p{"p", Matrix::Constant(1, 2, 1.0)};
  nn::AdamW opt({&p}, {.lr = 1e-2});
  nn::GradMap g;
  g.add(p, (Matrix(1, 2) << 3.0, -0.5).finished());
  opt.step(g);
  EXPECT_NEAR(p.value(0, 0), 0.99, 1e-6);
  EXPECT_NEAR(p.value(0, 1), 1.01, 1e-6);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Nn, AttentionGradients) {
  std::mt19937_64 rng(4);
  nn::MultiHeadAttention att("att", 8, 2, rng);
  nn::ParamList params;
  att.collect(params);
  const Matrix q = random_matrix(3, 8, 5), m = random_matrix(5, 8, 6);
  const auto r = gradcheck::check_params("attention", params, [&](nn::Binder& b) {
    return probe(att(b, ag::constant(q), ag::constant(m)));
  });
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

}  // namespace
}  // namespace s2p
