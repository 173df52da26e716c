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

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace s2p::ag {

namespace {

using NodePtr = std::shared_ptr<Node>;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("autograd: ") + what);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(
        std::string("autograd: shape mismatch in ") + op + " (" +
        std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
        std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

Var make(Matrix value, std::initializer_list<Var> inputs,
         std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const Var& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const Var& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(bw);
  }
  return Var(std::move(node));
}

Var make_many(Matrix value, std::span<const Var> inputs,
              std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const Var& in : inputs) {
    if (in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const Var& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(bw);
  }
  return Var(std::move(node));
}

inline bool wants(const Node& n, std::size_t i) {
  return n.parents[i]->requires_grad;
}

template <typename F>
Var pointwise(const Var& a, F&& f, std::function<Matrix(const Node&)> deriv) {
  Matrix out = a.value().unaryExpr(f);
  return make(std::move(out), {a}, [deriv = std::move(deriv)](Node& n) {
    n.parents[0]->accumulate(n.grad.cwiseProduct(deriv(n)));
  });
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Matrix Var::grad() const {
  if (!node_ || node_->grad.size() == 0) {
    return Matrix::Zero(rows(), cols());
  }
  return node_->grad;
}

double Var::scalar() const {
  require(rows() == 1 && cols() == 1, "scalar() on non-1x1 value");
  return node_->value(0, 0);
}

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var constant(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

Var leaf(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

void backward(const Var& root) {
  require(root.defined() && root.rows() == 1 && root.cols() == 1,
          "backward() needs a 1x1 root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS to get a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a, b}, [](Node& n) {
    n.parents[0]->accumulate(n.grad);
    n.parents[1]->accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a, b}, [](Node& n) {
    n.parents[0]->accumulate(n.grad);
    n.parents[1]->accumulate(-n.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    if (wants(n, 0)) {
      n.parents[0]->accumulate(n.grad.cwiseProduct(n.parents[1]->value));
    }
    if (wants(n, 1)) {
      n.parents[1]->accumulate(n.grad.cwiseProduct(n.parents[0]->value));
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument(
        "autograd: matmul inner dimension mismatch (" +
        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
  }
  Matrix out = a.value() * b.value();
  return make(std::move(out), {a, b}, [](Node& n) {
    if (wants(n, 0)) {
      n.parents[0]->accumulate(n.grad * n.parents[1]->value.transpose());
    }
    if (wants(n, 1)) {
      n.parents[1]->accumulate(n.parents[0]->value.transpose() * n.grad);
    }
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a},
              [s](Node& n) { n.parents[0]->accumulate(n.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  return make(a.value().array() + s, {a},
              [](Node& n) { n.parents[0]->accumulate(n.grad); });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row shape");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make(std::move(out), {a, row}, [](Node& n) {
    n.parents[0]->accumulate(n.grad);
    if (wants(n, 1)) n.parents[1]->accumulate(n.grad.colwise().sum());
  });
}

Var mul_col(const Var& a, const Var& col) {
  require(col.cols() == 1 && col.rows() == a.rows(), "mul_col shape");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return make(std::move(out), {a, col}, [](Node& n) {
    const Matrix& av = n.parents[0]->value;
    const Matrix& cv = n.parents[1]->value;
    if (wants(n, 0)) {
      Matrix g = n.grad.array().colwise() * cv.col(0).array();
      n.parents[0]->accumulate(g);
    }
    if (wants(n, 1)) {
      n.parents[1]->accumulate(n.grad.cwiseProduct(av).rowwise().sum());
    }
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var relu(const Var& a) {
  return pointwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](const Node& n) -> Matrix {
        return (n.parents[0]->value.array() > 0.0).cast<double>().matrix();
      });
}

Var leaky_relu(const Var& a, double slope) {
  return pointwise(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](const Node& n) -> Matrix {
        return n.parents[0]->value.unaryExpr(
            [slope](double x) { return x > 0.0 ? 1.0 : slope; });
      });
}

Var sigmoid(const Var& a) {
  return pointwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](const Node& n) -> Matrix {
        return n.value.array() * (1.0 - n.value.array());
      });
}

Var tanh(const Var& a) {
  return pointwise(
      a, [](double x) { return std::tanh(x); },
      [](const Node& n) -> Matrix {
        return 1.0 - n.value.array().square();
      });
}

Var exp(const Var& a) {
  return pointwise(
      a, [](double x) { return std::exp(x); },
      [](const Node& n) -> Matrix { return n.value; });
}

Var clamped_log(const Var& a, double floor) {
  return pointwise(
      a, [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](const Node& n) -> Matrix {
        return n.parents[0]->value.unaryExpr(
            [floor](double x) { return x > floor ? 1.0 / x : 0.0; });
      });
}

Var square(const Var& a) {
  return pointwise(
      a, [](double x) { return x * x; },
      [](const Node& n) -> Matrix { return 2.0 * n.parents[0]->value; });
}

Var abs(const Var& a) {
  return pointwise(
      a, [](double x) { return std::abs(x); },
      [](const Node& n) -> Matrix {
        return n.parents[0]->value.unaryExpr([](double x) {
          return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        });
      });
}

Var sqrt(const Var& a) {
  return pointwise(
      a, [](double x) { return std::sqrt(x); },
      [](const Node& n) -> Matrix { return 0.5 / n.value.array(); });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make(std::move(out), {a}, [](Node& n) {
    const Matrix& p = n.parents[0]->value;
    n.parents[0]->accumulate(Matrix::Constant(p.rows(), p.cols(), n.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  require(a.value().size() > 0, "mean of empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var mean_rows(const Var& a) {
  require(a.rows() > 0, "mean_rows of empty matrix");
  const double inv = 1.0 / static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() * inv;
  return make(std::move(out), {a}, [inv](Node& n) {
    const Index rows = n.parents[0]->value.rows();
    n.parents[0]->accumulate(n.grad.replicate(rows, 1) * inv);
  });
}

Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return make(std::move(out), {a}, [](Node& n) {
    const Matrix& y = n.value;
    Eigen::VectorXd dot = (n.grad.cwiseProduct(y)).rowwise().sum();
    Matrix g = y.array() * (n.grad.colwise() - dot).array();
    n.parents[0]->accumulate(g);
  });
}

Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta,
                    double eps) {
  require(gamma.rows() == 1 && gamma.cols() == a.cols(), "layer_norm gamma");
  require(beta.rows() == 1 && beta.cols() == a.cols(), "layer_norm beta");
  const Index rows = a.rows();
  const Index cols = a.cols();
  Matrix xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Index r = 0; r < rows; ++r) {
    const double mu = a.value().row(r).mean();
    const double var = (a.value().row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (a.value().row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array())
                   .rowwise() +
               beta.value().row(0).array();
  return make(std::move(out), {a, gamma, beta},
              [xhat, inv_std](Node& n) {
                const Matrix& g = n.grad;
                if (wants(n, 0)) {
                  const auto& gam = n.parents[1]->value;
                  Matrix gx = g.array().rowwise() * gam.row(0).array();
                  const double c = static_cast<double>(gx.cols());
                  Matrix dx(gx.rows(), gx.cols());
                  for (Index r = 0; r < gx.rows(); ++r) {
                    const double m1 = gx.row(r).sum() / c;
                    const double m2 = gx.row(r).dot(xhat.row(r)) / c;
                    dx.row(r) = inv_std(r) *
                                (gx.row(r).array() - m1 -
                                 xhat.row(r).array() * m2);
                  }
                  n.parents[0]->accumulate(dx);
                }
                if (wants(n, 1)) {
                  n.parents[1]->accumulate(
                      g.cwiseProduct(xhat).colwise().sum());
                }
                if (wants(n, 2)) {
                  n.parents[2]->accumulate(g.colwise().sum());
                }
              });
}

Var transpose(const Var& a) {
  return make(a.value().transpose(), {a}, [](Node& n) {
    n.parents[0]->accumulate(n.grad.transpose());
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols of nothing");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_many(std::move(out), parts, [](Node& n) {
    Index off = 0;
    for (auto& p : n.parents) {
      const Index c = p->value.cols();
      if (p->requires_grad) p->accumulate(n.grad.middleCols(off, c));
      off += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows col mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_many(std::move(out), parts, [](Node& n) {
    Index off = 0;
    for (auto& p : n.parents) {
      const Index r = p->value.rows();
      if (p->requires_grad) p->accumulate(n.grad.middleRows(off, r));
      off += r;
    }
  });
}

Var slice_rows(const Var& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(),
          "slice_rows out of range");
  return make(a.value().middleRows(start, count), {a},
              [start, count](Node& n) {
                const Matrix& p = n.parents[0]->value;
                Matrix g = Matrix::Zero(p.rows(), p.cols());
                g.middleRows(start, count) = n.grad;
                n.parents[0]->accumulate(g);
              });
}

Var slice_cols(const Var& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(),
          "slice_cols out of range");
  return make(a.value().middleCols(start, count), {a},
              [start, count](Node& n) {
                const Matrix& p = n.parents[0]->value;
                Matrix g = Matrix::Zero(p.rows(), p.cols());
                g.middleCols(start, count) = n.grad;
                n.parents[0]->accumulate(g);
              });
}

Var gather_rows(const Var& a, std::span<const Index> index) {
  Matrix out(static_cast<Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < a.rows(), "gather_rows index");
    out.row(static_cast<Index>(i)) = a.value().row(index[i]);
  }
  std::vector<Index> idx(index.begin(), index.end());
  return make(std::move(out), {a}, [idx = std::move(idx)](Node& n) {
    const Matrix& p = n.parents[0]->value;
    Matrix g = Matrix::Zero(p.rows(), p.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      g.row(idx[i]) += n.grad.row(static_cast<Index>(i));
    }
    n.parents[0]->accumulate(g);
  });
}

Var pad_rows(const Var& a, Index rows) {
  require(rows >= 0, "pad_rows negative");
  Matrix out = Matrix::Zero(rows, a.cols());
  const Index keep = std::min(rows, a.rows());
  out.topRows(keep) = a.value().topRows(keep);
  return make(std::move(out), {a}, [keep](Node& n) {
    const Matrix& p = n.parents[0]->value;
    Matrix g = Matrix::Zero(p.rows(), p.cols());
    g.topRows(keep) = n.grad.topRows(keep);
    n.parents[0]->accumulate(g);
  });
}

Var unfold_rows(const Var& a, int kernel, int stride, Padding padding) {
  require(kernel >= 1 && stride >= 1, "unfold_rows kernel/stride");
  const Index t_in = a.rows();
  const Index c = a.cols();
  require(t_in >= 1, "unfold_rows of empty sequence");
  const Index t_out = (t_in + stride - 1) / stride;
  const Index left = (kernel - 1) / 2;
  // Source row per (output row, tap), or -1 for a zero pad.
  std::vector<Index> src(static_cast<std::size_t>(t_out * kernel));
  for (Index t = 0; t < t_out; ++t) {
    for (int j = 0; j < kernel; ++j) {
      Index s = t * stride - left + j;
      if (s < 0 || s >= t_in) {
        s = padding == Padding::kReplicate ? std::clamp<Index>(s, 0, t_in - 1)
                                           : -1;
      }
      src[static_cast<std::size_t>(t * kernel + j)] = s;
    }
  }
  Matrix out = Matrix::Zero(t_out, kernel * c);
  for (Index t = 0; t < t_out; ++t) {
    for (int j = 0; j < kernel; ++j) {
      const Index s = src[static_cast<std::size_t>(t * kernel + j)];
      if (s >= 0) out.block(t, j * c, 1, c) = a.value().row(s);
    }
  }
  return make(std::move(out), {a}, [src, t_out, kernel, c](Node& n) {
    const Matrix& p = n.parents[0]->value;
    Matrix g = Matrix::Zero(p.rows(), p.cols());
    for (Index t = 0; t < t_out; ++t) {
      for (int j = 0; j < kernel; ++j) {
        const Index s = src[static_cast<std::size_t>(t * kernel + j)];
        if (s >= 0) g.row(s) += n.grad.block(t, j * c, 1, c);
      }
    }
    n.parents[0]->accumulate(g);
  });
}

Var interp_embed(const Var& values, const Var& table) {
  require(values.cols() == 1, "interp_embed values must be a column");
  const Index bins = table.rows();
  require(bins >= 2, "interp_embed needs at least two bins");
  const Index n = values.rows();
  std::vector<Index> lo(static_cast<std::size_t>(n));
  Eigen::VectorXd frac(n);
  Matrix out(n, table.cols());
  for (Index i = 0; i < n; ++i) {
    const double u =
        std::clamp(values.value()(i, 0), 0.0, 1.0) * static_cast<double>(bins - 1);
    Index k = static_cast<Index>(std::floor(u));
    k = std::clamp<Index>(k, 0, bins - 2);
    lo[static_cast<std::size_t>(i)] = k;
    frac(i) = u - static_cast<double>(k);
    out.row(i) = (1.0 - frac(i)) * table.value().row(k) +
                 frac(i) * table.value().row(k + 1);
  }
  return make(std::move(out), {values, table}, [lo, frac, bins](Node& nd) {
    const Matrix& v = nd.parents[0]->value;
    const Matrix& tab = nd.parents[1]->value;
    if (wants(nd, 0)) {
      Matrix gv = Matrix::Zero(v.rows(), 1);
      for (Index i = 0; i < v.rows(); ++i) {
        const double x = v(i, 0);
        if (x < 0.0 || x > 1.0) continue;
        const Index k = lo[static_cast<std::size_t>(i)];
        gv(i, 0) = static_cast<double>(bins - 1) *
                   nd.grad.row(i).dot(tab.row(k + 1) - tab.row(k));
      }
      nd.parents[0]->accumulate(gv);
    }
    if (wants(nd, 1)) {
      Matrix gt = Matrix::Zero(tab.rows(), tab.cols());
      for (Index i = 0; i < v.rows(); ++i) {
        const Index k = lo[static_cast<std::size_t>(i)];
        gt.row(k) += (1.0 - frac(i)) * nd.grad.row(i);
        gt.row(k + 1) += frac(i) * nd.grad.row(i);
      }
      nd.parents[1]->accumulate(gt);
    }
  });
}

Var graph_conv(const Var& x, const Var& adjacency, const Var& weight,
               const Var& bias, int joints) {
  const Index j = joints;
  require(adjacency.rows() == j && adjacency.cols() == j, "graph_conv adj");
  const Index cin = weight.rows();
  const Index cout = weight.cols();
  require(x.cols() == j * cin, "graph_conv input width");
  require(bias.rows() == 1 && bias.cols() == cout, "graph_conv bias");
  const Index t = x.rows();
  // Per-joint projection: z[t, i*cout + o] = sum_c x[t, i*cin + c] w(c, o).
  Matrix z(t, j * cout);
  for (Index i = 0; i < j; ++i) {
    z.middleCols(i * cout, cout) = x.value().middleCols(i * cin, cin) *
                                   weight.value();
  }
  Matrix out(t, j * cout);
  for (Index a = 0; a < j; ++a) {
    Matrix acc = Matrix::Zero(t, cout);
    for (Index i = 0; i < j; ++i) {
      const double w = adjacency.value()(a, i);
      if (w != 0.0) acc += w * z.middleCols(i * cout, cout);
    }
    out.middleCols(a * cout, cout) = acc.rowwise() + bias.value().row(0);
  }
  return make(std::move(out), {x, adjacency, weight, bias},
              [z, j, cin, cout](Node& n) {
                const Matrix& xv = n.parents[0]->value;
                const Matrix& adj = n.parents[1]->value;
                const Matrix& w = n.parents[2]->value;
                const Index t = xv.rows();
                // dz_i = sum_a adj(a, i) * g_a
                Matrix dz = Matrix::Zero(t, j * cout);
                for (Index a = 0; a < j; ++a) {
                  const auto ga = n.grad.middleCols(a * cout, cout);
                  for (Index i = 0; i < j; ++i) {
                    const double aw = adj(a, i);
                    if (aw != 0.0) dz.middleCols(i * cout, cout) += aw * ga;
                  }
                }
                if (wants(n, 0)) {
                  Matrix dx(t, j * cin);
                  for (Index i = 0; i < j; ++i) {
                    dx.middleCols(i * cin, cin) =
                        dz.middleCols(i * cout, cout) * w.transpose();
                  }
                  n.parents[0]->accumulate(dx);
                }
                if (wants(n, 1)) {
                  Matrix dadj(j, j);
                  for (Index a = 0; a < j; ++a) {
                    const auto ga = n.grad.middleCols(a * cout, cout);
                    for (Index i = 0; i < j; ++i) {
                      dadj(a, i) =
                          ga.cwiseProduct(z.middleCols(i * cout, cout)).sum();
                    }
                  }
                  n.parents[1]->accumulate(dadj);
                }
                if (wants(n, 2)) {
                  Matrix dw = Matrix::Zero(cin, cout);
                  for (Index i = 0; i < j; ++i) {
                    dw += xv.middleCols(i * cin, cin).transpose() *
                          dz.middleCols(i * cout, cout);
                  }
                  n.parents[2]->accumulate(dw);
                }
                if (wants(n, 3)) {
                  Matrix db = Matrix::Zero(1, cout);
                  for (Index a = 0; a < j; ++a) {
                    db += n.grad.middleCols(a * cout, cout).colwise().sum();
                  }
                  n.parents[3]->accumulate(db);
                }
              });
}

}  // namespace s2p::ag
