// Copyright 2026 The metaspoof Authors
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

#include "metaspoof/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "metaspoof/kernels.hpp"

namespace metaspoof {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(t.shape()));
  }
}

std::vector<double> transposed(const double* src, std::size_t rows, std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  }
  return out;
}

void accumulate(std::vector<double>& dst, std::span<const double> src) {
  kernels::active().axpy(src.size(), 1.0, src.data(), dst.data());
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_shape(shape_);
  if (values_.size() != shape_numel(shape_)) {
    throw DimensionError("tensor of shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_numel(shape_)) + " values, got " +
                         std::to_string(values_.size()));
  }
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::span<const double> Tensor::grad() const {
  if (!grad_) return {};
  return *grad_;
}

void Tensor::accumulate_grad(std::span<const double> g) {
  if (g.size() != values_.size()) {
    throw DimensionError("gradient size " + std::to_string(g.size()) +
                         " does not match tensor " + shape_string(shape_));
  }
  if (!grad_) grad_.emplace(values_.size(), 0.0);
  accumulate(*grad_, g);
}

void Tensor::zero_grad() {
  if (grad_) {
    std::fill(grad_->begin(), grad_->end(), 0.0);
  } else {
    grad_.emplace(values_.size(), 0.0);
  }
}

const Tensor& Var::value() const { return graph->value(*this); }

Var Graph::input(Tensor value) {
  nodes_.push_back(Node{OpKind::kInput, {}, std::move(value), false, nullptr, {}, {}});
  return Var{this, nodes_.size() - 1};
}

Var Graph::parameter(Tensor& leaf) {
  Tensor copy(leaf.shape(), std::vector<double>(leaf.values().begin(), leaf.values().end()));
  nodes_.push_back(Node{OpKind::kParameter, {}, std::move(copy), leaf.requires_grad(), &leaf, {}, {}});
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(OpKind kind, std::vector<std::size_t> inputs, Tensor out,
                  BackwardFn backward) {
  bool needs = false;
  for (std::size_t id : inputs) needs = needs || nodes_.at(id).needs_grad;
  if (!needs) backward = nullptr;
  nodes_.push_back(Node{kind, std::move(inputs), std::move(out), needs, nullptr, std::move(backward), {}});
  return Var{this, nodes_.size() - 1};
}

std::vector<double>& Graph::grad_buffer(std::size_t id) { return nodes_[id].grad; }

void Graph::backward(Var loss) {
  if (loss.graph != this) throw std::invalid_argument("backward: loss belongs to another graph");
  const Node& root = nodes_.at(loss.id);
  if (root.out.numel() != 1) {
    throw DimensionError("backward needs a scalar loss, got " + shape_string(root.out.shape()));
  }
  for (Node& node : nodes_) {
    if (node.needs_grad) {
      node.grad.assign(node.out.numel(), 0.0);
    } else {
      node.grad.clear();
    }
  }
  if (!root.needs_grad) return;
  nodes_[loss.id].grad[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad) continue;
    if (node.backward) node.backward(*this, node.grad);
  }
  for (Node& node : nodes_) {
    if (node.kind == OpKind::kParameter && node.needs_grad) node.leaf->accumulate_grad(node.grad);
  }
}

// ---------------------------------------------------------------------------
// Elementwise family

namespace {

bool is_single(const Tensor& t) { return t.numel() == 1; }

}  // namespace

Var elementwise(Var a, Var b, ElementwiseKind kind) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool same = av.shape() == bv.shape();
  if (!same && !is_single(av) && !is_single(bv)) {
    throw DimensionError("elementwise shape mismatch: " + shape_string(av.shape()) + " vs " +
                         shape_string(bv.shape()));
  }
  const auto& k = kernels::active();
  const Shape out_shape = (same || is_single(bv)) ? av.shape() : bv.shape();
  Tensor out(out_shape);
  const std::size_t n = out.numel();
  if (same) {
    switch (kind) {
      case ElementwiseKind::kAdd: k.add(n, av.data(), bv.data(), out.data()); break;
      case ElementwiseKind::kSub: k.sub(n, av.data(), bv.data(), out.data()); break;
      case ElementwiseKind::kMul: k.mul(n, av.data(), bv.data(), out.data()); break;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double x = is_single(av) ? av[0] : av[i];
      const double y = is_single(bv) ? bv[0] : bv[i];
      switch (kind) {
        case ElementwiseKind::kAdd: out[i] = x + y; break;
        case ElementwiseKind::kSub: out[i] = x - y; break;
        case ElementwiseKind::kMul: out[i] = x * y; break;
      }
    }
  }
  const OpKind op = kind == ElementwiseKind::kAdd   ? OpKind::kAdd
                    : kind == ElementwiseKind::kSub ? OpKind::kSub
                                                    : OpKind::kMul;
  const std::size_t ia = a.id, ib = b.id;
  return g.record(op, {ia, ib}, std::move(out), [ia, ib, kind](Graph& gr, std::span<const double> gout) {
    const std::size_t n = gout.size();
    // Partial derivative of the output w.r.t. one operand, element i.
    auto push = [&](std::size_t self, std::size_t other, bool negate) {
      if (!gr.needs_grad(self)) return;
      std::vector<double>& gs = gr.grad_buffer(self);
      const Tensor& ov = gr.value_at(other);
      const bool reduce = gs.size() == 1 && n != 1;
      for (std::size_t i = 0; i < n; ++i) {
        double d = gout[i];
        if (kind == ElementwiseKind::kMul) d *= is_single(ov) ? ov[0] : ov[i];
        if (negate) d = -d;
        if (reduce) {
          gs[0] += d;
        } else {
          gs[i] += d;
        }
      }
    };
    push(ia, ib, false);
    push(ib, ia, kind == ElementwiseKind::kSub);
  });
}

Var add(Var a, Var b) { return elementwise(a, b, ElementwiseKind::kAdd); }
Var sub(Var a, Var b) { return elementwise(a, b, ElementwiseKind::kSub); }
Var mul(Var a, Var b) { return elementwise(a, b, ElementwiseKind::kMul); }

Var scale(Var a, double factor) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  kernels::active().scale(av.numel(), factor, av.data(), out.data());
  const std::size_t ia = a.id;
  return a.graph->record(OpKind::kScale, {ia}, std::move(out),
                         [ia, factor](Graph& gr, std::span<const double> gout) {
                           kernels::active().axpy(gout.size(), factor, gout.data(),
                                                  gr.grad_buffer(ia).data());
                         });
}

Var sum(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double x : av.values()) s += x;
  const std::size_t ia = a.id;
  return a.graph->record(OpKind::kSum, {ia}, Tensor::scalar(s),
                         [ia](Graph& gr, std::span<const double> gout) {
                           for (double& x : gr.grad_buffer(ia)) x += gout[0];
                         });
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw DimensionError("matmul inner dimensions differ: " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  Tensor out({m, n});
  kernels::active().gemm(m, k, n, av.data(), bv.data(), out.data());
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record(OpKind::kMatmul, {ia, ib}, std::move(out),
                         [ia, ib, m, k, n](Graph& gr, std::span<const double> gout) {
                           const auto& ker = kernels::active();
                           std::vector<double> tmp;
                           if (gr.needs_grad(ia)) {
                             // dA = dOut * B^T
                             const auto bt = transposed(gr.value_at(ib).data(), k, n);
                             tmp.assign(m * k, 0.0);
                             ker.gemm(m, n, k, gout.data(), bt.data(), tmp.data());
                             accumulate(gr.grad_buffer(ia), tmp);
                           }
                           if (gr.needs_grad(ib)) {
                             // dB = A^T * dOut
                             const auto at = transposed(gr.value_at(ia).data(), m, k);
                             tmp.assign(k * n, 0.0);
                             ker.gemm(k, m, n, at.data(), gout.data(), tmp.data());
                             accumulate(gr.grad_buffer(ib), tmp);
                           }
                         });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_matrix(av, "transpose");
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({c, r}, transposed(av.data(), r, c));
  const std::size_t ia = a.id;
  return a.graph->record(OpKind::kTranspose, {ia}, std::move(out),
                         [ia, r, c](Graph& gr, std::span<const double> gout) {
                           accumulate(gr.grad_buffer(ia), transposed(gout.data(), c, r));
                         });
}

Var add_row_vector(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require_matrix(av, "add_row_vector");
  const std::size_t m = av.rows(), n = av.cols();
  if (rv.numel() != n) {
    throw DimensionError("add_row_vector: row " + shape_string(rv.shape()) + " does not fit " +
                         shape_string(av.shape()));
  }
  Tensor out(av.shape());
  const auto& ker = kernels::active();
  for (std::size_t i = 0; i < m; ++i) ker.add(n, av.data() + i * n, rv.data(), out.data() + i * n);
  const std::size_t ia = a.id, ir = row.id;
  return a.graph->record(OpKind::kAddRowVector, {ia, ir}, std::move(out),
                         [ia, ir, m, n](Graph& gr, std::span<const double> gout) {
                           if (gr.needs_grad(ia)) accumulate(gr.grad_buffer(ia), gout);
                           if (gr.needs_grad(ir)) {
                             std::vector<double>& gr_row = gr.grad_buffer(ir);
                             for (std::size_t i = 0; i < m; ++i) {
                               kernels::active().axpy(n, 1.0, gout.data() + i * n, gr_row.data());
                             }
                           }
                         });
}

Var relu(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  kernels::active().relu(av.numel(), av.data(), out.data());
  const std::size_t ia = a.id;
  return a.graph->record(OpKind::kRelu, {ia}, std::move(out),
                         [ia](Graph& gr, std::span<const double> gout) {
                           kernels::active().relu_backward(gout.size(), gr.value_at(ia).data(),
                                                           gout.data(), gr.grad_buffer(ia).data());
                         });
}

// ---------------------------------------------------------------------------
// Distances and losses

Var sq_euclidean(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "sq_euclidean");
  require_matrix(bv, "sq_euclidean");
  const std::size_t m = av.rows(), n = bv.rows(), d = av.cols();
  if (bv.cols() != d) {
    throw DimensionError("sq_euclidean trailing dimensions differ: " + shape_string(av.shape()) +
                         " vs " + shape_string(bv.shape()));
  }
  Tensor out({m, n});
  const auto bt = transposed(bv.data(), n, d);
  kernels::active().sq_dist(m, n, d, av.data(), bt.data(), out.data());
  const std::size_t ia = a.id, ib = b.id;
  return a.graph->record(
      OpKind::kSqEuclidean, {ia, ib}, std::move(out),
      [ia, ib, m, n, d](Graph& gr, std::span<const double> gout) {
        const auto& ker = kernels::active();
        const Tensor& A = gr.value_at(ia);
        const Tensor& B = gr.value_at(ib);
        if (gr.needs_grad(ia)) {
          // dA_i = 2 * (rowsum(G)_i * a_i - (G B)_i)
          std::vector<double> gb(m * d);
          ker.gemm(m, n, d, gout.data(), B.data(), gb.data());
          std::vector<double>& ga = gr.grad_buffer(ia);
          for (std::size_t i = 0; i < m; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < n; ++j) rs += gout[i * n + j];
            for (std::size_t t = 0; t < d; ++t) {
              ga[i * d + t] += 2.0 * (rs * A.at(i, t) - gb[i * d + t]);
            }
          }
        }
        if (gr.needs_grad(ib)) {
          // dB_j = 2 * (colsum(G)_j * b_j - (G^T A)_j)
          const auto gt = transposed(gout.data(), m, n);
          std::vector<double> ga(n * d);
          ker.gemm(n, m, d, gt.data(), A.data(), ga.data());
          std::vector<double>& gbuf = gr.grad_buffer(ib);
          for (std::size_t j = 0; j < n; ++j) {
            double cs = 0.0;
            for (std::size_t i = 0; i < m; ++i) cs += gt[j * m + i];
            for (std::size_t t = 0; t < d; ++t) {
              gbuf[j * d + t] += 2.0 * (cs * B.at(j, t) - ga[j * d + t]);
            }
          }
        }
      });
}

Var row_sq_norm(Var a) {
  const Tensor& av = a.value();
  require_matrix(av, "row_sq_norm");
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += av.at(i, j) * av.at(i, j);
    out[i] = s;
  }
  const std::size_t ia = a.id;
  return a.graph->record(OpKind::kRowSqNorm, {ia}, std::move(out),
                         [ia, m, n](Graph& gr, std::span<const double> gout) {
                           const Tensor& A = gr.value_at(ia);
                           std::vector<double>& ga = gr.grad_buffer(ia);
                           for (std::size_t i = 0; i < m; ++i) {
                             for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += 2.0 * A.at(i, j) * gout[i];
                           }
                         });
}

Var log_softmax(Var a) {
  const Tensor& av = a.value();
  require_matrix(av, "log_softmax");
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = av.data() + i * n;
    double mx = row[0];
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(row[j])) {
        throw std::domain_error("log_softmax: non-finite input in row " + std::to_string(i));
      }
      mx = std::max(mx, row[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = row[j] - lse;
  }
  const std::size_t ia = a.id;
  const std::size_t self = a.graph->size();
  return a.graph->record(OpKind::kLogSoftmax, {ia}, std::move(out),
                         [ia, self, m, n](Graph& gr, std::span<const double> gout) {
                           const Tensor& lp = gr.value_at(self);
                           std::vector<double>& ga = gr.grad_buffer(ia);
                           for (std::size_t i = 0; i < m; ++i) {
                             double gs = 0.0;
                             for (std::size_t j = 0; j < n; ++j) gs += gout[i * n + j];
                             for (std::size_t j = 0; j < n; ++j) {
                               ga[i * n + j] += gout[i * n + j] - std::exp(lp.at(i, j)) * gs;
                             }
                           }
                         });
}

Var nll_loss(Var log_probs, std::span<const std::size_t> targets) {
  const Tensor& lp = log_probs.value();
  require_matrix(lp, "nll_loss");
  const std::size_t m = lp.rows(), n = lp.cols();
  if (targets.size() != m) {
    throw DimensionError("nll_loss: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(m) + " rows");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] >= n) {
      throw std::out_of_range("nll_loss: target " + std::to_string(targets[i]) + " at row " +
                              std::to_string(i) + " outside [0, " + std::to_string(n) + ")");
    }
    s += lp.at(i, targets[i]);
  }
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  const std::size_t ia = log_probs.id;
  return log_probs.graph->record(OpKind::kNllLoss, {ia}, Tensor::scalar(-s / static_cast<double>(m)),
                                 [ia, n, tgt = std::move(tgt)](Graph& gr, std::span<const double> gout) {
                                   std::vector<double>& ga = gr.grad_buffer(ia);
                                   const double w = -gout[0] / static_cast<double>(tgt.size());
                                   for (std::size_t i = 0; i < tgt.size(); ++i) ga[i * n + tgt[i]] += w;
                                 });
}

Var class_mean(Var rows, std::span<const std::size_t> labels, std::size_t n_classes) {
  const Tensor& rv = rows.value();
  require_matrix(rv, "class_mean");
  const std::size_t m = rv.rows(), d = rv.cols();
  if (labels.size() != m) {
    throw DimensionError("class_mean: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(m) + " rows");
  }
  std::vector<std::size_t> counts(n_classes, 0);
  for (std::size_t l : labels) {
    if (l >= n_classes) throw std::out_of_range("class_mean: label " + std::to_string(l) + " out of range");
    ++counts[l];
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (counts[c] == 0) throw std::invalid_argument("class_mean: class " + std::to_string(c) + " has no rows");
  }
  Tensor out({n_classes, d});
  for (std::size_t i = 0; i < m; ++i) {
    kernels::active().add(d, out.data() + labels[i] * d, rv.data() + i * d, out.data() + labels[i] * d);
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t t = 0; t < d; ++t) out.at(c, t) /= static_cast<double>(counts[c]);
  }
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  const std::size_t ia = rows.id;
  return rows.graph->record(
      OpKind::kClassMean, {ia}, std::move(out),
      [ia, d, lab = std::move(lab), counts = std::move(counts)](Graph& gr, std::span<const double> gout) {
        std::vector<double>& ga = gr.grad_buffer(ia);
        for (std::size_t i = 0; i < lab.size(); ++i) {
          const double w = 1.0 / static_cast<double>(counts[lab[i]]);
          kernels::active().axpy(d, w, gout.data() + lab[i] * d, ga.data() + i * d);
        }
      });
}

}  // namespace metaspoof
