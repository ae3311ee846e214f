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

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace metaspoof {

using Shape = std::vector<std::size_t>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major float64 array with an optional gradient buffer.
///
/// A tensor used as a graph parameter receives gradients on backward; they
/// accumulate until zero_grad() is called.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return values_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const double* data() const { return values_.data(); }
  double* data() { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  bool has_grad() const { return grad_.has_value(); }
  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  void accumulate_grad(std::span<const double> g);
  void zero_grad();
  void clear_grad() { grad_.reset(); }

 private:
  Shape shape_;
  std::vector<double> values_;
  bool requires_grad_ = false;
  std::optional<std::vector<double>> grad_;
};

enum class OpKind {
  kInput,
  kParameter,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSum,
  kRelu,
  kTranspose,
  kAddRowVector,
  kRowSqNorm,
  kSqEuclidean,
  kLogSoftmax,
  kNllLoss,
  kClassMean,
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Tape of operations in insertion order. Backward walks the tape in reverse,
/// visiting each node once.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::span<const double> gout)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Constant input; values are copied and never receive gradients.
  Var input(Tensor value);
  // Leaf bound to an external tensor. When the tensor requires grad,
  // backward() adds this node's gradient into tensor.grad. The tensor must
  // outlive the call to backward() and must not be resized meanwhile.
  Var parameter(Tensor& leaf);

  // Throws DimensionError unless loss has exactly one element.
  void backward(Var loss);

  const Tensor& value(Var v) const { return nodes_.at(v.id).out; }
  // Gradient of the last backward() w.r.t. any node (empty if not needed).
  std::span<const double> grad(Var v) const { return nodes_.at(v.id).grad; }
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  const std::vector<std::size_t>& inputs(Var v) const { return nodes_.at(v.id).inputs; }
  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var record(OpKind kind, std::vector<std::size_t> inputs, Tensor out,
             BackwardFn backward);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  const Tensor& value_at(std::size_t id) const { return nodes_[id].out; }
  // Gradient accumulator of a node; only valid inside backward.
  std::vector<double>& grad_buffer(std::size_t id);

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Tensor out;
    bool needs_grad = false;
    Tensor* leaf = nullptr;
    BackwardFn backward;
    std::vector<double> grad;
  };

  std::vector<Node> nodes_;
};

enum class ElementwiseKind { kAdd, kSub, kMul };

// Shapes must match, or one side must hold a single element.
Var elementwise(Var a, Var b, ElementwiseKind kind);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);

Var matmul(Var a, Var b);
Var transpose(Var a);
// a: m x n, row: [n]; adds row to every row of a.
Var add_row_vector(Var a, Var row);
Var relu(Var a);

// out[i][j] = ||a_i - b_j||^2.
Var sq_euclidean(Var a, Var b);
// Row-wise squared norm of an m x n matrix, shape [m].
Var row_sq_norm(Var a);

// Row-wise, max-shifted. Throws std::domain_error on non-finite input.
Var log_softmax(Var a);
// Mean over rows of -log_probs[i][targets[i]]; scalar result.
Var nll_loss(Var log_probs, std::span<const std::size_t> targets);

// out[c] = mean of rows i with labels[i] == c, for c in [0, n_classes).
// Throws std::invalid_argument when a class has no rows.
Var class_mean(Var rows, std::span<const std::size_t> labels,
               std::size_t n_classes);

}  // namespace metaspoof
