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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "metaspoof/tensor.hpp"

namespace metaspoof {

inline constexpr std::size_t kDefaultEmbeddingDim = 64;

struct BackboneConfig {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden_dims = {256, 128};
  std::size_t output_dim = kDefaultEmbeddingDim;
  std::uint64_t seed = 0;

  // input, hidden..., output
  std::vector<std::size_t> layer_dims() const;
  // Throws std::invalid_argument on a zero dimension.
  void validate() const;
};

std::size_t closed_form_parameter_count(const BackboneConfig& config);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Weights ([in x out]) and biases of an MLP, in layer order: w0, b0, w1, ...
///
/// Copies are deep. Hidden layers are affine + ReLU, the last layer is affine.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(BackboneConfig config, std::vector<NamedTensor> tensors);

  const BackboneConfig& config() const { return config_; }
  std::size_t num_layers() const { return tensors_.size() / 2; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t parameter_count() const;

  Tensor& operator[](std::size_t i) { return tensors_[i].tensor; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i].tensor; }
  const std::string& name(std::size_t i) const { return tensors_[i].name; }
  Tensor& weight(std::size_t layer) { return tensors_[2 * layer].tensor; }
  Tensor& bias(std::size_t layer) { return tensors_[2 * layer + 1].tensor; }
  const Tensor& weight(std::size_t layer) const { return tensors_[2 * layer].tensor; }
  const Tensor& bias(std::size_t layer) const { return tensors_[2 * layer + 1].tensor; }

  std::vector<Tensor*> pointers();

  void zero_grads();
  void set_requires_grad(bool on);
  // p -= rate * grad for every tensor that holds a gradient.
  void sgd_step(double rate);

  bool values_equal(const ParameterSet& other) const;

 private:
  BackboneConfig config_;
  std::vector<NamedTensor> tensors_;
};

// Xavier-normal weights, N(0, 2 / (fan_in + fan_out)); zero biases.
ParameterSet init_xavier(const BackboneConfig& config);

// Deep copy with fresh (empty) gradient buffers.
ParameterSet clone_params(const ParameterSet& params);

// Registers every tensor as a graph parameter leaf.
std::vector<Var> bind(Graph& graph, ParameterSet& params);

// Forward pass on graph vars as produced by bind().
Var embed(Graph& graph, std::span<const Var> params, Var batch);

// Gradient-free forward pass.
Tensor embed(const ParameterSet& params, const Tensor& batch);

// "MSPF" checkpoint: magic, u32 version, u32 layer count, u32 dims, u64 seed,
// then raw little-endian f64 buffers in declaration order.
std::vector<std::uint8_t> serialize_checkpoint(const ParameterSet& params);
ParameterSet deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::filesystem::path& path);

}  // namespace metaspoof
