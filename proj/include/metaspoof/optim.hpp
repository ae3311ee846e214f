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
#include <vector>

#include "metaspoof/backbone.hpp"

namespace metaspoof {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled: p *= 1 - lr * weight_decay before the moment update.
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay. weight_decay = 0 gives plain Adam.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  // Uses the gradients currently held by params; tensors without a gradient
  // are treated as having a zero gradient.
  void step(ParameterSet& params, double lr);

  std::uint64_t steps_taken() const { return t_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct CyclicLrConfig {
  double base_lr = 1e-6;
  double max_lr = 1e-3;
  // Half-cycle length in optimizer iterations.
  std::size_t step_size = 800;
};

// Triangular cyclic schedule: base_lr at iteration 0, max_lr after step_size
// iterations, back to base_lr after 2 * step_size, repeating.
double cyclic_lr(std::size_t iteration, const CyclicLrConfig& config);

}  // namespace metaspoof
