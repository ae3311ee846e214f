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
#include <functional>
#include <span>
#include <vector>

#include "metaspoof/tensor.hpp"

namespace metaspoof {

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every coordinate; otherwise a seeded uniform sample of this many.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  // Coordinates for which this returns true are never sampled, e.g. points
  // within `step` of a ReLU kink.
  std::function<bool(std::size_t tensor, std::size_t index, double value)> exclude;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

// Builds the scalar function on a fresh graph from the given parameter vars.
using GraphFunction = std::function<Var(Graph&, std::span<const Var>)>;

/// Compares reverse-mode gradients against central differences.
///
/// Error per coordinate is |analytic - numeric| / max(1, |analytic|); the
/// report carries the maximum. Points are restored before returning and any
/// grads previously held by `points` are discarded.
GradCheckReport grad_check(const GraphFunction& f, std::span<Tensor* const> points,
                           const GradCheckOptions& options = {});

double grad_check(const std::function<Var(Graph&, Var)>& f, Tensor& point, double step = 1e-5);

}  // namespace metaspoof
