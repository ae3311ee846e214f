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

#include "metaspoof/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace metaspoof {

void AdamW::step(ParameterSet& params, double lr) {
  if (m_.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.emplace_back(params[i].numel(), 0.0);
      v_.emplace_back(params[i].numel(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("AdamW: parameter set changed shape");
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const double decay = 1.0 - lr * config_.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      p[j] *= decay;
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * gj;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

double cyclic_lr(std::size_t iteration, const CyclicLrConfig& config) {
  if (config.step_size == 0) return config.base_lr;
  const double it = static_cast<double>(iteration);
  const double step = static_cast<double>(config.step_size);
  const double cycle = std::floor(1.0 + it / (2.0 * step));
  const double x = std::abs(it / step - 2.0 * cycle + 1.0);
  return config.base_lr + (config.max_lr - config.base_lr) * std::max(0.0, 1.0 - x);
}

}  // namespace metaspoof
