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

#include "metaspoof/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace metaspoof {
namespace {

double evaluate(const GraphFunction& f, std::span<Tensor* const> points) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(points.size());
  for (Tensor* t : points) vars.push_back(g.input(*t));
  const Var out = f(g, vars);
  if (out.value().numel() != 1) throw DimensionError("grad_check: function must be scalar-valued");
  return out.value()[0];
}

}  // namespace

GradCheckReport grad_check(const GraphFunction& f, std::span<Tensor* const> points,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");

  std::vector<bool> saved_flags;
  for (Tensor* t : points) {
    saved_flags.push_back(t->requires_grad());
    t->set_requires_grad(true);
    t->clear_grad();
  }
  {
    Graph g;
    std::vector<Var> vars;
    for (Tensor* t : points) vars.push_back(g.parameter(*t));
    g.backward(f(g, vars));
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t ti = 0; ti < points.size(); ++ti) {
    const Tensor& t = *points[ti];
    for (std::size_t i = 0; i < t.numel(); ++i) {
      if (options.exclude && options.exclude(ti, i, t[i])) continue;
      coords.emplace_back(ti, i);
    }
  }
  if (options.max_coords != 0 && coords.size() > options.max_coords) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coords);
  }

  GradCheckReport report;
  for (auto [ti, i] : coords) {
    Tensor& t = *points[ti];
    const double analytic = t.grad().empty() ? 0.0 : t.grad()[i];
    const double original = t[i];
    t[i] = original + options.step;
    const double up = evaluate(f, points);
    t[i] = original - options.step;
    const double down = evaluate(f, points);
    t[i] = original;
    const double numeric = (up - down) / (2.0 * options.step);
    const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
    report.max_rel_error = std::max(report.max_rel_error, err);
    ++report.coords_checked;
  }

  for (std::size_t ti = 0; ti < points.size(); ++ti) {
    points[ti]->clear_grad();
    points[ti]->set_requires_grad(saved_flags[ti]);
  }
  return report;
}

double grad_check(const std::function<Var(Graph&, Var)>& f, Tensor& point, double step) {
  Tensor* pts[] = {&point};
  GradCheckOptions opts;
  opts.step = step;
  return grad_check([&](Graph& g, std::span<const Var> v) { return f(g, v[0]); }, pts, opts)
      .max_rel_error;
}

}  // namespace metaspoof
