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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "metaspoof/backbone.hpp"
#include "metaspoof/episodic.hpp"
#include "metaspoof/metrics.hpp"
#include "metaspoof/optim.hpp"
#include "metaspoof/training.hpp"

namespace metaspoof {

enum class Method { kProtoNet, kProtoMaml, kBaseline };

std::string_view method_name(Method method);
// Accepts "protonet", "protomaml", "baseline".
Method parse_method(std::string_view text);

// Seed of the support draw for one (k, repeat) job. Depends on nothing else,
// so adding shot values or reordering jobs leaves existing results unchanged.
std::uint64_t support_seed(std::uint64_t master, std::size_t k, std::size_t repeat);

struct AdaptationOutcome {
  EerResult eer;
  std::vector<ScoredTrial> trials;
  std::uint64_t support_seed = 0;
};

/// One evaluation job: draw a k-shot binary support with the given seed,
/// adapt (ProtoNet prototypes, ProtoMAML inner loop, or nothing for the
/// baseline), and score every remaining record.
AdaptationOutcome adapt_and_evaluate(const ParameterSet& params, const EpisodeDataset& eval, Method method,
                                     std::size_t k, std::size_t steps, double inner_lr, std::uint64_t seed);

struct SweepConfig {
  std::vector<std::size_t> shots = {2, 4, 8, 16, 32, 64, 96, 256};
  std::size_t repeats = 9;
  std::size_t adapt_steps = 25;
  double inner_lr = 0.1;
  Method method = Method::kProtoNet;
  std::uint64_t seed = 0;
  // Shot values above this are dropped for ProtoMAML.
  std::size_t protomaml_max_shots = 96;
  std::size_t threads = 0;

  void validate() const;
  std::vector<std::size_t> effective_shots() const;
};

struct SweepDetailRow {
  std::size_t key = 0;  // k for shot sweeps, steps for step sweeps
  std::size_t repeat = 0;
  double eer = 0.0;
  std::uint64_t support_seed = 0;

  bool operator==(const SweepDetailRow&) const = default;
};

struct SweepSummaryRow {
  std::size_t key = 0;
  double mean_eer = 0.0;
  double std_eer = 0.0;

  bool operator==(const SweepSummaryRow&) const = default;
};

struct SweepResult {
  std::string key_name;  // "k" or "steps"
  std::vector<SweepDetailRow> rows;
  std::vector<SweepSummaryRow> summary;

  const SweepSummaryRow& summary_for(std::size_t key) const;
};

// Checks every shot value against the eval set before running any job.
SweepResult run_shot_sweep(const ParameterSet& params, const EpisodeDataset& eval, const SweepConfig& config);

struct StepsSweepConfig {
  std::size_t k = 96;
  std::vector<std::size_t> steps = {0, 5, 25, 100, 200};
  std::size_t repeats = 9;
  double inner_lr = 0.1;
  Method method = Method::kProtoMaml;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  void validate() const;
};

SweepResult run_steps_sweep(const ParameterSet& params, const EpisodeDataset& eval, const StepsSweepConfig& config);

// `<key>,repeat,eer,support_seed` and `<key>,mean_eer,std_eer`.
std::string sweep_detail_csv(const SweepResult& result);
std::string sweep_summary_csv(const SweepResult& result);

// ---------------------------------------------------------------------------
// Supervised baseline

struct BaselineConfig {
  std::size_t max_epochs = 100;
  std::size_t batch_size = 32;
  double lr = 1e-6;
  // Training stops once this many epochs pass without a validation gain.
  std::size_t patience = 15;
  AdamWConfig optimizer{0.9, 0.999, 1e-8, 0.0};
  std::vector<std::size_t> hidden_dims = {256, 128, 64};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Backbone plus a 2-class output layer trained with NLL on bonafide/spoof.
/// Validation metric is EER on `val`; the best-EER epoch is returned.
TrainResult train_supervised_baseline(const EpisodeDataset& train, const EpisodeDataset& val,
                                      const BaselineConfig& config);

// Zero-shot log-odds of bonafide from a baseline model.
std::vector<double> baseline_score(const ParameterSet& params, const Tensor& features);

// ---------------------------------------------------------------------------
// Comparison table

struct CompareConfig {
  std::size_t protonet_shots = 256;
  std::size_t protomaml_shots = 96;
  std::size_t repeats = 9;
  std::size_t adapt_steps = 25;
  double inner_lr = 0.1;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

struct ComparisonRow {
  std::string model;
  std::size_t trainable_params = 0;
  std::size_t shots = 0;  // 0 = zero-shot
  std::string eval_set;
  double mean_eer = 0.0;
  double std_eer = 0.0;

  bool operator==(const ComparisonRow&) const = default;
};

struct NamedDataset {
  std::string name;
  const EpisodeDataset* dataset = nullptr;
};

/// The baseline is scored zero-shot on the same query remainders the
/// meta-learners are evaluated on (its support is drawn and discarded).
std::vector<ComparisonRow> compare_methods(const ParameterSet& baseline, const ParameterSet& protonet,
                                           const ParameterSet& protomaml, const std::vector<NamedDataset>& eval_sets,
                                           const CompareConfig& config);

std::string comparison_csv(const std::vector<ComparisonRow>& rows);
std::string comparison_table(const std::vector<ComparisonRow>& rows);

}  // namespace metaspoof
