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
#include <functional>
#include <string>
#include <vector>

#include "metaspoof/backbone.hpp"
#include "metaspoof/episodic.hpp"
#include "metaspoof/optim.hpp"

namespace metaspoof {

struct TrainLogRow {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  // Validation accuracy for the meta-learners, validation EER for the baseline.
  double val_metric = 0.0;
  // Rate used by the first optimizer step of the epoch.
  double lr = 0.0;

  bool operator==(const TrainLogRow&) const = default;
};

struct TrainResult {
  ParameterSet params;  // best-validation checkpoint
  std::vector<TrainLogRow> log;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
};

// CSV `epoch,mean_loss,<metric_name>,lr`.
std::string train_log_csv(const std::vector<TrainLogRow>& log, const std::string& metric_name);
void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log,
                     const std::string& metric_name);

// Shared by the episodic trainers.
struct EpisodicTrainConfig {
  std::size_t epochs = 200;
  std::size_t episodes_per_epoch = 100;
  TaskSpec task{3, 5, 5};
  CyclicLrConfig lr{1e-6, 1e-3, 0};  // step_size derived from lr_step_epochs
  std::size_t lr_step_epochs = 8;
  AdamWConfig optimizer{};
  std::size_t validation_tasks = 200;
  std::vector<std::size_t> hidden_dims = {256, 128};
  std::size_t embedding_dim = kDefaultEmbeddingDim;
  std::uint64_t seed = 0;
  // Worker threads for validation; 0 picks hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
};

BackboneConfig backbone_for(const EpisodicTrainConfig& config, std::size_t input_dim);

// Fixed, seeded bank of validation tasks.
std::vector<Task> validation_bank(const EpisodeDataset& val, const EpisodicTrainConfig& config);

// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
// visited exactly once; callers write results into per-index slots.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace metaspoof
