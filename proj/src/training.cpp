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

#include "metaspoof/training.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "metaspoof/metrics.hpp"
#include "metaspoof/seeding.hpp"

namespace metaspoof {

std::string train_log_csv(const std::vector<TrainLogRow>& log, const std::string& metric_name) {
  std::string out = "epoch,mean_loss," + metric_name + ",lr\n";
  for (const auto& row : log) {
    out += std::to_string(row.epoch) + ',' + format_double(row.mean_loss) + ',' + format_double(row.val_metric) +
           ',' + format_double(row.lr) + '\n';
  }
  return out;
}

void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log,
                     const std::string& metric_name) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << train_log_csv(log, metric_name);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void EpisodicTrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (episodes_per_epoch < 1) throw std::invalid_argument("episodes_per_epoch must be >= 1");
  if (!(lr.base_lr > 0.0) || !(lr.max_lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (validation_tasks < 1) throw std::invalid_argument("validation_tasks must be >= 1");
  if (task.n_way < 2 || task.k_shot < 1 || task.query_per_class < 1) {
    throw std::invalid_argument("task spec needs n_way >= 2, k_shot >= 1, query >= 1");
  }
}

BackboneConfig backbone_for(const EpisodicTrainConfig& config, std::size_t input_dim) {
  BackboneConfig bc;
  bc.input_dim = input_dim;
  bc.hidden_dims = config.hidden_dims;
  bc.output_dim = config.embedding_dim;
  bc.seed = derive_seed(config.seed, Stream::kInit);
  return bc;
}

std::vector<Task> validation_bank(const EpisodeDataset& val, const EpisodicTrainConfig& config) {
  Rng rng(derive_seed(config.seed, Stream::kValidationBank));
  std::vector<Task> bank;
  bank.reserve(config.validation_tasks);
  for (std::size_t i = 0; i < config.validation_tasks; ++i) bank.push_back(sample_task(val, config.task, rng));
  return bank;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace metaspoof
