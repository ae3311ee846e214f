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
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "metaspoof/seeding.hpp"
#include "metaspoof/tensor.hpp"

namespace metaspoof {

inline constexpr const char* kBonafideClass = "bonafide";

enum class BinaryLabel { kBonafide, kSpoof };

std::string_view to_string(BinaryLabel label);
// Throws std::invalid_argument for anything but "bonafide" / "spoof".
BinaryLabel parse_binary_label(std::string_view text);

struct LabeledEmbedding {
  std::string id;
  std::vector<double> features;
  std::string attack_class;
  BinaryLabel binary_label = BinaryLabel::kSpoof;

  bool operator==(const LabeledEmbedding&) const = default;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable labeled embedding collection with a per-class record index.
class EpisodeDataset {
 public:
  EpisodeDataset() = default;
  // Validates dims, finiteness, unique ids and the bonafide-label pairing.
  explicit EpisodeDataset(std::vector<LabeledEmbedding> records);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<LabeledEmbedding>& records() const { return records_; }
  const LabeledEmbedding& operator[](std::size_t i) const { return records_[i]; }

  // Class labels in sorted order.
  const std::vector<std::string>& classes() const { return classes_; }
  const std::map<std::string, std::vector<std::size_t>>& class_index() const { return index_; }
  const std::vector<std::size_t>& class_records(const std::string& label) const;

  std::vector<std::size_t> indices_with(BinaryLabel label) const;
  std::size_t count(BinaryLabel label) const;

  // Rows of the given records, [n x dim].
  Tensor features(std::span<const std::size_t> rows) const;

 private:
  std::vector<LabeledEmbedding> records_;
  std::map<std::string, std::vector<std::size_t>> index_;
  std::vector<std::string> classes_;
  std::size_t dim_ = 0;
};

EpisodeDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const EpisodeDataset& dataset);
// CSV text with the same layout as save_dataset.
std::string dataset_to_csv(const EpisodeDataset& dataset);
EpisodeDataset dataset_from_csv(std::string_view text);

using Metadata = std::vector<std::pair<std::string, std::string>>;
// key=value lines, one per entry, in the given order.
void write_metadata(const std::filesystem::path& path, const Metadata& entries);
Metadata read_metadata(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Tasks

struct TaskSpec {
  std::size_t n_way = 3;
  std::size_t k_shot = 5;
  std::size_t query_per_class = 5;
};

struct TaskSet {
  Tensor features;                  // [n x dim]
  std::vector<std::size_t> labels;  // task-local class index per row
  std::vector<std::string> ids;

  std::size_t size() const { return labels.size(); }
};

struct Task {
  TaskSet support;
  TaskSet query;
  // Task-local index -> dataset class label.
  std::vector<std::string> class_labels;

  std::size_t n_way() const { return class_labels.size(); }
};

// Binary tasks always use index 0 for bonafide and 1 for spoof.
inline constexpr std::size_t kBonafideIndex = 0;
inline constexpr std::size_t kSpoofIndex = 1;

Task sample_task(const EpisodeDataset& dataset, const TaskSpec& spec, Rng& rng);

// 2-way support with k bonafide and k spoof records (attack classes pooled);
// every remaining record goes to the query set, in dataset order.
Task sample_binary_support(const EpisodeDataset& dataset, std::size_t k, Rng& rng);

// ---------------------------------------------------------------------------
// Synthetic attack families

struct SyntheticConfig {
  std::size_t dim = 32;
  std::size_t per_class = 300;
  std::size_t seen_attacks = 6;
  std::size_t unseen_attacks = 4;
  // Per-coordinate standard deviation around each class center.
  double spread = 1.0;
  // Distance of each seen attack center from bonafide along its own direction.
  double seen_separation = 4.0;
  // Same for unseen attacks, along directions no seen attack uses.
  double unseen_shift = 4.0;
  // Displacement shared by every spoof class (seen and unseen).
  double spoof_offset = 1.0;
  // Rigid translation applied to the whole unseen-domain split.
  double channel_offset = 2.0;

  void validate() const;
  Metadata to_metadata() const;
};

struct SyntheticSplits {
  EpisodeDataset train;
  EpisodeDataset eval_seen;
  EpisodeDataset eval_unseen;
  // True class centers per split, keyed by class label.
  std::map<std::string, std::vector<double>> train_centers;
  std::map<std::string, std::vector<double>> unseen_centers;
};

SyntheticSplits generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace metaspoof
