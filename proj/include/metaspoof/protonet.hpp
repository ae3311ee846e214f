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
#include <span>
#include <string>
#include <vector>

#include "metaspoof/backbone.hpp"
#include "metaspoof/episodic.hpp"
#include "metaspoof/tensor.hpp"
#include "metaspoof/training.hpp"

namespace metaspoof {

struct PrototypeSet {
  Tensor vectors;  // [n_classes x embedding_dim]
  std::vector<std::string> class_labels;

  std::size_t size() const { return vectors.rows(); }
};

// Per-class mean of the embeddings. Throws when a class has no rows.
PrototypeSet compute_prototypes(const Tensor& embeddings, std::span<const std::size_t> labels,
                                std::vector<std::string> class_labels);

// log softmax over negative squared distances to each prototype.
Var proto_log_probs(Var query_embeddings, Var prototypes);
Tensor proto_log_probs(const Tensor& query_embeddings, const PrototypeSet& prototypes);

struct EpisodeOutcome {
  Var loss;
  double loss_value = 0.0;
  double accuracy = 0.0;
};

// Prototypes from the support set only; NLL over the query set.
EpisodeOutcome protonet_episode(Graph& graph, std::span<const Var> params, const Task& task);

struct EpisodeMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

EpisodeMetrics episode_loss(const ParameterSet& params, const Task& task);

// Fraction of rows whose argmax equals the label.
double argmax_accuracy(const Tensor& log_probs, std::span<const std::size_t> labels);

using ProtoTrainConfig = EpisodicTrainConfig;

/// One optimizer step per sampled episode; picks the epoch with the best mean
/// query accuracy on the validation bank (earliest on ties).
TrainResult train_protonet(const EpisodeDataset& train, const EpisodeDataset& val, const ProtoTrainConfig& config);

// log p(bonafide | x) - log p(spoof | x) with prototypes from a binary support.
std::vector<double> protonet_score(const ParameterSet& params, const Task& support, const Tensor& query_features);

}  // namespace metaspoof
