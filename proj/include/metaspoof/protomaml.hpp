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
#include <vector>

#include "metaspoof/backbone.hpp"
#include "metaspoof/episodic.hpp"
#include "metaspoof/optim.hpp"
#include "metaspoof/protonet.hpp"
#include "metaspoof/training.hpp"

namespace metaspoof {

// Linear classifier on top of the embedding: logits = f W^T + b.
struct LinearHead {
  Tensor weight;  // [n_classes x embedding_dim]
  Tensor bias;    // [n_classes]

  std::size_t n_classes() const { return weight.rows(); }
};

// weight row i = 2 v_i, bias i = -||v_i||^2. Softmax over these logits equals
// the distance softmax, since -||f||^2 is shared by every class.
LinearHead init_head_from_prototypes(const PrototypeSet& prototypes);

// Differentiable form of the same construction.
struct HeadVars {
  Var weight;
  Var bias;
};
HeadVars head_from_prototypes(Var prototypes);

Var head_logits(Var embeddings, const HeadVars& head);
Var head_log_probs(Graph& graph, std::span<const Var> params, const HeadVars& head, Var batch);
Tensor head_log_probs(const ParameterSet& params, const LinearHead& head, const Tensor& batch);

struct AdaptedModel {
  ParameterSet params;
  LinearHead head;
  // Support loss before each update, plus the loss after the last one.
  std::vector<double> support_loss_trace;
};

/// Clones params, builds the head from support prototypes, then runs `steps`
/// full-batch SGD updates of backbone and head on the support NLL.
AdaptedModel inner_adapt(const ParameterSet& params, const Task& support, std::size_t steps, double inner_lr);

struct ProtoMamlConfig {
  double inner_lr = 0.1;
  std::size_t train_inner_steps = 1;
  std::size_t adapt_inner_steps = 25;
  std::size_t tasks_per_update = 4;
  // Epochs, schedule, optimizer and validation bank; episodes_per_epoch counts
  // tasks, so each epoch makes episodes_per_epoch / tasks_per_update updates.
  EpisodicTrainConfig outer{};

  void validate() const;
  std::size_t updates_per_epoch() const;
};

struct MetaGradient {
  // Mean over tasks of each parameter's first-order gradient.
  std::vector<std::vector<double>> grads;
  double mean_query_loss = 0.0;
};

/// First-order meta-gradient: the query loss gradient at the adapted weights
/// stands in for the gradient at the initial weights. With zero inner steps
/// the gradient also flows through the prototype-initialized head.
MetaGradient meta_gradient(const ParameterSet& params, std::span<const Task> tasks, const ProtoMamlConfig& config);

// meta_gradient followed by one optimizer step. Returns the mean query loss.
double outer_step(ParameterSet& params, std::span<const Task> tasks, const ProtoMamlConfig& config, AdamW& optimizer,
                  double lr);

// Query accuracy after train_inner_steps of adaptation on the task support.
double adapted_accuracy(const ParameterSet& params, const Task& task, const ProtoMamlConfig& config);

TrainResult train_protomaml(const EpisodeDataset& train, const EpisodeDataset& val, const ProtoMamlConfig& config);

// Adapts a private copy on the binary support, then scores the query rows as
// log p(bonafide | x) - log p(spoof | x).
std::vector<double> protomaml_adapt_and_score(const ParameterSet& params, const Task& support, std::size_t steps,
                                              double inner_lr, const Tensor& query_features);

}  // namespace metaspoof
