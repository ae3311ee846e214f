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

#include "metaspoof/protonet.hpp"

#include <stdexcept>

#include "metaspoof/optim.hpp"
#include "metaspoof/seeding.hpp"

namespace metaspoof {

PrototypeSet compute_prototypes(const Tensor& embeddings, std::span<const std::size_t> labels,
                                std::vector<std::string> class_labels) {
  Graph g;
  const Var protos = class_mean(g.input(embeddings), labels, class_labels.size());
  return PrototypeSet{protos.value(), std::move(class_labels)};
}

Var proto_log_probs(Var query_embeddings, Var prototypes) {
  return log_softmax(scale(sq_euclidean(query_embeddings, prototypes), -1.0));
}

Tensor proto_log_probs(const Tensor& query_embeddings, const PrototypeSet& prototypes) {
  Graph g;
  return proto_log_probs(g.input(query_embeddings), g.input(prototypes.vectors)).value();
}

double argmax_accuracy(const Tensor& log_probs, std::span<const std::size_t> labels) {
  const std::size_t m = log_probs.rows(), n = log_probs.cols();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (log_probs.at(i, j) > log_probs.at(i, best)) best = j;
    }
    if (best == labels[i]) ++correct;
  }
  return m == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(m);
}

EpisodeOutcome protonet_episode(Graph& graph, std::span<const Var> params, const Task& task) {
  const Var support = embed(graph, params, graph.input(task.support.features));
  const Var protos = class_mean(support, task.support.labels, task.n_way());
  const Var query = embed(graph, params, graph.input(task.query.features));
  const Var lp = proto_log_probs(query, protos);
  EpisodeOutcome out;
  out.loss = nll_loss(lp, task.query.labels);
  out.loss_value = out.loss.value()[0];
  out.accuracy = argmax_accuracy(lp.value(), task.query.labels);
  return out;
}

EpisodeMetrics episode_loss(const ParameterSet& params, const Task& task) {
  Graph g;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(g.input(params[i]));
  const auto out = protonet_episode(g, vars, task);
  return {out.loss_value, out.accuracy};
}

namespace {

double bank_accuracy(const ParameterSet& params, const std::vector<Task>& bank, std::size_t threads) {
  std::vector<double> acc(bank.size());
  parallel_for(bank.size(), threads, [&](std::size_t i) { acc[i] = episode_loss(params, bank[i]).accuracy; });
  double total = 0.0;
  for (double a : acc) total += a;
  return total / static_cast<double>(acc.size());
}

}  // namespace

TrainResult train_protonet(const EpisodeDataset& train, const EpisodeDataset& val, const ProtoTrainConfig& config) {
  config.validate();
  if (train.dim() != val.dim()) throw std::invalid_argument("train and validation datasets differ in dim");

  ParameterSet params = init_xavier(backbone_for(config, train.dim()));
  AdamW optimizer(config.optimizer);
  CyclicLrConfig schedule = config.lr;
  schedule.step_size = config.lr_step_epochs * config.episodes_per_epoch;

  const auto bank = validation_bank(val, config);
  Rng rng(derive_seed(config.seed, Stream::kTraining));

  TrainResult result;
  result.best_val = -1.0;
  std::size_t iteration = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    TrainLogRow row;
    row.epoch = epoch;
    row.lr = cyclic_lr(iteration, schedule);
    double loss_sum = 0.0;
    for (std::size_t e = 0; e < config.episodes_per_epoch; ++e, ++iteration) {
      const Task task = sample_task(train, config.task, rng);
      params.zero_grads();
      Graph g;
      const auto vars = bind(g, params);
      const auto out = protonet_episode(g, vars, task);
      g.backward(out.loss);
      optimizer.step(params, cyclic_lr(iteration, schedule));
      loss_sum += out.loss_value;
    }
    row.mean_loss = loss_sum / static_cast<double>(config.episodes_per_epoch);
    row.val_metric = bank_accuracy(params, bank, config.threads);
    if (row.val_metric > result.best_val) {
      result.best_val = row.val_metric;
      result.best_epoch = epoch;
      result.params = clone_params(params);
    }
    result.log.push_back(row);
  }
  return result;
}

std::vector<double> protonet_score(const ParameterSet& params, const Task& support, const Tensor& query_features) {
  if (support.n_way() != 2) throw std::invalid_argument("protonet_score needs a 2-way support set");
  bool seen[2] = {false, false};
  for (std::size_t l : support.support.labels) {
    if (l < 2) seen[l] = true;
  }
  if (!seen[kBonafideIndex] || !seen[kSpoofIndex]) {
    throw std::invalid_argument("protonet_score: support set is missing a class");
  }
  const auto protos = compute_prototypes(embed(params, support.support.features), support.support.labels,
                                         support.class_labels);
  Graph g;
  const Var neg_dist = scale(sq_euclidean(g.input(embed(params, query_features)), g.input(protos.vectors)), -1.0);
  const Tensor& logits = neg_dist.value();
  std::vector<double> scores(logits.rows());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = logits.at(i, kBonafideIndex) - logits.at(i, kSpoofIndex);
  }
  return scores;
}

}  // namespace metaspoof
