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

#include "metaspoof/protomaml.hpp"

#include <stdexcept>

#include "metaspoof/kernels.hpp"
#include "metaspoof/seeding.hpp"

namespace metaspoof {

LinearHead init_head_from_prototypes(const PrototypeSet& prototypes) {
  Graph g;
  const HeadVars h = head_from_prototypes(g.input(prototypes.vectors));
  LinearHead head{h.weight.value(), h.bias.value()};
  head.weight.set_requires_grad(true);
  head.bias.set_requires_grad(true);
  return head;
}

HeadVars head_from_prototypes(Var prototypes) {
  return HeadVars{scale(prototypes, 2.0), scale(row_sq_norm(prototypes), -1.0)};
}

Var head_logits(Var embeddings, const HeadVars& head) {
  return add_row_vector(matmul(embeddings, transpose(head.weight)), head.bias);
}

Var head_log_probs(Graph& graph, std::span<const Var> params, const HeadVars& head, Var batch) {
  return log_softmax(head_logits(embed(graph, params, batch), head));
}

Tensor head_log_probs(const ParameterSet& params, const LinearHead& head, const Tensor& batch) {
  Graph g;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(g.input(params[i]));
  return head_log_probs(g, vars, {g.input(head.weight), g.input(head.bias)}, g.input(batch)).value();
}

namespace {

double support_step(ParameterSet& params, LinearHead& head, const TaskSet& support, double inner_lr, bool update) {
  params.zero_grads();
  head.weight.zero_grad();
  head.bias.zero_grad();
  Graph g;
  const auto vars = bind(g, params);
  const HeadVars hv{g.parameter(head.weight), g.parameter(head.bias)};
  const Var loss = nll_loss(head_log_probs(g, vars, hv, g.input(support.features)), support.labels);
  const double value = loss.value()[0];
  if (update) {
    g.backward(loss);
    params.sgd_step(inner_lr);
    const auto& k = kernels::active();
    k.axpy(head.weight.numel(), -inner_lr, head.weight.grad().data(), head.weight.data());
    k.axpy(head.bias.numel(), -inner_lr, head.bias.grad().data(), head.bias.data());
  }
  return value;
}

}  // namespace

AdaptedModel inner_adapt(const ParameterSet& params, const Task& support, std::size_t steps, double inner_lr) {
  AdaptedModel out{clone_params(params), {}, {}};
  out.params.set_requires_grad(true);
  const auto protos = compute_prototypes(embed(out.params, support.support.features), support.support.labels,
                                         support.class_labels);
  out.head = init_head_from_prototypes(protos);
  out.support_loss_trace.reserve(steps + 1);
  for (std::size_t s = 0; s < steps; ++s) {
    out.support_loss_trace.push_back(support_step(out.params, out.head, support.support, inner_lr, true));
  }
  out.support_loss_trace.push_back(support_step(out.params, out.head, support.support, inner_lr, false));
  for (Tensor* t : out.params.pointers()) t->clear_grad();
  out.head.weight.clear_grad();
  out.head.bias.clear_grad();
  return out;
}

void ProtoMamlConfig::validate() const {
  outer.validate();
  if (!(inner_lr >= 0.0)) throw std::invalid_argument("inner_lr must be non-negative");
  if (tasks_per_update < 1) throw std::invalid_argument("tasks_per_update must be >= 1");
}

std::size_t ProtoMamlConfig::updates_per_epoch() const {
  return std::max<std::size_t>(1, outer.episodes_per_epoch / tasks_per_update);
}

MetaGradient meta_gradient(const ParameterSet& params, std::span<const Task> tasks, const ProtoMamlConfig& config) {
  if (tasks.empty()) throw std::invalid_argument("meta_gradient needs at least one task");
  MetaGradient out;
  for (std::size_t i = 0; i < params.size(); ++i) out.grads.emplace_back(params[i].numel(), 0.0);
  const double w = 1.0 / static_cast<double>(tasks.size());
  const auto& k = kernels::active();
  double loss_sum = 0.0;
  for (const Task& task : tasks) {
    ParameterSet work;
    Graph g;
    Var loss;
    if (config.train_inner_steps == 0) {
      work = clone_params(params);
      work.set_requires_grad(true);
      const auto vars = bind(g, work);
      const Var support = embed(g, vars, g.input(task.support.features));
      const HeadVars head = head_from_prototypes(class_mean(support, task.support.labels, task.n_way()));
      loss = nll_loss(head_log_probs(g, vars, head, g.input(task.query.features)), task.query.labels);
    } else {
      AdaptedModel adapted = inner_adapt(params, task, config.train_inner_steps, config.inner_lr);
      work = std::move(adapted.params);
      const auto vars = bind(g, work);
      const HeadVars head{g.input(adapted.head.weight), g.input(adapted.head.bias)};
      loss = nll_loss(head_log_probs(g, vars, head, g.input(task.query.features)), task.query.labels);
    }
    g.backward(loss);
    loss_sum += loss.value()[0];
    for (std::size_t i = 0; i < work.size(); ++i) {
      const auto grad = work[i].grad();
      if (!grad.empty()) k.axpy(grad.size(), w, grad.data(), out.grads[i].data());
    }
  }
  out.mean_query_loss = loss_sum * w;
  return out;
}

double outer_step(ParameterSet& params, std::span<const Task> tasks, const ProtoMamlConfig& config, AdamW& optimizer,
                  double lr) {
  MetaGradient mg = meta_gradient(params, tasks, config);
  params.zero_grads();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].accumulate_grad(mg.grads[i]);
  optimizer.step(params, lr);
  return mg.mean_query_loss;
}

double adapted_accuracy(const ParameterSet& params, const Task& task, const ProtoMamlConfig& config) {
  const AdaptedModel adapted = inner_adapt(params, task, config.train_inner_steps, config.inner_lr);
  return argmax_accuracy(head_log_probs(adapted.params, adapted.head, task.query.features), task.query.labels);
}

TrainResult train_protomaml(const EpisodeDataset& train, const EpisodeDataset& val, const ProtoMamlConfig& config) {
  config.validate();
  if (train.dim() != val.dim()) throw std::invalid_argument("train and validation datasets differ in dim");

  const EpisodicTrainConfig& outer = config.outer;
  ParameterSet params = init_xavier(backbone_for(outer, train.dim()));
  AdamW optimizer(outer.optimizer);
  const std::size_t updates = config.updates_per_epoch();
  CyclicLrConfig schedule = outer.lr;
  schedule.step_size = outer.lr_step_epochs * updates;

  const auto bank = validation_bank(val, outer);
  Rng rng(derive_seed(outer.seed, Stream::kTraining));

  TrainResult result;
  result.best_val = -1.0;
  std::size_t iteration = 0;
  std::vector<Task> batch;
  for (std::size_t epoch = 1; epoch <= outer.epochs; ++epoch) {
    TrainLogRow row;
    row.epoch = epoch;
    row.lr = cyclic_lr(iteration, schedule);
    double loss_sum = 0.0;
    for (std::size_t u = 0; u < updates; ++u, ++iteration) {
      batch.clear();
      for (std::size_t t = 0; t < config.tasks_per_update; ++t) batch.push_back(sample_task(train, outer.task, rng));
      loss_sum += outer_step(params, batch, config, optimizer, cyclic_lr(iteration, schedule));
    }
    row.mean_loss = loss_sum / static_cast<double>(updates);

    std::vector<double> acc(bank.size());
    parallel_for(bank.size(), outer.threads, [&](std::size_t i) { acc[i] = adapted_accuracy(params, bank[i], config); });
    double total = 0.0;
    for (double a : acc) total += a;
    row.val_metric = total / static_cast<double>(acc.size());

    if (row.val_metric > result.best_val) {
      result.best_val = row.val_metric;
      result.best_epoch = epoch;
      result.params = clone_params(params);
    }
    result.log.push_back(row);
  }
  return result;
}

std::vector<double> protomaml_adapt_and_score(const ParameterSet& params, const Task& support, std::size_t steps,
                                              double inner_lr, const Tensor& query_features) {
  if (support.n_way() != 2) throw std::invalid_argument("protomaml_adapt_and_score needs a 2-way support set");
  const AdaptedModel adapted = inner_adapt(params, support, steps, inner_lr);
  Graph g;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < adapted.params.size(); ++i) vars.push_back(g.input(adapted.params[i]));
  const Var logits = head_logits(embed(g, vars, g.input(query_features)),
                                 {g.input(adapted.head.weight), g.input(adapted.head.bias)});
  const Tensor& lv = logits.value();
  std::vector<double> scores(lv.rows());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = lv.at(i, kBonafideIndex) - lv.at(i, kSpoofIndex);
  return scores;
}

}  // namespace metaspoof
