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

#include "metaspoof/experiments.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "metaspoof/protomaml.hpp"
#include "metaspoof/protonet.hpp"
#include "metaspoof/seeding.hpp"

namespace metaspoof {

std::string_view method_name(Method method) {
  switch (method) {
    case Method::kProtoNet: return "protonet";
    case Method::kProtoMaml: return "protomaml";
    case Method::kBaseline: return "baseline";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  if (text == "protonet") return Method::kProtoNet;
  if (text == "protomaml") return Method::kProtoMaml;
  if (text == "baseline") return Method::kBaseline;
  throw std::invalid_argument("unknown method '" + std::string(text) + "' (expected protonet, protomaml or baseline)");
}

std::uint64_t support_seed(std::uint64_t master, std::size_t k, std::size_t repeat) {
  return derive_seed(master, {static_cast<std::uint64_t>(Stream::kSupport), k, repeat});
}

AdaptationOutcome adapt_and_evaluate(const ParameterSet& params, const EpisodeDataset& eval, Method method,
                                     std::size_t k, std::size_t steps, double inner_lr, std::uint64_t seed) {
  Rng rng(seed);
  const Task task = sample_binary_support(eval, k, rng);
  std::vector<double> scores;
  switch (method) {
    case Method::kProtoNet:
      scores = protonet_score(params, task, task.query.features);
      break;
    case Method::kProtoMaml:
      scores = protomaml_adapt_and_score(params, task, steps, inner_lr, task.query.features);
      break;
    case Method::kBaseline:
      scores = baseline_score(params, task.query.features);
      break;
  }
  AdaptationOutcome out;
  out.trials = make_trials(task.query, scores);
  out.eer = compute_eer(out.trials);
  out.support_seed = seed;
  return out;
}

namespace {

void check_support_capacity(const EpisodeDataset& eval, std::size_t max_k) {
  const std::size_t bona = eval.count(BinaryLabel::kBonafide);
  const std::size_t spoof = eval.count(BinaryLabel::kSpoof);
  // EER needs both classes among the query remainder.
  if (bona <= max_k || spoof <= max_k) {
    throw DatasetError("eval set has " + std::to_string(bona) + " bonafide and " + std::to_string(spoof) +
                       " spoof records; k=" + std::to_string(max_k) + " needs more than k of each");
  }
}

void summarize(SweepResult& result, const std::vector<std::size_t>& keys, std::size_t repeats) {
  for (std::size_t ki = 0; ki < keys.size(); ++ki) {
    std::vector<double> eers;
    for (std::size_t r = 0; r < repeats; ++r) eers.push_back(result.rows[ki * repeats + r].eer);
    const auto s = summarize_repeats(eers);
    result.summary.push_back({keys[ki], s.mean, s.std});
  }
}

}  // namespace

void SweepConfig::validate() const {
  if (shots.empty()) throw std::invalid_argument("sweep needs at least one shot value");
  if (!std::is_sorted(shots.begin(), shots.end())) throw std::invalid_argument("shot values must be sorted ascending");
  if (shots.front() < 1) throw std::invalid_argument("shot values must be >= 1");
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  if (effective_shots().empty()) {
    throw std::invalid_argument("no shot value within the ProtoMAML cap of " + std::to_string(protomaml_max_shots));
  }
}

std::vector<std::size_t> SweepConfig::effective_shots() const {
  if (method != Method::kProtoMaml) return shots;
  std::vector<std::size_t> out;
  for (std::size_t k : shots) {
    if (k <= protomaml_max_shots) out.push_back(k);
  }
  return out;
}

const SweepSummaryRow& SweepResult::summary_for(std::size_t key) const {
  for (const auto& row : summary) {
    if (row.key == key) return row;
  }
  throw std::out_of_range("no summary row for " + key_name + "=" + std::to_string(key));
}

SweepResult run_shot_sweep(const ParameterSet& params, const EpisodeDataset& eval, const SweepConfig& config) {
  config.validate();
  const auto shots = config.effective_shots();
  check_support_capacity(eval, shots.back());

  SweepResult result;
  result.key_name = "k";
  result.rows.resize(shots.size() * config.repeats);
  parallel_for(result.rows.size(), config.threads, [&](std::size_t job) {
    const std::size_t k = shots[job / config.repeats];
    const std::size_t r = job % config.repeats;
    const auto seed = support_seed(config.seed, k, r);
    const auto out = adapt_and_evaluate(params, eval, config.method, k, config.adapt_steps, config.inner_lr, seed);
    result.rows[job] = {k, r, out.eer.eer, seed};
  });
  summarize(result, shots, config.repeats);
  return result;
}

void StepsSweepConfig::validate() const {
  if (method != Method::kProtoMaml) {
    throw std::invalid_argument("adaptation-step sweeps only apply to protomaml; " + std::string(method_name(method)) +
                                " has no inner loop");
  }
  if (steps.empty()) throw std::invalid_argument("steps sweep needs at least one step value");
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
}

SweepResult run_steps_sweep(const ParameterSet& params, const EpisodeDataset& eval, const StepsSweepConfig& config) {
  config.validate();
  check_support_capacity(eval, config.k);

  SweepResult result;
  result.key_name = "steps";
  result.rows.resize(config.steps.size() * config.repeats);
  parallel_for(result.rows.size(), config.threads, [&](std::size_t job) {
    const std::size_t steps = config.steps[job / config.repeats];
    const std::size_t r = job % config.repeats;
    // Same supports for every step count, so curves compare like for like.
    const auto seed = support_seed(config.seed, config.k, r);
    const auto out = adapt_and_evaluate(params, eval, Method::kProtoMaml, config.k, steps, config.inner_lr, seed);
    result.rows[job] = {steps, r, out.eer.eer, seed};
  });
  summarize(result, config.steps, config.repeats);
  return result;
}

std::string sweep_detail_csv(const SweepResult& result) {
  std::string out = result.key_name + ",repeat,eer,support_seed\n";
  for (const auto& row : result.rows) {
    out += std::to_string(row.key) + ',' + std::to_string(row.repeat) + ',' + format_double(row.eer) + ',' +
           std::to_string(row.support_seed) + '\n';
  }
  return out;
}

std::string sweep_summary_csv(const SweepResult& result) {
  std::string out = result.key_name + ",mean_eer,std_eer\n";
  for (const auto& row : result.summary) {
    out += std::to_string(row.key) + ',' + format_double(row.mean_eer) + ',' + format_double(row.std_eer) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Baseline

void BaselineConfig::validate() const {
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("baseline lr must be positive");
}

std::vector<double> baseline_score(const ParameterSet& params, const Tensor& features) {
  if (params.config().output_dim != 2) throw std::invalid_argument("baseline model must have 2 outputs");
  const Tensor logits = embed(params, features);
  std::vector<double> scores(logits.rows());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = logits.at(i, 0) - logits.at(i, 1);
  return scores;
}

namespace {

double dataset_eer(const ParameterSet& params, const EpisodeDataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto scores = baseline_score(params, ds.features(rows));
  std::vector<ScoredTrial> trials;
  trials.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) trials.push_back({ds[i].id, scores[i], ds[i].binary_label});
  return compute_eer(trials).eer;
}

}  // namespace

TrainResult train_supervised_baseline(const EpisodeDataset& train, const EpisodeDataset& val,
                                      const BaselineConfig& config) {
  config.validate();
  if (train.dim() != val.dim()) throw std::invalid_argument("train and validation datasets differ in dim");
  if (train.count(BinaryLabel::kBonafide) == 0 || train.count(BinaryLabel::kSpoof) == 0) {
    throw std::invalid_argument("baseline training needs both bonafide and spoof records");
  }

  BackboneConfig bc;
  bc.input_dim = train.dim();
  bc.hidden_dims = config.hidden_dims;
  bc.output_dim = 2;
  bc.seed = derive_seed(config.seed, Stream::kInit);
  ParameterSet params = init_xavier(bc);
  AdamW optimizer(config.optimizer);
  Rng rng(derive_seed(config.seed, Stream::kTraining));

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::size_t> targets(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    targets[i] = train[i].binary_label == BinaryLabel::kBonafide ? kBonafideIndex : kSpoofIndex;
  }

  TrainResult result;
  result.best_val = 2.0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> rows(order.data() + start, end - start);
      std::vector<std::size_t> batch_targets;
      for (std::size_t r : rows) batch_targets.push_back(targets[r]);
      params.zero_grads();
      Graph g;
      const auto vars = bind(g, params);
      const Var loss = nll_loss(log_softmax(embed(g, vars, g.input(train.features(rows)))), batch_targets);
      g.backward(loss);
      optimizer.step(params, config.lr);
      loss_sum += loss.value()[0];
      ++batches;
    }
    TrainLogRow row{epoch, loss_sum / static_cast<double>(batches), dataset_eer(params, val), config.lr};
    result.log.push_back(row);
    if (row.val_metric < result.best_val) {
      result.best_val = row.val_metric;
      result.best_epoch = epoch;
      result.params = clone_params(params);
    }
    if (epoch - result.best_epoch > config.patience) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Comparison

std::vector<ComparisonRow> compare_methods(const ParameterSet& baseline, const ParameterSet& protonet,
                                           const ParameterSet& protomaml, const std::vector<NamedDataset>& eval_sets,
                                           const CompareConfig& config) {
  const std::size_t dim = baseline.config().input_dim;
  if (protonet.config().input_dim != dim || protomaml.config().input_dim != dim) {
    throw std::invalid_argument("compared models must share the input dim");
  }
  struct Entry {
    std::string name;
    const ParameterSet* params;
    Method method;
    std::size_t shots;
  };
  const std::vector<Entry> models = {
      {"baseline", &baseline, Method::kBaseline, 0},
      {"protonet", &protonet, Method::kProtoNet, config.protonet_shots},
      {"protomaml", &protomaml, Method::kProtoMaml, config.protomaml_shots},
  };

  std::vector<ComparisonRow> rows;
  for (const auto& m : models) {
    for (const auto& ev : eval_sets) {
      if (ev.dataset->dim() != dim) throw std::invalid_argument("eval set '" + ev.name + "' has a different dim");
      // The baseline's query remainders match the ProtoMAML evaluation.
      const std::size_t k = m.method == Method::kBaseline ? config.protomaml_shots : m.shots;
      check_support_capacity(*ev.dataset, k);
      std::vector<double> eers(config.repeats);
      parallel_for(config.repeats, config.threads, [&](std::size_t r) {
        eers[r] = adapt_and_evaluate(*m.params, *ev.dataset, m.method, k, config.adapt_steps, config.inner_lr,
                                     support_seed(config.seed, k, r))
                      .eer.eer;
      });
      const auto s = summarize_repeats(eers);
      rows.push_back({m.name, m.params->parameter_count(), m.shots, ev.name, s.mean, s.std});
    }
  }
  return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "model,trainable_params,shots,eval_set,mean_eer,std_eer\n";
  for (const auto& r : rows) {
    out += r.model + ',' + std::to_string(r.trainable_params) + ',' + std::to_string(r.shots) + ',' + r.eval_set +
           ',' + format_double(r.mean_eer) + ',' + format_double(r.std_eer) + '\n';
  }
  return out;
}

std::string comparison_table(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "model" << std::right << std::setw(18) << "trainable params" << std::setw(8)
     << "shots" << "  " << std::left << std::setw(14) << "eval set" << std::right << std::setw(10) << "EER (%)"
     << std::setw(10) << "std" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(12) << r.model << std::right << std::setw(18) << r.trainable_params << std::setw(8)
       << (r.shots == 0 ? std::string("0-shot") : std::to_string(r.shots)) << "  " << std::left << std::setw(14)
       << r.eval_set << std::right << std::fixed << std::setprecision(2) << std::setw(10) << 100.0 * r.mean_eer
       << std::setw(10) << 100.0 * r.std_eer << '\n';
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

}  // namespace metaspoof
