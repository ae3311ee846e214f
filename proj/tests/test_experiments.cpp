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

#include <set>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "metaspoof/experiments.hpp"
#include "metaspoof/protonet.hpp"

using namespace metaspoof;

namespace {

const SyntheticSplits& data() {
  static const SyntheticSplits s = [] {
    SyntheticConfig sc;
    sc.dim = 16;
    sc.per_class = 30;
    return generate_synthetic(sc, 13);
  }();
  return s;
}

ParameterSet backbone(std::uint64_t seed, std::size_t out = 8) {
  BackboneConfig c;
  c.input_dim = 16;
  c.hidden_dims = {24};
  c.output_dim = out;
  c.seed = seed;
  return init_xavier(c);
}

SweepConfig small_sweep(Method m) {
  SweepConfig c;
  c.shots = {2, 4, 8};
  c.repeats = 3;
  c.adapt_steps = 2;
  c.method = m;
  c.seed = 5;
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("method names") {
  for (Method m : {Method::kProtoNet, Method::kProtoMaml, Method::kBaseline}) CHECK(parse_method(method_name(m)) == m);
  CHECK_THROWS_AS(parse_method("maml"), std::invalid_argument);
}

TEST_CASE("shot sweep rows, determinism and seeds") {
  const ParameterSet p = backbone(1);
  const auto cfg = small_sweep(Method::kProtoNet);
  const auto a = run_shot_sweep(p, data().eval_unseen, cfg);
  CHECK(a.key_name == "k");
  CHECK(a.rows.size() == 9);
  CHECK(a.summary.size() == 3);
  for (const auto& row : a.rows) {
    CHECK(row.eer >= 0.0);
    CHECK(row.eer <= 1.0);
    CHECK(row.support_seed == support_seed(cfg.seed, row.key, row.repeat));
  }
  std::set<std::uint64_t> seeds;
  for (const auto& row : a.rows) seeds.insert(row.support_seed);
  CHECK(seeds.size() == 9);

  auto threaded = cfg;
  threaded.threads = 3;
  const auto b = run_shot_sweep(p, data().eval_unseen, threaded);
  CHECK(a.rows == b.rows);
  CHECK(a.summary == b.summary);

  // Adding a shot value leaves the existing jobs untouched.
  auto wider = cfg;
  wider.shots = {2, 3, 4, 8};
  const auto c = run_shot_sweep(p, data().eval_unseen, wider);
  CHECK(c.summary_for(4) == a.summary_for(4));
  CHECK(c.summary_for(8) == a.summary_for(8));
  CHECK_THROWS_AS(a.summary_for(3), std::out_of_range);

  const std::string detail = sweep_detail_csv(a);
  CHECK(detail.rfind("k,repeat,eer,support_seed\n", 0) == 0);
  CHECK(std::count(detail.begin(), detail.end(), '\n') == 10);
  CHECK(sweep_summary_csv(a).rfind("k,mean_eer,std_eer\n2,", 0) == 0);
}

TEST_CASE("shot sweep validation") {
  const ParameterSet p = backbone(2);
  auto cfg = small_sweep(Method::kProtoNet);
  cfg.shots = {2, 30};  // unseen split has 30 bonafide; no query remainder for them
  CHECK_THROWS_AS(run_shot_sweep(p, data().eval_unseen, cfg), DatasetError);
  cfg.shots = {4, 2};
  CHECK_THROWS_AS(run_shot_sweep(p, data().eval_unseen, cfg), std::invalid_argument);

  auto pm = small_sweep(Method::kProtoMaml);
  pm.shots = {2, 96, 256};
  CHECK(pm.effective_shots() == std::vector<std::size_t>{2, 96});
  pm.shots = {256};
  CHECK_THROWS_AS(pm.validate(), std::invalid_argument);
}

TEST_CASE("steps sweep") {
  const ParameterSet p = backbone(3);
  StepsSweepConfig cfg;
  cfg.k = 4;
  cfg.steps = {0, 3, 3};
  cfg.repeats = 2;
  cfg.seed = 7;
  cfg.threads = 1;
  const auto r = run_steps_sweep(p, data().eval_seen, cfg);
  CHECK(r.key_name == "steps");
  CHECK(r.rows.size() == 6);
  // Duplicate step values give identical results on shared supports.
  CHECK(r.rows[2].eer == r.rows[4].eer);
  CHECK(r.rows[3].eer == r.rows[5].eer);
  CHECK(r.rows[0].support_seed == r.rows[2].support_seed);

  // Zero steps reproduce a ProtoNet shot sweep with the same supports.
  auto proto = small_sweep(Method::kProtoNet);
  proto.shots = {4};
  proto.repeats = 2;
  proto.seed = 7;
  const auto pn = run_shot_sweep(p, data().eval_seen, proto);
  for (std::size_t i = 0; i < 2; ++i) CHECK(r.rows[i].eer == doctest::Approx(pn.rows[i].eer).epsilon(1e-12));

  cfg.method = Method::kProtoNet;
  CHECK_THROWS_AS(run_steps_sweep(p, data().eval_seen, cfg), std::invalid_argument);
  cfg.method = Method::kProtoMaml;
  cfg.k = 31;
  CHECK_THROWS_AS(run_steps_sweep(p, data().eval_seen, cfg), DatasetError);
}

TEST_CASE("supervised baseline patience") {
  BaselineConfig cfg;
  cfg.max_epochs = 50;
  cfg.patience = 3;
  cfg.hidden_dims = {8};
  // Too small to move any weight, so validation never improves after epoch 1.
  cfg.lr = 1e-200;
  const auto r = train_supervised_baseline(data().train, data().eval_seen, cfg);
  CHECK(r.best_epoch == 1);
  CHECK(r.log.size() == 5);
  for (const auto& row : r.log) CHECK(row.val_metric == r.log[0].val_metric);

  cfg.lr = 1e-3;
  cfg.max_epochs = 4;
  const auto a = train_supervised_baseline(data().train, data().eval_seen, cfg);
  const auto b = train_supervised_baseline(data().train, data().eval_seen, cfg);
  CHECK(a.log == b.log);
  CHECK(a.log.back().mean_loss < a.log.front().mean_loss);
  CHECK(a.params.config().output_dim == 2);

  const auto scores = baseline_score(a.params, data().eval_seen.features(std::vector<std::size_t>{0, 1}));
  CHECK(scores.size() == 2);
  CHECK_THROWS_AS(baseline_score(backbone(1), data().eval_seen.features(std::vector<std::size_t>{0})),
                  std::invalid_argument);
}

TEST_CASE("comparison table") {
  BaselineConfig bcfg;
  bcfg.max_epochs = 1;
  bcfg.hidden_dims = {8};
  const auto base = train_supervised_baseline(data().train, data().eval_seen, bcfg).params;
  const ParameterSet pn = backbone(4), pm = backbone(5);
  CompareConfig cfg;
  cfg.protonet_shots = 8;
  cfg.protomaml_shots = 4;
  cfg.repeats = 2;
  cfg.adapt_steps = 1;
  cfg.threads = 1;
  const auto rows =
      compare_methods(base, pn, pm, {{"seen", &data().eval_seen}, {"unseen", &data().eval_unseen}}, cfg);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].model == "baseline");
  CHECK(rows[0].shots == 0);
  CHECK(rows[0].trainable_params == base.parameter_count());
  CHECK(rows[3].eval_set == "unseen");
  CHECK(rows[4].model == "protomaml");
  CHECK(rows[4].shots == 4);
  CHECK(rows[2].trainable_params == pn.parameter_count());
  CHECK(compare_methods(base, pn, pm, {{"seen", &data().eval_seen}, {"unseen", &data().eval_unseen}}, cfg) == rows);

  const std::string csv = comparison_csv(rows);
  CHECK(csv.rfind("model,trainable_params,shots,eval_set,mean_eer,std_eer\n", 0) == 0);
  const std::string table = comparison_table(rows);
  CHECK(table.find("trainable params") != std::string::npos);
  CHECK(table.find("0-shot") != std::string::npos);

  const ParameterSet wrong_dim = [] {
    BackboneConfig c;
    c.input_dim = 15;
    c.hidden_dims = {};
    c.output_dim = 8;
    return init_xavier(c);
  }();
  CHECK_THROWS_AS(compare_methods(base, wrong_dim, pm, {{"seen", &data().eval_seen}}, cfg), std::invalid_argument);
}
