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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "metaspoof/episodic.hpp"

using namespace metaspoof;

namespace {

SyntheticConfig small_synth() {
  SyntheticConfig c;
  c.dim = 16;
  c.per_class = 40;
  return c;
}

LabeledEmbedding rec(std::string id, std::string cls, std::vector<double> f) {
  const BinaryLabel b = cls == kBonafideClass ? BinaryLabel::kBonafide : BinaryLabel::kSpoof;
  return {std::move(id), std::move(f), std::move(cls), b};
}

std::string error_of(std::string_view csv) {
  try {
    dataset_from_csv(csv);
  } catch (const DatasetError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("csv loading") {
  const EpisodeDataset ds = dataset_from_csv(
      "id,attack_class,binary_label,f0,f1\n"
      "a,bonafide,bonafide,0.5,-1\n"
      "b,S01,spoof,2,3e-2\n");
  REQUIRE(ds.size() == 2);
  CHECK(ds.dim() == 2);
  CHECK(ds[1].features[1] == 0.03);
  CHECK(ds.classes() == std::vector<std::string>{"S01", "bonafide"});
  CHECK(ds.count(BinaryLabel::kBonafide) == 1);

  CHECK(error_of("id,attack_class,binary_label,f0\na,bonafide,bonafide,abc\n").find("line 2") != std::string::npos);
  CHECK(error_of("id,attack_class,binary_label,f0\na,S01,spoof,1\nb,S01,spoof,1,2\n").find("line 3") !=
        std::string::npos);
  CHECK(error_of("name,f0\n").find("line 1") != std::string::npos);
  CHECK_FALSE(error_of("").empty());
  CHECK(error_of("id,attack_class,binary_label,f0\na,S01,maybe,1\n").find("line 2") != std::string::npos);
}

TEST_CASE("dataset invariants") {
  CHECK_THROWS_AS(EpisodeDataset({rec("a", "S01", {1}), rec("a", "S02", {2})}), DatasetError);
  CHECK_THROWS_AS(EpisodeDataset({rec("a", "S01", {1}), rec("b", "S02", {2, 3})}), DatasetError);
  CHECK_THROWS_AS(EpisodeDataset({rec("a", "S01", {std::nan("")})}), DatasetError);
  auto wrong = rec("a", kBonafideClass, {1});
  wrong.binary_label = BinaryLabel::kSpoof;
  CHECK_THROWS_AS(EpisodeDataset({wrong}), DatasetError);
  auto spoof_as_bona = rec("b", "S01", {1});
  spoof_as_bona.binary_label = BinaryLabel::kBonafide;
  CHECK_THROWS_AS(EpisodeDataset({spoof_as_bona}), DatasetError);
  CHECK_THROWS_AS(parse_binary_label("Bonafide"), std::invalid_argument);
}

TEST_CASE("csv and metadata round trips") {
  const auto splits = generate_synthetic(small_synth(), 3);
  const EpisodeDataset back = dataset_from_csv(dataset_to_csv(splits.train));
  CHECK(back.records() == splits.train.records());

  const auto dir = std::filesystem::temp_directory_path() / "metaspoof_test_episodic";
  std::filesystem::create_directories(dir);
  save_dataset(dir / "train.csv", splits.eval_unseen);
  CHECK(load_dataset(dir / "train.csv").records() == splits.eval_unseen.records());
  const Metadata meta = small_synth().to_metadata();
  write_metadata(dir / "meta.txt", meta);
  CHECK(read_metadata(dir / "meta.txt") == meta);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_dataset(dir / "missing.csv"), DatasetError);
}

TEST_CASE("synthetic generation") {
  const SyntheticConfig cfg = small_synth();
  const auto a = generate_synthetic(cfg, 11);
  const auto b = generate_synthetic(cfg, 11);
  const auto c = generate_synthetic(cfg, 12);
  CHECK(a.train.records() == b.train.records());
  CHECK(a.eval_unseen.records() == b.eval_unseen.records());
  CHECK_FALSE(a.train.records() == c.train.records());

  CHECK(a.train.classes().size() == 7);
  CHECK(a.train.size() == 7 * cfg.per_class);
  CHECK(a.eval_seen.classes() == a.train.classes());
  CHECK(a.eval_unseen.classes() == std::vector<std::string>{"S07", "S08", "S09", "S10", "bonafide"});
  CHECK(a.train.count(BinaryLabel::kBonafide) == cfg.per_class);
  CHECK(a.train[0].id == "train-S01-00000");

  SyntheticConfig tiny = cfg;
  tiny.dim = 11;
  CHECK_THROWS_AS(tiny.validate(), std::invalid_argument);
  tiny.dim = 12;
  CHECK_NOTHROW(tiny.validate());
}

TEST_CASE("synthetic class means converge to their centers") {
  SyntheticConfig cfg = small_synth();
  cfg.per_class = 4000;
  const auto s = generate_synthetic(cfg, 5);
  // Standard error per coordinate is spread / sqrt(4000) ~ 0.016.
  for (const auto& [label, center] : s.train_centers) {
    const auto& rows = s.train.class_records(label);
    for (std::size_t t = 0; t < cfg.dim; ++t) {
      double m = 0.0;
      for (std::size_t r : rows) m += s.train[r].features[t];
      m /= static_cast<double>(rows.size());
      CHECK(std::abs(m - center[t]) < 0.08);
    }
  }
}

TEST_CASE("synthetic classes are nearest-centroid separable") {
  const SyntheticConfig cfg = small_synth();
  const auto s = generate_synthetic(cfg, 8);
  auto accuracy = [](const EpisodeDataset& ds, const std::map<std::string, std::vector<double>>& centers) {
    std::size_t correct = 0;
    for (const auto& r : ds.records()) {
      std::string best;
      double best_d = INFINITY;
      for (const auto& [label, c] : centers) {
        double d = 0.0;
        for (std::size_t t = 0; t < c.size(); ++t) d += (r.features[t] - c[t]) * (r.features[t] - c[t]);
        if (d < best_d) best_d = d, best = label;
      }
      correct += best == r.attack_class;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
  };
  CHECK(accuracy(s.eval_seen, s.train_centers) > 0.9);
  CHECK(accuracy(s.eval_unseen, s.unseen_centers) > 0.9);
}

TEST_CASE("sample_task") {
  const auto s = generate_synthetic(small_synth(), 2);
  const TaskSpec spec{3, 5, 4};
  Rng rng(77);
  std::set<std::string> label_sets;
  for (int i = 0; i < 30; ++i) {
    const Task t = sample_task(s.train, spec, rng);
    CHECK(t.n_way() == 3);
    CHECK(t.support.size() == 15);
    CHECK(t.query.size() == 12);
    CHECK(t.support.features.shape() == Shape{15, 16});
    std::set<std::string> ids(t.support.ids.begin(), t.support.ids.end());
    for (const auto& id : t.query.ids) CHECK(ids.insert(id).second);
    CHECK(ids.size() == 27);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::count(t.support.labels.begin(), t.support.labels.end(), c) == 5);
      CHECK(std::count(t.query.labels.begin(), t.query.labels.end(), c) == 4);
    }
    for (std::size_t r = 0; r < t.support.size(); ++r) {
      const auto& label = t.class_labels[t.support.labels[r]];
      CHECK(t.support.ids[r].find("-" + label + "-") != std::string::npos);
    }
    std::string key;
    for (const auto& l : t.class_labels) key += l + ",";
    label_sets.insert(key);
  }
  CHECK(label_sets.size() > 5);

  Rng r1(5), r2(5);
  CHECK(sample_task(s.train, spec, r1).support.ids == sample_task(s.train, spec, r2).support.ids);

  Rng r3(1);
  CHECK_THROWS_AS(sample_task(s.train, {8, 1, 1}, r3), std::invalid_argument);
  try {
    sample_task(s.train, {7, 30, 20}, r3);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find("needs 50") != std::string::npos);
  }
}

TEST_CASE("sample_binary_support") {
  const auto s = generate_synthetic(small_synth(), 4);
  const EpisodeDataset& ds = s.eval_unseen;
  Rng rng(9);
  const Task t = sample_binary_support(ds, 8, rng);
  CHECK(t.class_labels == std::vector<std::string>{"bonafide", "spoof"});
  CHECK(t.support.size() == 16);
  CHECK(t.query.size() == ds.size() - 16);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(t.support.labels[i] == kBonafideIndex);
    CHECK(t.support.labels[8 + i] == kSpoofIndex);
    CHECK(t.support.ids[i].find("bonafide") != std::string::npos);
    CHECK(t.support.ids[8 + i].find("bonafide") == std::string::npos);
  }
  std::set<std::string> all(t.support.ids.begin(), t.support.ids.end());
  for (const auto& id : t.query.ids) all.insert(id);
  CHECK(all.size() == ds.size());
  // Query keeps dataset order.
  std::size_t last = 0;
  for (std::size_t q = 0; q < t.query.size(); ++q) {
    const auto it = std::find_if(ds.records().begin() + static_cast<std::ptrdiff_t>(last), ds.records().end(),
                                 [&](const LabeledEmbedding& r) { return r.id == t.query.ids[q]; });
    REQUIRE(it != ds.records().end());
    last = static_cast<std::size_t>(it - ds.records().begin());
  }

  std::set<std::vector<std::string>> supports;
  for (std::uint64_t seed = 0; seed < 9; ++seed) {
    Rng r(derive_seed(100, {8, seed}));
    supports.insert(sample_binary_support(ds, 8, r).support.ids);
  }
  CHECK(supports.size() == 9);

  Rng r0(1);
  CHECK_THROWS_AS(sample_binary_support(ds, 0, r0), std::invalid_argument);
  CHECK_THROWS_AS(sample_binary_support(ds, 41, r0), DatasetError);
}
