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
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "metaspoof/metrics.hpp"

using namespace metaspoof;

namespace {

std::vector<ScoredTrial> trials(const std::vector<double>& bona, const std::vector<double>& spoof) {
  std::vector<ScoredTrial> out;
  for (std::size_t i = 0; i < bona.size(); ++i) out.push_back({"b" + std::to_string(i), bona[i], BinaryLabel::kBonafide});
  for (std::size_t i = 0; i < spoof.size(); ++i) out.push_back({"s" + std::to_string(i), spoof[i], BinaryLabel::kSpoof});
  return out;
}

// Recounts FRR and FAR from scratch at every candidate threshold.
double brute_force_eer(const std::vector<ScoredTrial>& ts) {
  std::vector<double> cands;
  for (const auto& t : ts) cands.push_back(t.score);
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  cands.push_back(std::numeric_limits<double>::infinity());
  double pf = 0, pa = 0;
  for (std::size_t c = 0; c < cands.size(); ++c) {
    double nb = 0, ns = 0, rej = 0, acc = 0;
    for (const auto& t : ts) {
      if (t.truth == BinaryLabel::kBonafide) {
        ++nb;
        rej += t.score < cands[c];
      } else {
        ++ns;
        acc += t.score >= cands[c];
      }
    }
    const double frr = rej / nb, far = acc / ns;
    if (frr >= far) {
      if (frr == far || c == 0) return frr;
      const double lam = (pa - pf) / ((frr - far) - (pf - pa));
      return pf + lam * (frr - pf);
    }
    pf = frr;
    pa = far;
  }
  return -1.0;
}

std::vector<ScoredTrial> random_trials(std::mt19937_64& rng, std::size_t nb, std::size_t ns, double shift, bool coarse) {
  std::normal_distribution<double> d;
  std::vector<double> b(nb), s(ns);
  for (double& x : b) x = coarse ? std::round(2 * (d(rng) + shift)) : d(rng) + shift;
  for (double& x : s) x = coarse ? std::round(2 * d(rng)) : d(rng);
  return trials(b, s);
}

}  // namespace

TEST_CASE("hand-computed EER cases") {
  const auto perfect = compute_eer(trials({3, 4}, {1, 2}));
  CHECK(perfect.eer == 0.0);
  CHECK(perfect.threshold == 3.0);
  CHECK(perfect.n_bonafide == 2);
  CHECK(perfect.n_spoof == 2);

  CHECK(compute_eer(trials({1, 2}, {3, 4})).eer == 1.0);
  CHECK(compute_eer(trials({5, 5, 5}, {5, 5})).eer == 0.5);

  // Sweep: t=1 (0, 1), t=2 (0, .5), t=3 (.5, .5) is an exact tie.
  const auto tie = compute_eer(trials({2, 4}, {1, 3}));
  CHECK(tie.eer == 0.5);
  CHECK(tie.threshold == 3.0);

  // t=3 (0, .5) then t=4 (.5, 0): midpoint.
  const auto mid = compute_eer(trials({3, 4}, {1, 3}));
  CHECK(mid.eer == 0.25);
  CHECK(mid.threshold == 3.5);

  // t=3 (1/3, 1/2) then t=5 (1/3, 0): lambda = 1/3.
  const auto interp = compute_eer(trials({2, 5, 6}, {1, 3}));
  CHECK(interp.eer == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(interp.threshold == doctest::Approx(3.0 + 2.0 / 3.0).epsilon(1e-15));

  // Bracket at +inf keeps the last finite threshold.
  const auto top = compute_eer(trials({1}, {2}));
  CHECK(top.eer == 1.0);
}

TEST_CASE("EER input validation") {
  CHECK_THROWS_AS(compute_eer(trials({1, 2}, {})), std::invalid_argument);
  CHECK_THROWS_AS(compute_eer(trials({}, {1})), std::invalid_argument);
  CHECK_THROWS_AS(compute_eer(trials({std::nan("")}, {1})), std::invalid_argument);
  CHECK_THROWS_AS(compute_eer(trials({INFINITY}, {1})), std::invalid_argument);
}

TEST_CASE("EER matches a brute-force sweep") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nb = 1 + rng() % 40, ns = 1 + rng() % 40;
    const auto ts = random_trials(rng, nb, ns, static_cast<double>(rng() % 5) * 0.5, trial % 2 == 0);
    CHECK(compute_eer(ts).eer == doctest::Approx(brute_force_eer(ts)).epsilon(1e-12));
  }
}

TEST_CASE("EER of unit-variance Gaussians separated by two") {
  std::mt19937_64 rng(4);
  const auto ts = random_trials(rng, 100000, 100000, 2.0, false);
  // Phi(-1)
  CHECK(compute_eer(ts).eer == doctest::Approx(0.158655).epsilon(0.03));
}

TEST_CASE("EER of random scores is near one half") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    const auto ts = random_trials(rng, 10000, 10000, 0.0, false);
    CHECK(std::abs(compute_eer(ts).eer - 0.5) < 0.02);
  }
}

TEST_CASE("EER invariances") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    auto ts = random_trials(rng, 30 + trial, 50, 1.0, trial % 3 == 0);
    const double base = compute_eer(ts).eer;

    auto mono = ts;
    for (auto& t : mono) t.score = std::exp(t.score / 4.0) * 3.0 + 1.0;
    CHECK(compute_eer(mono).eer == base);

    auto shuffled = ts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(compute_eer(shuffled).eer == base);

    if (trial % 3 != 0) {
      // Continuous scores: swapping labels and negating scores mirrors the
      // sweep, which moves the interpolated crossing by less than one step.
      auto swapped = ts;
      for (auto& t : swapped) {
        t.score = -t.score;
        t.truth = t.truth == BinaryLabel::kBonafide ? BinaryLabel::kSpoof : BinaryLabel::kBonafide;
      }
      CHECK(std::abs(compute_eer(swapped).eer - base) <= 1.0 / 30.0);
    }
  }
}

TEST_CASE("summarize_repeats") {
  const std::vector<double> v = {3.0, 1.0, 2.0};
  const auto s = summarize_repeats(v);
  CHECK(s.mean == 2.0);
  CHECK(s.std == 1.0);
  CHECK(s.count == 3);
  const std::vector<double> one = {0.25};
  CHECK(summarize_repeats(one).std == 0.0);
  CHECK_THROWS_AS(summarize_repeats(std::vector<double>{}), std::invalid_argument);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u;
  std::vector<double> many(9);
  for (double& x : many) x = u(rng);
  const auto ref = summarize_repeats(many);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(many.begin(), many.end(), rng);
    const auto again = summarize_repeats(many);
    CHECK(again.mean == ref.mean);
    CHECK(again.std == ref.std);
  }
}

TEST_CASE("score files round trip") {
  const auto ts = trials({0.1, -1e-300, 12345.678}, {-0.0, 1.0 / 3.0});
  CHECK(scores_from_csv(scores_to_csv(ts)) == ts);
  CHECK(format_double(0.1) == "0.1");
  CHECK_THROWS(scores_from_csv("id,score,truth\na,xyz,spoof\n"));

  TaskSet q;
  q.ids = {"x", "y"};
  q.labels = {kSpoofIndex, kBonafideIndex};
  const std::vector<double> sc = {0.5, -2.0};
  const auto made = make_trials(q, sc);
  CHECK(made[0] == ScoredTrial{"x", 0.5, BinaryLabel::kSpoof});
  CHECK(made[1] == ScoredTrial{"y", -2.0, BinaryLabel::kBonafide});
}
