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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "metaspoof/episodic.hpp"

namespace metaspoof {

// Higher score means more bonafide.
struct ScoredTrial {
  std::string id;
  double score = 0.0;
  BinaryLabel truth = BinaryLabel::kSpoof;

  bool operator==(const ScoredTrial&) const = default;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
  std::size_t n_bonafide = 0;
  std::size_t n_spoof = 0;
};

/**
 * Equal error rate over a threshold sweep.
 *
 * Candidate thresholds are the sorted unique scores plus +inf. At threshold t,
 * FRR(t) is the fraction of bonafide trials scoring below t and FAR(t) the
 * fraction of spoof trials scoring at or above t. The first sweep point with
 * FRR >= FAR brackets the crossing together with its predecessor; the EER is
 * read off the straight line between the two (FRR, FAR) points. An exact
 * FRR == FAR at a sweep point is returned as-is, at the smallest such t.
 *
 * Throws std::invalid_argument unless both classes are present and every
 * score is finite.
 */
EerResult compute_eer(std::span<const ScoredTrial> trials);

struct RepeatSummary {
  double mean = 0.0;
  double std = 0.0;  // sample std (n - 1); 0 for a single value
  std::size_t count = 0;
};

RepeatSummary summarize_repeats(std::span<const double> values);

// CSV `id,score,truth`.
void write_scores(const std::filesystem::path& path, std::span<const ScoredTrial> trials);
std::vector<ScoredTrial> read_scores(const std::filesystem::path& path);
std::string scores_to_csv(std::span<const ScoredTrial> trials);
std::vector<ScoredTrial> scores_from_csv(std::string_view text);

// Pairs scores with the ids and binary truth of a task's query set.
std::vector<ScoredTrial> make_trials(const TaskSet& query, std::span<const double> scores);

// Shortest round-trip decimal text of a double.
std::string format_double(double x);

}  // namespace metaspoof
