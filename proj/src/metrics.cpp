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

#include "metaspoof/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace metaspoof {

EerResult compute_eer(std::span<const ScoredTrial> trials) {
  EerResult res;
  std::vector<std::pair<double, bool>> sorted;  // (score, is_bonafide)
  sorted.reserve(trials.size());
  for (const auto& t : trials) {
    if (!std::isfinite(t.score)) throw std::invalid_argument("compute_eer: non-finite score for '" + t.id + "'");
    const bool bona = t.truth == BinaryLabel::kBonafide;
    (bona ? res.n_bonafide : res.n_spoof)++;
    sorted.emplace_back(t.score, bona);
  }
  if (res.n_bonafide == 0 || res.n_spoof == 0) {
    throw std::invalid_argument("compute_eer needs at least one bonafide and one spoof trial");
  }
  std::sort(sorted.begin(), sorted.end());

  const double nb = static_cast<double>(res.n_bonafide);
  const double ns = static_cast<double>(res.n_spoof);
  // Walking thresholds upward: at a unique score t, bona_below counts bonafide
  // strictly below t and spoof_at_or_above counts spoof at or above t.
  std::size_t bona_below = 0;
  std::size_t spoof_at_or_above = res.n_spoof;
  double prev_frr = 0.0, prev_far = 0.0, prev_t = 0.0;
  bool have_prev = false;
  std::size_t i = 0;
  while (true) {
    const bool at_end = i == sorted.size();
    const double t = at_end ? std::numeric_limits<double>::infinity() : sorted[i].first;
    const double frr = static_cast<double>(bona_below) / nb;
    const double far = static_cast<double>(spoof_at_or_above) / ns;
    if (frr >= far) {
      if (frr == far || !have_prev) {
        res.eer = frr;
        res.threshold = at_end ? prev_t : t;
      } else {
        const double d0 = prev_frr - prev_far;  // < 0
        const double d1 = frr - far;            // > 0
        const double lambda = -d0 / (d1 - d0);
        res.eer = prev_frr + lambda * (frr - prev_frr);
        res.threshold = at_end ? prev_t : prev_t + lambda * (t - prev_t);
      }
      return res;
    }
    prev_frr = frr;
    prev_far = far;
    prev_t = t;
    have_prev = true;
    // Advance past every trial scoring exactly t.
    while (i < sorted.size() && sorted[i].first == t) {
      if (sorted[i].second) {
        ++bona_below;
      } else {
        --spoof_at_or_above;
      }
      ++i;
    }
  }
}

RepeatSummary summarize_repeats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize_repeats: no values");
  // Sorted accumulation keeps the summary independent of input order.
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  RepeatSummary s;
  s.count = v.size();
  double total = 0.0;
  for (double x : v) total += x;
  s.mean = total / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

std::string format_double(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::string scores_to_csv(std::span<const ScoredTrial> trials) {
  std::string out = "id,score,truth\n";
  for (const auto& t : trials) {
    out += t.id;
    out += ',';
    out += format_double(t.score);
    out += ',';
    out += to_string(t.truth);
    out += '\n';
  }
  return out;
}

std::vector<ScoredTrial> scores_from_csv(std::string_view text) {
  std::vector<ScoredTrial> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "id,score,truth") throw std::runtime_error("score file header must be id,score,truth");
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected 3 fields");
    }
    ScoredTrial t;
    t.id = line.substr(0, c1);
    const std::string score = line.substr(c1 + 1, c2 - c1 - 1);
    const auto [ptr, ec] = std::from_chars(score.data(), score.data() + score.size(), t.score);
    if (ec != std::errc() || ptr != score.data() + score.size()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": bad score '" + score + "'");
    }
    try {
      t.truth = parse_binary_label(line.substr(c2 + 1));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(t));
  }
  return out;
}

void write_scores(const std::filesystem::path& path, std::span<const ScoredTrial> trials) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << scores_to_csv(trials);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<ScoredTrial> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return scores_from_csv(buf.str());
}

std::vector<ScoredTrial> make_trials(const TaskSet& query, std::span<const double> scores) {
  if (scores.size() != query.size()) throw std::invalid_argument("make_trials: score count mismatch");
  std::vector<ScoredTrial> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.push_back({query.ids[i], scores[i],
                   query.labels[i] == kBonafideIndex ? BinaryLabel::kBonafide : BinaryLabel::kSpoof});
  }
  return out;
}

}  // namespace metaspoof
