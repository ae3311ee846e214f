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

#include "metaspoof/episodic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace metaspoof {

std::string_view to_string(BinaryLabel label) {
  return label == BinaryLabel::kBonafide ? "bonafide" : "spoof";
}

BinaryLabel parse_binary_label(std::string_view text) {
  if (text == "bonafide") return BinaryLabel::kBonafide;
  if (text == "spoof") return BinaryLabel::kSpoof;
  throw std::invalid_argument("unknown binary label '" + std::string(text) + "'");
}

EpisodeDataset::EpisodeDataset(std::vector<LabeledEmbedding> records) : records_(std::move(records)) {
  if (records_.empty()) return;
  dim_ = records_.front().features.size();
  if (dim_ == 0) throw DatasetError("records must have at least one feature");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.features.size() != dim_) {
      throw DatasetError("record '" + r.id + "' has " + std::to_string(r.features.size()) +
                         " features, expected " + std::to_string(dim_));
    }
    for (double x : r.features) {
      if (!std::isfinite(x)) throw DatasetError("record '" + r.id + "' has a non-finite feature");
    }
    if ((r.attack_class == kBonafideClass) != (r.binary_label == BinaryLabel::kBonafide)) {
      throw DatasetError("record '" + r.id + "': class '" + r.attack_class +
                         "' inconsistent with binary label '" + std::string(to_string(r.binary_label)) + "'");
    }
    if (!ids.insert(r.id).second) throw DatasetError("duplicate record id '" + r.id + "'");
    index_[r.attack_class].push_back(i);
  }
  for (const auto& [label, rows] : index_) classes_.push_back(label);
}

const std::vector<std::size_t>& EpisodeDataset::class_records(const std::string& label) const {
  const auto it = index_.find(label);
  if (it == index_.end()) throw DatasetError("no class '" + label + "' in dataset");
  return it->second;
}

std::vector<std::size_t> EpisodeDataset::indices_with(BinaryLabel label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].binary_label == label) out.push_back(i);
  }
  return out;
}

std::size_t EpisodeDataset::count(BinaryLabel label) const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(),
                                                [&](const auto& r) { return r.binary_label == label; }));
}

Tensor EpisodeDataset::features(std::span<const std::size_t> rows) const {
  if (rows.empty()) throw DatasetError("cannot build a feature matrix from zero rows");
  Tensor out({rows.size(), dim_});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(records_.at(rows[i]).features.begin(), records_.at(rows[i]).features.end(), out.data() + i * dim_);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

void append_double(std::string& out, double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  out.append(buf, ptr);
}

}  // namespace

EpisodeDataset dataset_from_csv(std::string_view text) {
  std::size_t line_no = 0;
  std::size_t dim = 0;
  bool have_header = false;
  std::vector<LabeledEmbedding> records;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (!have_header) {
      if (fields.size() < 4 || trim(fields[0]) != "id" || trim(fields[1]) != "attack_class" ||
          trim(fields[2]) != "binary_label") {
        throw DatasetError(where + "header must be id,attack_class,binary_label,f0,...");
      }
      dim = fields.size() - 3;
      for (std::size_t i = 0; i < dim; ++i) {
        if (trim(fields[3 + i]) != "f" + std::to_string(i)) {
          throw DatasetError(where + "expected column f" + std::to_string(i) + ", got '" +
                             std::string(trim(fields[3 + i])) + "'");
        }
      }
      have_header = true;
      continue;
    }
    if (fields.size() != dim + 3) {
      throw DatasetError(where + "expected " + std::to_string(dim) + " features, got " +
                         std::to_string(fields.size() < 3 ? 0 : fields.size() - 3));
    }
    LabeledEmbedding r;
    r.id = std::string(trim(fields[0]));
    r.attack_class = std::string(trim(fields[1]));
    try {
      r.binary_label = parse_binary_label(trim(fields[2]));
    } catch (const std::invalid_argument& e) {
      throw DatasetError(where + e.what());
    }
    r.features.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!parse_double(fields[3 + i], r.features[i])) {
        throw DatasetError(where + "cannot parse feature f" + std::to_string(i) + " '" +
                           std::string(trim(fields[3 + i])) + "'");
      }
    }
    records.push_back(std::move(r));
  }
  if (!have_header) throw DatasetError("dataset file is empty");
  try {
    return EpisodeDataset(std::move(records));
  } catch (const DatasetError& e) {
    throw DatasetError(std::string("invalid dataset: ") + e.what());
  }
}

std::string dataset_to_csv(const EpisodeDataset& dataset) {
  std::string out = "id,attack_class,binary_label";
  for (std::size_t i = 0; i < dataset.dim(); ++i) out += ",f" + std::to_string(i);
  out += '\n';
  for (const auto& r : dataset.records()) {
    out += r.id;
    out += ',';
    out += r.attack_class;
    out += ',';
    out += to_string(r.binary_label);
    for (double x : r.features) {
      out += ',';
      append_double(out, x);
    }
    out += '\n';
  }
  return out;
}

EpisodeDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return dataset_from_csv(buf.str());
  } catch (const DatasetError& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
}

void save_dataset(const std::filesystem::path& path, const EpisodeDataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write dataset " + path.string());
  out << dataset_to_csv(dataset);
  if (!out) throw DatasetError("failed writing dataset " + path.string());
}

void write_metadata(const std::filesystem::path& path, const Metadata& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Metadata read_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Metadata out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Task sampling

namespace {

// Partial Fisher-Yates: the first `count` entries become a uniform sample
// without replacement, in draw order.
void draw_prefix(std::vector<std::size_t>& pool, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
}

void push_row(TaskSet& set, const EpisodeDataset& ds, std::size_t row, std::size_t label,
              std::vector<std::size_t>& rows) {
  rows.push_back(row);
  set.labels.push_back(label);
  set.ids.push_back(ds[row].id);
}

}  // namespace

Task sample_task(const EpisodeDataset& dataset, const TaskSpec& spec, Rng& rng) {
  if (spec.n_way < 2) throw std::invalid_argument("task n_way must be >= 2");
  if (spec.k_shot < 1 || spec.query_per_class < 1) {
    throw std::invalid_argument("task k_shot and query_per_class must be >= 1");
  }
  if (spec.n_way > dataset.classes().size()) {
    throw std::invalid_argument("task asks for " + std::to_string(spec.n_way) + " classes, dataset has " +
                                std::to_string(dataset.classes().size()));
  }
  std::vector<std::size_t> class_pool(dataset.classes().size());
  for (std::size_t i = 0; i < class_pool.size(); ++i) class_pool[i] = i;
  draw_prefix(class_pool, spec.n_way, rng);

  Task task;
  std::vector<std::size_t> support_rows, query_rows;
  const std::size_t need = spec.k_shot + spec.query_per_class;
  for (std::size_t c = 0; c < spec.n_way; ++c) {
    const std::string& label = dataset.classes()[class_pool[c]];
    std::vector<std::size_t> pool = dataset.class_records(label);
    if (pool.size() < need) {
      throw DatasetError("class '" + label + "' has " + std::to_string(pool.size()) + " records, task needs " +
                         std::to_string(need));
    }
    draw_prefix(pool, need, rng);
    task.class_labels.push_back(label);
    for (std::size_t i = 0; i < spec.k_shot; ++i) push_row(task.support, dataset, pool[i], c, support_rows);
    for (std::size_t i = spec.k_shot; i < need; ++i) push_row(task.query, dataset, pool[i], c, query_rows);
  }
  task.support.features = dataset.features(support_rows);
  task.query.features = dataset.features(query_rows);
  return task;
}

Task sample_binary_support(const EpisodeDataset& dataset, std::size_t k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("support size k must be >= 1");
  auto bona = dataset.indices_with(BinaryLabel::kBonafide);
  auto spoof = dataset.indices_with(BinaryLabel::kSpoof);
  if (bona.size() < k || spoof.size() < k) {
    throw DatasetError("binary support needs " + std::to_string(k) + " records per class, dataset has " +
                       std::to_string(bona.size()) + " bonafide and " + std::to_string(spoof.size()) + " spoof");
  }
  draw_prefix(bona, k, rng);
  draw_prefix(spoof, k, rng);

  Task task;
  task.class_labels = {"bonafide", "spoof"};
  std::vector<std::size_t> support_rows, query_rows;
  std::vector<bool> in_support(dataset.size(), false);
  for (std::size_t i = 0; i < k; ++i) {
    push_row(task.support, dataset, bona[i], kBonafideIndex, support_rows);
    in_support[bona[i]] = true;
  }
  for (std::size_t i = 0; i < k; ++i) {
    push_row(task.support, dataset, spoof[i], kSpoofIndex, support_rows);
    in_support[spoof[i]] = true;
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (in_support[i]) continue;
    const std::size_t label = dataset[i].binary_label == BinaryLabel::kBonafide ? kBonafideIndex : kSpoofIndex;
    push_row(task.query, dataset, i, label, query_rows);
  }
  if (query_rows.empty()) throw DatasetError("binary support leaves no query records");
  task.support.features = dataset.features(support_rows);
  task.query.features = dataset.features(query_rows);
  return task;
}

// ---------------------------------------------------------------------------
// Synthetic data

void SyntheticConfig::validate() const {
  if (dim == 0 || per_class == 0) throw std::invalid_argument("synthetic dim and per_class must be >= 1");
  if (seen_attacks == 0 || unseen_attacks == 0) {
    throw std::invalid_argument("synthetic data needs at least one seen and one unseen attack");
  }
  // One direction per attack, plus the shared spoof and channel directions.
  if (seen_attacks + unseen_attacks + 2 > dim) {
    throw std::invalid_argument("synthetic dim " + std::to_string(dim) + " too small for " +
                                std::to_string(seen_attacks + unseen_attacks) + " attack directions");
  }
  if (!(spread > 0.0)) throw std::invalid_argument("synthetic spread must be positive");
}

Metadata SyntheticConfig::to_metadata() const {
  auto num = [](double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
  };
  return {{"dim", std::to_string(dim)},
          {"per_class", std::to_string(per_class)},
          {"seen_attacks", std::to_string(seen_attacks)},
          {"unseen_attacks", std::to_string(unseen_attacks)},
          {"spread", num(spread)},
          {"seen_separation", num(seen_separation)},
          {"unseen_shift", num(unseen_shift)},
          {"spoof_offset", num(spoof_offset)},
          {"channel_offset", num(channel_offset)}};
}

namespace {

// Random orthonormal vectors via Gram-Schmidt on Gaussian draws.
std::vector<std::vector<double>> orthonormal_directions(std::size_t count, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  while (basis.size() < count) {
    std::vector<double> v(dim);
    for (double& x : v) x = normal(rng);
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += v[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * b[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

std::vector<double> combine(std::size_t dim, std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
  std::vector<double> out(dim, 0.0);
  for (const auto& [w, v] : terms) {
    for (std::size_t i = 0; i < dim; ++i) out[i] += w * (*v)[i];
  }
  return out;
}

std::string attack_name(std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "S%02zu", index + 1);
  return buf;
}

EpisodeDataset draw_split(const std::string& split, const std::map<std::string, std::vector<double>>& centers,
                          const SyntheticConfig& config, Rng& rng) {
  std::normal_distribution<double> noise(0.0, config.spread);
  std::vector<LabeledEmbedding> records;
  for (const auto& [label, center] : centers) {
    for (std::size_t i = 0; i < config.per_class; ++i) {
      LabeledEmbedding r;
      char idx[16];
      std::snprintf(idx, sizeof(idx), "%05zu", i);
      r.id = split + "-" + label + "-" + idx;
      r.attack_class = label;
      r.binary_label = label == kBonafideClass ? BinaryLabel::kBonafide : BinaryLabel::kSpoof;
      r.features.resize(config.dim);
      for (std::size_t t = 0; t < config.dim; ++t) r.features[t] = center[t] + noise(rng);
      records.push_back(std::move(r));
    }
  }
  return EpisodeDataset(std::move(records));
}

}  // namespace

SyntheticSplits generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t d = config.dim;
  const auto dirs = orthonormal_directions(config.seen_attacks + config.unseen_attacks + 2, d, rng);
  const auto& spoof_dir = dirs[config.seen_attacks + config.unseen_attacks];
  const auto& channel_dir = dirs[config.seen_attacks + config.unseen_attacks + 1];

  SyntheticSplits out;
  out.train_centers[kBonafideClass] = std::vector<double>(d, 0.0);
  for (std::size_t a = 0; a < config.seen_attacks; ++a) {
    out.train_centers[attack_name(a)] =
        combine(d, {{config.seen_separation, &dirs[a]}, {config.spoof_offset, &spoof_dir}});
  }
  out.unseen_centers[kBonafideClass] = combine(d, {{config.channel_offset, &channel_dir}});
  for (std::size_t u = 0; u < config.unseen_attacks; ++u) {
    out.unseen_centers[attack_name(config.seen_attacks + u)] =
        combine(d, {{config.unseen_shift, &dirs[config.seen_attacks + u]},
                    {config.spoof_offset, &spoof_dir},
                    {config.channel_offset, &channel_dir}});
  }

  out.train = draw_split("train", out.train_centers, config, rng);
  out.eval_seen = draw_split("eval_seen", out.train_centers, config, rng);
  out.eval_unseen = draw_split("eval_unseen", out.unseen_centers, config, rng);
  return out;
}

}  // namespace metaspoof
