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

#include "metaspoof/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "metaspoof/backbone.hpp"
#include "metaspoof/episodic.hpp"
#include "metaspoof/experiments.hpp"
#include "metaspoof/metrics.hpp"
#include "metaspoof/protomaml.hpp"
#include "metaspoof/protonet.hpp"

namespace metaspoof {
namespace {

namespace fs = std::filesystem;

class CliError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
  std::size_t threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Master seed; every random stream derives from it");
  cmd->add_option("--out", c.out, "Output directory (created if absent)")->required();
  cmd->add_flag("--force", c.force, "Allow writing into a non-empty output directory");
  cmd->add_option("--threads", c.threads, "Worker threads, 0 for all cores");
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw CliError(what + " path is empty");
  if (!fs::is_regular_file(path)) throw CliError(what + " not found: " + path);
}

fs::path prepare_out_dir(const Common& c) {
  const fs::path dir(c.out);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw CliError("output path " + dir.string() + " is not a directory");
    if (!fs::is_empty(dir) && !c.force) {
      throw CliError("output directory " + dir.string() + " is not empty; pass --force to overwrite");
    }
  } else {
    fs::create_directories(dir);
  }
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw CliError("failed writing " + path.string());
}

// Effective value of every option: flag or config-file value when given,
// otherwise the built-in default.
void write_manifest(const fs::path& dir, const CLI::App& cmd, const Metadata& extra) {
  Metadata m{{"command", cmd.get_name()}};
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    std::string value;
    if (opt->get_expected_max() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
    } else {
      value = opt->get_default_str();
    }
    m.emplace_back(opt->get_lnames().front(), value);
  }
  m.insert(m.end(), extra.begin(), extra.end());
  write_metadata(dir / "manifest.txt", m);
}

EpisodeDataset load_input_dataset(const std::string& path, const std::string& what) {
  require_file(path, what);
  return load_dataset(path);
}

ParameterSet load_input_checkpoint(const std::string& path, const std::string& what) {
  require_file(path, what);
  return load_checkpoint(path);
}

void check_dims(const ParameterSet& params, const EpisodeDataset& ds, const std::string& ds_path) {
  if (params.config().input_dim != ds.dim()) {
    throw CliError("checkpoint expects " + std::to_string(params.config().input_dim) + "-dim inputs, " + ds_path +
                   " has " + std::to_string(ds.dim()));
  }
}

std::string percent(double x) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << 100.0 * x << '%';
  return os.str();
}

// ---------------------------------------------------------------------------

struct GenArgs {
  Common common;
  SyntheticConfig synth;
};

void setup_gen(CLI::App* cmd, GenArgs& a) {
  add_common(cmd, a.common);
  cmd->add_option("--dim", a.synth.dim, "Embedding dimension");
  cmd->add_option("--per-class", a.synth.per_class, "Records per class and split");
  cmd->add_option("--seen-attacks", a.synth.seen_attacks);
  cmd->add_option("--unseen-attacks", a.synth.unseen_attacks);
  cmd->add_option("--spread", a.synth.spread, "Per-coordinate noise std");
  cmd->add_option("--seen-separation", a.synth.seen_separation);
  cmd->add_option("--unseen-shift", a.synth.unseen_shift);
  cmd->add_option("--spoof-offset", a.synth.spoof_offset);
  cmd->add_option("--channel-offset", a.synth.channel_offset);
}

void run_gen(const CLI::App& cmd, const GenArgs& a, std::ostream& out) {
  a.synth.validate();
  const fs::path dir = prepare_out_dir(a.common);
  const auto splits = generate_synthetic(a.synth, derive_seed(a.common.seed, Stream::kSynthetic));
  save_dataset(dir / "train.csv", splits.train);
  save_dataset(dir / "eval_seen.csv", splits.eval_seen);
  save_dataset(dir / "eval_unseen.csv", splits.eval_unseen);
  Metadata meta = a.synth.to_metadata();
  meta.emplace_back("seed", std::to_string(a.common.seed));
  write_metadata(dir / "metadata.txt", meta);
  write_manifest(dir, cmd, {});
  out << "wrote " << splits.train.size() << " train, " << splits.eval_seen.size() << " eval_seen and "
      << splits.eval_unseen.size() << " eval_unseen records to " << dir.string() << '\n';
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string method = "protonet";
  std::string dataset;
  std::string val_dataset;
  ProtoMamlConfig meta;
  BaselineConfig baseline;
};

void setup_train(CLI::App* cmd, TrainArgs& a) {
  add_common(cmd, a.common);
  cmd->add_option("--method", a.method)->check(CLI::IsMember({"protonet", "protomaml", "baseline"}));
  cmd->add_option("--dataset", a.dataset, "Training CSV")->required();
  cmd->add_option("--val-dataset", a.val_dataset, "Validation CSV")->required();
  EpisodicTrainConfig& o = a.meta.outer;
  cmd->add_option("--epochs", o.epochs);
  cmd->add_option("--episodes-per-epoch", o.episodes_per_epoch);
  cmd->add_option("--n-way", o.task.n_way);
  cmd->add_option("--k-shot", o.task.k_shot);
  cmd->add_option("--query-per-class", o.task.query_per_class);
  cmd->add_option("--base-lr", o.lr.base_lr);
  cmd->add_option("--max-lr", o.lr.max_lr);
  cmd->add_option("--lr-step-epochs", o.lr_step_epochs, "Half-cycle of the cyclic schedule, in epochs");
  cmd->add_option("--weight-decay", o.optimizer.weight_decay);
  cmd->add_option("--validation-tasks", o.validation_tasks);
  cmd->add_option("--hidden", o.hidden_dims, "Hidden layer widths");
  cmd->add_option("--embedding-dim", o.embedding_dim);
  cmd->add_option("--inner-lr", a.meta.inner_lr);
  cmd->add_option("--train-inner-steps", a.meta.train_inner_steps);
  cmd->add_option("--tasks-per-update", a.meta.tasks_per_update);
  cmd->add_option("--baseline-max-epochs", a.baseline.max_epochs);
  cmd->add_option("--baseline-batch-size", a.baseline.batch_size);
  cmd->add_option("--baseline-lr", a.baseline.lr);
  cmd->add_option("--baseline-patience", a.baseline.patience);
  cmd->add_option("--baseline-hidden", a.baseline.hidden_dims);
}

void run_train(const CLI::App& cmd, TrainArgs& a, std::ostream& out) {
  const Method method = parse_method(a.method);
  a.meta.outer.seed = a.common.seed;
  a.meta.outer.threads = a.common.threads;
  a.baseline.seed = a.common.seed;
  if (method == Method::kBaseline) {
    a.baseline.validate();
  } else {
    a.meta.validate();
  }
  const EpisodeDataset train = load_input_dataset(a.dataset, "dataset");
  const EpisodeDataset val = load_input_dataset(a.val_dataset, "validation dataset");
  const fs::path dir = prepare_out_dir(a.common);

  TrainResult result;
  std::string metric = "val_acc";
  std::size_t step_size = 0;
  switch (method) {
    case Method::kProtoNet:
      result = train_protonet(train, val, a.meta.outer);
      step_size = a.meta.outer.lr_step_epochs * a.meta.outer.episodes_per_epoch;
      break;
    case Method::kProtoMaml:
      result = train_protomaml(train, val, a.meta);
      step_size = a.meta.outer.lr_step_epochs * a.meta.updates_per_epoch();
      break;
    case Method::kBaseline:
      result = train_supervised_baseline(train, val, a.baseline);
      metric = "val_eer";
      break;
  }
  save_checkpoint(dir / "checkpoint.mspf", result.params);
  write_train_log(dir / "train_log.csv", result.log, metric);
  Metadata extra = {{"trainable_params", std::to_string(result.params.parameter_count())},
                    {"best_epoch", std::to_string(result.best_epoch)},
                    {"best_" + metric, format_double(result.best_val)}};
  if (method != Method::kBaseline) extra.emplace_back("lr_step_size_iterations", std::to_string(step_size));
  write_manifest(dir, cmd, extra);
  out << a.method << ": best " << metric << ' ' << format_double(result.best_val) << " at epoch " << result.best_epoch
      << " of " << result.log.size() << "; checkpoint " << (dir / "checkpoint.mspf").string() << '\n';
}

// ---------------------------------------------------------------------------

struct AdaptArgs {
  Common common;
  std::string method = "protomaml";
  std::string checkpoint;
  std::string dataset;
  std::size_t k = 96;
  std::size_t steps = 25;
  std::size_t repeats = 9;
  double inner_lr = 0.1;
};

void setup_adapt(CLI::App* cmd, AdaptArgs& a) {
  add_common(cmd, a.common);
  cmd->add_option("--method", a.method)->check(CLI::IsMember({"protonet", "protomaml", "baseline"}));
  cmd->add_option("--checkpoint", a.checkpoint)->required();
  cmd->add_option("--dataset", a.dataset, "Evaluation CSV")->required();
  cmd->add_option("--k", a.k, "Support records per class");
  cmd->add_option("--steps", a.steps, "Inner-loop adaptation steps (protomaml)");
  cmd->add_option("--repeats", a.repeats);
  cmd->add_option("--inner-lr", a.inner_lr);
}

void run_adapt(const CLI::App& cmd, const AdaptArgs& a, std::ostream& out) {
  const Method method = parse_method(a.method);
  if (a.k < 1 || a.repeats < 1) throw CliError("--k and --repeats must be >= 1");
  const ParameterSet params = load_input_checkpoint(a.checkpoint, "checkpoint");
  const EpisodeDataset eval = load_input_dataset(a.dataset, "dataset");
  check_dims(params, eval, a.dataset);
  const std::size_t bona = eval.count(BinaryLabel::kBonafide), spoof = eval.count(BinaryLabel::kSpoof);
  if (bona <= a.k || spoof <= a.k) {
    throw CliError("k=" + std::to_string(a.k) + " needs more than k records of each class; " + a.dataset + " has " +
                   std::to_string(bona) + " bonafide and " + std::to_string(spoof) + " spoof");
  }
  const fs::path dir = prepare_out_dir(a.common);

  std::vector<AdaptationOutcome> outcomes(a.repeats);
  parallel_for(a.repeats, a.common.threads, [&](std::size_t r) {
    outcomes[r] =
        adapt_and_evaluate(params, eval, method, a.k, a.steps, a.inner_lr, support_seed(a.common.seed, a.k, r));
  });
  std::string table = "repeat,eer,support_seed\n";
  std::vector<double> eers;
  for (std::size_t r = 0; r < a.repeats; ++r) {
    write_text(dir / ("scores_repeat" + std::to_string(r) + ".csv"), scores_to_csv(outcomes[r].trials));
    table += std::to_string(r) + ',' + format_double(outcomes[r].eer.eer) + ',' +
             std::to_string(outcomes[r].support_seed) + '\n';
    eers.push_back(outcomes[r].eer.eer);
    out << "repeat " << r << ": EER " << percent(outcomes[r].eer.eer) << '\n';
  }
  const auto s = summarize_repeats(eers);
  write_text(dir / "eer_by_repeat.csv", table);
  write_metadata(dir / "summary.txt", {{"method", a.method},
                                       {"k", std::to_string(a.k)},
                                       {"steps", std::to_string(a.steps)},
                                       {"repeats", std::to_string(a.repeats)},
                                       {"mean_eer", format_double(s.mean)},
                                       {"std_eer", format_double(s.std)}});
  write_manifest(dir, cmd, {});
  out << a.method << " k=" << a.k << ": EER " << percent(s.mean) << " +/- " << percent(s.std) << " over "
      << a.repeats << " repeats\n";
}

// ---------------------------------------------------------------------------

struct ShotsArgs {
  Common common;
  std::string method = "protonet";
  std::string checkpoint;
  std::string dataset;
  SweepConfig sweep;
};

void setup_shots(CLI::App* cmd, ShotsArgs& a) {
  add_common(cmd, a.common);
  cmd->add_option("--method", a.method)->check(CLI::IsMember({"protonet", "protomaml"}));
  cmd->add_option("--checkpoint", a.checkpoint)->required();
  cmd->add_option("--dataset", a.dataset, "Evaluation CSV")->required();
  cmd->add_option("--shots", a.sweep.shots, "Support sizes per class, ascending");
  cmd->add_option("--repeats", a.sweep.repeats);
  cmd->add_option("--steps", a.sweep.adapt_steps, "Inner-loop adaptation steps (protomaml)");
  cmd->add_option("--inner-lr", a.sweep.inner_lr);
  cmd->add_option("--protomaml-max-shots", a.sweep.protomaml_max_shots);
}

void print_summary(const SweepResult& r, std::ostream& out) {
  for (const auto& row : r.summary) {
    out << r.key_name << '=' << row.key << ": EER " << percent(row.mean_eer) << " +/- " << percent(row.std_eer)
        << '\n';
  }
}

void run_shots(const CLI::App& cmd, ShotsArgs& a, std::ostream& out) {
  a.sweep.method = parse_method(a.method);
  a.sweep.seed = a.common.seed;
  a.sweep.threads = a.common.threads;
  a.sweep.validate();
  const ParameterSet params = load_input_checkpoint(a.checkpoint, "checkpoint");
  const EpisodeDataset eval = load_input_dataset(a.dataset, "dataset");
  check_dims(params, eval, a.dataset);
  const fs::path dir = prepare_out_dir(a.common);
  const SweepResult r = run_shot_sweep(params, eval, a.sweep);
  write_text(dir / "sweep_shots_detail.csv", sweep_detail_csv(r));
  write_text(dir / "sweep_shots_summary.csv", sweep_summary_csv(r));
  std::string used;
  for (std::size_t k : a.sweep.effective_shots()) used += (used.empty() ? "" : " ") + std::to_string(k);
  write_manifest(dir, cmd, {{"effective_shots", used}});
  print_summary(r, out);
}

// ---------------------------------------------------------------------------

struct StepsArgs {
  Common common;
  std::string method = "protomaml";
  std::string checkpoint;
  std::string dataset;
  StepsSweepConfig sweep;
};

void setup_steps(CLI::App* cmd, StepsArgs& a) {
  add_common(cmd, a.common);
  cmd->add_option("--method", a.method)->check(CLI::IsMember({"protonet", "protomaml", "baseline"}));
  cmd->add_option("--checkpoint", a.checkpoint)->required();
  cmd->add_option("--dataset", a.dataset, "Evaluation CSV")->required();
  cmd->add_option("--k", a.sweep.k, "Support records per class");
  cmd->add_option("--steps", a.sweep.steps, "Inner-loop step counts to evaluate");
  cmd->add_option("--repeats", a.sweep.repeats);
  cmd->add_option("--inner-lr", a.sweep.inner_lr);
}

void run_steps(const CLI::App& cmd, StepsArgs& a, std::ostream& out) {
  a.sweep.method = parse_method(a.method);
  a.sweep.seed = a.common.seed;
  a.sweep.threads = a.common.threads;
  a.sweep.validate();
  const ParameterSet params = load_input_checkpoint(a.checkpoint, "checkpoint");
  const EpisodeDataset eval = load_input_dataset(a.dataset, "dataset");
  check_dims(params, eval, a.dataset);
  const fs::path dir = prepare_out_dir(a.common);
  const SweepResult r = run_steps_sweep(params, eval, a.sweep);
  write_text(dir / "sweep_steps_detail.csv", sweep_detail_csv(r));
  write_text(dir / "sweep_steps_summary.csv", sweep_summary_csv(r));
  write_manifest(dir, cmd, {});
  print_summary(r, out);
}

// ---------------------------------------------------------------------------

struct CompareArgs {
  Common common;
  std::string baseline;
  std::string protonet;
  std::string protomaml;
  std::vector<std::string> datasets;
  CompareConfig compare;
};

void setup_compare(CLI::App* cmd, CompareArgs& a) {
  add_common(cmd, a.common);
  cmd->add_option("--baseline-checkpoint", a.baseline)->required();
  cmd->add_option("--protonet-checkpoint", a.protonet)->required();
  cmd->add_option("--protomaml-checkpoint", a.protomaml)->required();
  cmd->add_option("--dataset", a.datasets, "Evaluation CSVs, as PATH or NAME=PATH")->required();
  cmd->add_option("--protonet-shots", a.compare.protonet_shots);
  cmd->add_option("--protomaml-shots", a.compare.protomaml_shots);
  cmd->add_option("--repeats", a.compare.repeats);
  cmd->add_option("--steps", a.compare.adapt_steps, "Inner-loop adaptation steps (protomaml)");
  cmd->add_option("--inner-lr", a.compare.inner_lr);
}

void run_compare(const CLI::App& cmd, CompareArgs& a, std::ostream& out) {
  if (a.compare.repeats < 1) throw CliError("--repeats must be >= 1");
  a.compare.seed = a.common.seed;
  a.compare.threads = a.common.threads;
  const ParameterSet base = load_input_checkpoint(a.baseline, "baseline checkpoint");
  const ParameterSet pn = load_input_checkpoint(a.protonet, "protonet checkpoint");
  const ParameterSet pm = load_input_checkpoint(a.protomaml, "protomaml checkpoint");
  std::vector<EpisodeDataset> sets;
  std::vector<std::string> names;
  for (const auto& spec : a.datasets) {
    const auto eq = spec.find('=');
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    names.push_back(eq == std::string::npos ? fs::path(path).stem().string() : spec.substr(0, eq));
    sets.push_back(load_input_dataset(path, "dataset"));
    check_dims(base, sets.back(), path);
  }
  const fs::path dir = prepare_out_dir(a.common);
  std::vector<NamedDataset> named;
  for (std::size_t i = 0; i < sets.size(); ++i) named.push_back({names[i], &sets[i]});
  const auto rows = compare_methods(base, pn, pm, named, a.compare);
  write_text(dir / "comparison.csv", comparison_csv(rows));
  const std::string table = comparison_table(rows);
  write_text(dir / "comparison.txt", table);
  write_manifest(dir, cmd, {});
  out << table;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot adaptation of spoofing detectors on embeddings", "metaspoof"};
  app.set_config("--config", "", "INI-style file with one [command] section per command");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  GenArgs gen;
  TrainArgs train;
  AdaptArgs adapt;
  ShotsArgs shots;
  StepsArgs steps;
  CompareArgs compare;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Write synthetic train/eval_seen/eval_unseen CSVs");
  CLI::App* train_cmd = app.add_subcommand("train", "Train protonet, protomaml or the supervised baseline");
  CLI::App* adapt_cmd = app.add_subcommand("adapt-eval", "Adapt on k-shot supports and report EER");
  CLI::App* shots_cmd = app.add_subcommand("sweep-shots", "EER against support size");
  CLI::App* steps_cmd = app.add_subcommand("sweep-steps", "EER against inner-loop steps (protomaml)");
  CLI::App* compare_cmd = app.add_subcommand("compare", "Comparison table of the three models");
  setup_gen(gen_cmd, gen);
  setup_train(train_cmd, train);
  setup_adapt(adapt_cmd, adapt);
  setup_shots(shots_cmd, shots);
  setup_steps(steps_cmd, steps);
  setup_compare(compare_cmd, compare);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*gen_cmd) run_gen(*gen_cmd, gen, out);
    if (*train_cmd) run_train(*train_cmd, train, out);
    if (*adapt_cmd) run_adapt(*adapt_cmd, adapt, out);
    if (*shots_cmd) run_shots(*shots_cmd, shots, out);
    if (*steps_cmd) run_steps(*steps_cmd, steps, out);
    if (*compare_cmd) run_compare(*compare_cmd, compare, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace metaspoof
