// pcred: split, train, eval, predict and synth subcommands.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pcred/config.h"
#include "pcred/corpus.h"
#include "pcred/errors.h"
#include "pcred/eval.h"
#include "pcred/pipeline.h"
#include "pcred/synth.h"

namespace fs = std::filesystem;
using namespace pcred;

namespace {

fs::path manifest_path(const fs::path& split_dir, int fold) {
  return split_dir / ("fold_" + std::to_string(fold) + ".json");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

fs::path checkpoint_dir(const RunConfig& config) {
  if (config.output_dir.empty()) throw ConfigError("output_dir is not set");
  return fs::path(config.output_dir) / ("fold_" + std::to_string(config.fold));
}

// --- split ---
struct SplitArgs {
  std::string corpus;
  int m = 5;
  int folds = 5;
  std::vector<std::uint64_t> seeds;
  std::string out = "splits";
};

int run_split(const SplitArgs& a) {
  const Corpus corpus = load_corpus(a.corpus);
  std::vector<std::uint64_t> seeds = a.seeds;
  if (seeds.empty()) {
    for (int i = 0; i < a.folds; ++i) seeds.push_back(static_cast<std::uint64_t>(i + 1));
  }
  const auto splits = make_splits(corpus.instances, corpus.labels, a.m, a.folds, seeds);
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const auto path = manifest_path(a.out, static_cast<int>(i));
    write_text(path, split_manifest_json(splits[i]));
    const auto& s = splits[i];
    std::cout << fmt::format(
        "{}: labels {}/{}/{} instances {}/{}/{}\n", path.string(),
        s.seen_labels.size(), s.validation_labels.size(), s.test_labels.size(),
        s.train.size(), s.validation.size(), s.test.size());
  }
  return 0;
}

// --- train ---
struct TrainArgs {
  std::string config;
  int fold = -1;
  std::vector<std::string> overrides;
};

int run_train(const TrainArgs& a) {
  RunConfig config = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
  for (const auto& o : a.overrides) config.apply_override(o);
  if (a.fold >= 0) config.fold = a.fold;
  config.validate();

  const Corpus corpus = load_corpus(config.corpus);
  const ZeroShotSplit split =
      load_split_manifest(manifest_path(config.split_dir, config.fold), corpus);
  const fs::path out = checkpoint_dir(config);
  fs::create_directories(out);

  auto tokenizer = make_tokenizer(config, corpus);
  auto model = make_model(config, *tokenizer);
  TrainData data{split.train, split.seen_labels, split.validation,
                 split.validation_labels};
  std::vector<EpochRecord> history;
  auto on_best = [&](const Model& m, const EpochRecord& r) {
    BestRecord best{r.epoch, r.validation_score.value_or(0.0), config.seed, {}};
    save_checkpoint(out, m, *tokenizer, config, best);
    spdlog::info("saved best checkpoint (epoch {}) to {}", r.epoch, out.string());
  };
  const TrainResult result = train(*model, *tokenizer, data, config, on_best);

  // Record the full history next to the best weights.
  Checkpoint ck = load_checkpoint(out);
  ck.best.history = result.history;
  save_checkpoint(out, *ck.model, *ck.tokenizer, ck.config, ck.best);
  std::cout << fmt::format("best epoch {} validation score {:.6f} ({} epochs{})\n",
                           result.best_epoch, result.best_score, result.epochs_run,
                           result.stopped_early ? ", stopped early" : "");
  return 0;
}

// --- eval ---
struct EvalArgs {
  std::string checkpoint;
  std::vector<int> folds;
  std::string split_dir;
  std::string corpus;
  std::string out;
  std::string partition = "test";
  bool random_selector = false;
  std::uint64_t random_seed = 1;
};

int run_eval(const EvalArgs& a) {
  std::vector<int> folds = a.folds;
  if (folds.empty()) folds.push_back(-1);
  std::vector<ScoreReport> reports;
  std::vector<TableRow> rows;
  for (int fold : folds) {
    // A checkpoint root holding fold_<i> directories, or one fold directory.
    fs::path dir = a.checkpoint;
    if (fold >= 0 && fs::is_directory(dir / ("fold_" + std::to_string(fold)))) {
      dir /= "fold_" + std::to_string(fold);
    }
    Checkpoint ck = load_checkpoint(dir);
    const int f = fold >= 0 ? fold : ck.config.fold;
    const Corpus corpus = load_corpus(a.corpus.empty() ? ck.config.corpus : a.corpus);
    const fs::path split_dir = a.split_dir.empty() ? ck.config.split_dir : a.split_dir;
    const ZeroShotSplit split = load_split_manifest(manifest_path(split_dir, f), corpus);

    const auto& instances = a.partition == "validation" ? split.validation
                            : a.partition == "train"    ? split.train
                                                        : split.test;
    const auto& labels = a.partition == "validation" ? split.validation_labels
                         : a.partition == "train"    ? split.seen_labels
                                                     : split.test_labels;
    Rng random(a.random_seed);
    const auto result = evaluate(*ck.model, *ck.tokenizer, instances, labels,
                                 ck.config, a.random_selector ? &random : nullptr);
    reports.push_back(result.report);
    rows.push_back({"fold " + std::to_string(f), split.m, result.report});
    if (!a.out.empty()) {
      const fs::path out = fs::path(a.out) / ("fold_" + std::to_string(f));
      write_text(out / "report.json", report_json(result.report));
      write_text(out / "report.txt", format_table(std::span(&rows.back(), 1)));
      std::ofstream preds(out / "predictions.jsonl");
      write_predictions(preds, instances, result.predictions);
    }
  }
  if (reports.size() > 1) {
    const auto mean = average_folds(reports, static_cast<int>(reports.size()));
    rows.push_back({"mean", rows.front().m, mean});
    if (!a.out.empty()) {
      write_text(fs::path(a.out) / "report.json", report_json(mean));
    }
  }
  if (!a.out.empty()) write_text(fs::path(a.out) / "report.txt", format_table(rows));
  std::cout << format_table(rows);
  return 0;
}

// --- predict ---
struct PredictArgs {
  std::string checkpoint;
  std::string input;
  std::string labels;
  std::string output;
  std::string attention_dir;
  std::vector<std::string> overrides;
};

int run_predict(const PredictArgs& a) {
  if (a.labels.empty()) throw ConfigError("a relation label file is required (--labels)");
  Checkpoint ck = load_checkpoint(a.checkpoint);
  for (const auto& o : a.overrides) ck.config.apply_override(o);
  ck.config.validate();
  const auto labels = load_labels(a.labels);

  std::ifstream in(a.input);
  if (!in) throw IoError("cannot open " + a.input);
  const auto sentences = parse_sentences(in);

  const auto result = evaluate(*ck.model, *ck.tokenizer, sentences, labels, ck.config);
  if (a.output.empty()) {
    write_predictions(std::cout, sentences, result.predictions);
  } else {
    std::ofstream out(a.output);
    if (!out) throw IoError("cannot write " + a.output);
    write_predictions(out, sentences, result.predictions);
  }

  if (!a.attention_dir.empty()) {
    const auto candidates = all_candidates(labels);
    const InferenceConfig inference{ck.config.boundary_threshold,
                                    ck.config.max_span_length};
    for (const auto& s : sentences) {
      const auto group =
          build_group(s, candidates, *ck.tokenizer, ck.config.max_seq_length);
      std::vector<nn::AttentionRecord> trace;
      ck.model->predict(group, ck.config.relation_threshold, inference, &trace);
      write_text(fs::path(a.attention_dir) / (s.id + ".json"),
                 attention_json(s, group, *ck.tokenizer, trace));
    }
  }
  return 0;
}

// --- synth ---
struct SynthArgs {
  int count = 50;
  std::uint64_t seed = 1;
  std::string out;
  std::string relations = "seen";
  double multi_fraction = 0.3;
};

int run_synth(const SynthArgs& a) {
  Rng rng(a.seed);
  std::vector<synth::Template> templates;
  if (a.relations != "heldout") templates = synth::seen_templates();
  if (a.relations != "seen") {
    for (auto& t : synth::heldout_templates()) templates.push_back(std::move(t));
  }
  if (a.relations == "all") {
    for (auto& t : synth::extended_templates()) templates.push_back(std::move(t));
  }
  synth::Options options;
  options.multi_fraction = a.multi_fraction;
  if (a.relations == "heldout") options.id_prefix = "heldout";
  const auto instances = synth::generate(templates, a.count, rng, options);
  if (a.out.empty()) {
    write_corpus(std::cout, instances);
  } else {
    write_corpus(fs::path(a.out), instances);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot relation triplet extraction"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Write zero-shot fold manifests");
  split->add_option("--corpus", split_args.corpus, "Corpus JSONL")->required();
  split->add_option("--m", split_args.m, "Unseen test labels per fold");
  split->add_option("--folds", split_args.folds, "Number of folds");
  split->add_option("--seeds", split_args.seeds, "One seed per fold")->delimiter(',');
  split->add_option("--out", split_args.out, "Manifest directory");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train one fold");
  train_cmd->add_option("--config", train_args.config, "Run configuration file");
  train_cmd->add_option("--fold", train_args.fold, "Fold index");
  train_cmd->add_option("--set", train_args.overrides, "key=value override");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a fold");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint directory")
      ->required();
  eval_cmd->add_option("--fold", eval_args.folds, "Fold index (repeatable)")
      ->delimiter(',');
  eval_cmd->add_option("--split-dir", eval_args.split_dir, "Manifest directory");
  eval_cmd->add_option("--corpus", eval_args.corpus, "Corpus JSONL");
  eval_cmd->add_option("--out", eval_args.out, "Report directory");
  eval_cmd->add_option("--partition", eval_args.partition, "test | validation | train")
      ->check(CLI::IsMember({"test", "validation", "train"}));
  eval_cmd->add_flag("--random-selector", eval_args.random_selector,
                     "Replace the selector by uniform random probabilities");
  eval_cmd->add_option("--random-seed", eval_args.random_seed, "Seed for --random-selector");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Extract triplets from sentences");
  predict->add_option("--checkpoint", predict_args.checkpoint, "Checkpoint directory")
      ->required();
  predict->add_option("--input", predict_args.input, "Sentences JSONL")->required();
  predict->add_option("--labels", predict_args.labels, "Relation labels, one per line");
  predict->add_option("--output", predict_args.output, "Predictions JSONL (default stdout)");
  predict->add_option("--attention-dir", predict_args.attention_dir,
                      "Write attention maps per sentence");
  predict->add_option("--set", predict_args.overrides, "key=value override");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a templated corpus");
  synth_cmd->add_option("--count", synth_args.count, "Number of sentences");
  synth_cmd->add_option("--seed", synth_args.seed, "Generator seed");
  synth_cmd->add_option("--out", synth_args.out, "Output JSONL (default stdout)");
  synth_cmd->add_option("--relations", synth_args.relations, "seen (6 relations), heldout (2) or all (14)")
      ->check(CLI::IsMember({"seen", "heldout", "all"}));
  synth_cmd->add_option("--multi-fraction", synth_args.multi_fraction,
                        "Fraction of two-triplet sentences");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*split) return run_split(split_args);
    if (*train_cmd) return run_train(train_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*predict) return run_predict(predict_args);
    if (*synth_cmd) return run_synth(synth_args);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
