#ifndef PCRED_EVAL_H_
#define PCRED_EVAL_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pcred/corpus.h"
#include "pcred/infer.h"
#include "pcred/rng.h"

namespace pcred {

// Predicted triplets keyed by instance id.
using Predictions = std::map<std::string, std::vector<PredictedTriplet>>;
// Relations the selector kept, keyed by instance id.
using RelationSelections = std::map<std::string, std::vector<std::string>>;

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// P = tp / (tp + fp), R = tp / (tp + fn), each 0 when undefined;
// F1 = 2PR / (P + R), 0 when P + R = 0.
PrecisionRecall precision_recall(const Counts& counts);

struct ScoreReport {
  double acc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double relation_precision = 0.0;
  double relation_recall = 0.0;
  double relation_f1 = 0.0;
  long single_sentences = 0;
  long single_correct = 0;
  long multi_sentences = 0;
  Counts triplet_counts;
  Counts relation_counts;
  std::vector<ScoreReport> folds;  // filled by average_folds
};

enum class SplitKind { kSingle, kMulti };

// Single: top-1 accuracy (exact head span, tail span and relation text).
// Multi: micro precision / recall / F1 over exact triplet matches.
// Predictions for ids absent from `gold` raise InputError; gold instances
// without predictions count as predicting nothing.
ScoreReport score(const Predictions& predictions, std::span<const Instance> gold,
                  SplitKind kind);

// Accuracy over the single-triplet sentences and micro scores over the
// multi-triplet sentences of one partition.
ScoreReport score_partition(const Predictions& predictions,
                            std::span<const Instance> gold);

// Micro relation-selection scores over (instance, relation) pairs.
void add_relation_scores(ScoreReport& report,
                         const RelationSelections& selections,
                         std::span<const Instance> gold);

// Arithmetic mean of every metric (precision and recall are averaged, not
// re-derived from pooled counts). Throws ConfigError unless
// reports.size() == n_folds.
ScoreReport average_folds(std::span<const ScoreReport> reports, int n_folds);

// Replaces the selector by uniform(0, 1) probabilities: a candidate passes
// iff u >= threshold. Precision and recall are pooled over all trials.
PrecisionRecall random_selector_baseline(std::span<const std::uint8_t> gold_mask,
                                         double threshold, Rng& rng,
                                         int trials);

std::string report_json(const ScoreReport& report);

struct TableRow {
  std::string dataset;
  int m = 0;
  ScoreReport report;
};

// Plain-text results table: Acc. on single-triplet sentences and P / R / F1
// on multi-triplet sentences, in percent.
std::string format_table(std::span<const TableRow> rows);

}  // namespace pcred

#endif  // PCRED_EVAL_H_
