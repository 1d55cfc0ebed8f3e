#include "pcred/eval.h"

#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "pcred/errors.h"

namespace pcred {

namespace {

using TripletKey = std::tuple<WordSpan, WordSpan, std::string>;

TripletKey key_of(const Triplet& t) { return {t.head, t.tail, t.relation}; }
TripletKey key_of(const PredictedTriplet& t) {
  return {t.head, t.tail, t.relation.text};
}

void check_known_ids(const Predictions& predictions,
                     std::span<const Instance> gold) {
  std::set<std::string> ids;
  for (const Instance& i : gold) ids.insert(i.id);
  for (const auto& [id, triplets] : predictions) {
    if (!ids.count(id)) throw InputError("prediction for unknown instance " + id);
  }
}

const std::vector<PredictedTriplet>& lookup(const Predictions& predictions,
                                            const std::string& id) {
  static const std::vector<PredictedTriplet> kNone;
  auto it = predictions.find(id);
  return it == predictions.end() ? kNone : it->second;
}

void finish(ScoreReport& r) {
  r.acc = r.single_sentences ? static_cast<double>(r.single_correct) /
                                   static_cast<double>(r.single_sentences)
                             : 0.0;
  const PrecisionRecall t = precision_recall(r.triplet_counts);
  r.precision = t.precision;
  r.recall = t.recall;
  r.f1 = t.f1;
}

void score_single(ScoreReport& r, const Instance& instance,
                  const std::vector<PredictedTriplet>& predicted) {
  ++r.single_sentences;
  auto best = top1(predicted);
  if (!best) return;
  for (const Triplet& t : instance.triplets) {
    if (key_of(t) == key_of(*best)) {
      ++r.single_correct;
      return;
    }
  }
}

void score_multi(ScoreReport& r, const Instance& instance,
                 const std::vector<PredictedTriplet>& predicted) {
  ++r.multi_sentences;
  std::set<TripletKey> gold;
  for (const Triplet& t : instance.triplets) gold.insert(key_of(t));
  std::set<TripletKey> pred;
  for (const PredictedTriplet& t : predicted) pred.insert(key_of(t));
  for (const TripletKey& k : pred) {
    if (gold.count(k)) {
      ++r.triplet_counts.tp;
    } else {
      ++r.triplet_counts.fp;
    }
  }
  for (const TripletKey& k : gold) {
    if (!pred.count(k)) ++r.triplet_counts.fn;
  }
}

}  // namespace

PrecisionRecall precision_recall(const Counts& c) {
  PrecisionRecall out;
  if (c.tp + c.fp > 0) out.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
  if (c.tp + c.fn > 0) out.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
  if (out.precision + out.recall > 0) {
    out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

ScoreReport score(const Predictions& predictions, std::span<const Instance> gold,
                  SplitKind kind) {
  check_known_ids(predictions, gold);
  ScoreReport r;
  for (const Instance& instance : gold) {
    const auto& predicted = lookup(predictions, instance.id);
    if (kind == SplitKind::kSingle) {
      score_single(r, instance, predicted);
    } else {
      score_multi(r, instance, predicted);
    }
  }
  finish(r);
  return r;
}

ScoreReport score_partition(const Predictions& predictions,
                            std::span<const Instance> gold) {
  check_known_ids(predictions, gold);
  ScoreReport r;
  for (const Instance& instance : gold) {
    const auto& predicted = lookup(predictions, instance.id);
    if (instance.triplets.size() == 1) {
      score_single(r, instance, predicted);
    } else {
      score_multi(r, instance, predicted);
    }
  }
  finish(r);
  return r;
}

void add_relation_scores(ScoreReport& report,
                         const RelationSelections& selections,
                         std::span<const Instance> gold) {
  Counts c;
  for (const Instance& instance : gold) {
    const std::vector<std::string> relations = instance.relations();
    std::set<std::string> truth(relations.begin(), relations.end());
    std::set<std::string> chosen;
    if (auto it = selections.find(instance.id); it != selections.end()) {
      chosen.insert(it->second.begin(), it->second.end());
    }
    for (const std::string& r : chosen) {
      if (truth.count(r)) {
        ++c.tp;
      } else {
        ++c.fp;
      }
    }
    for (const std::string& r : truth) {
      if (!chosen.count(r)) ++c.fn;
    }
  }
  report.relation_counts = c;
  const PrecisionRecall pr = precision_recall(c);
  report.relation_precision = pr.precision;
  report.relation_recall = pr.recall;
  report.relation_f1 = pr.f1;
}

ScoreReport average_folds(std::span<const ScoreReport> reports, int n_folds) {
  if (static_cast<int>(reports.size()) != n_folds || n_folds < 1) {
    throw ConfigError("expected " + std::to_string(n_folds) +
                      " fold reports, got " + std::to_string(reports.size()));
  }
  ScoreReport mean;
  const double n = static_cast<double>(n_folds);
  for (const ScoreReport& r : reports) {
    mean.acc += r.acc;
    mean.precision += r.precision;
    mean.recall += r.recall;
    mean.f1 += r.f1;
    mean.relation_precision += r.relation_precision;
    mean.relation_recall += r.relation_recall;
    mean.relation_f1 += r.relation_f1;
    mean.single_sentences += r.single_sentences;
    mean.single_correct += r.single_correct;
    mean.multi_sentences += r.multi_sentences;
    mean.triplet_counts.tp += r.triplet_counts.tp;
    mean.triplet_counts.fp += r.triplet_counts.fp;
    mean.triplet_counts.fn += r.triplet_counts.fn;
    mean.relation_counts.tp += r.relation_counts.tp;
    mean.relation_counts.fp += r.relation_counts.fp;
    mean.relation_counts.fn += r.relation_counts.fn;
  }
  mean.acc /= n;
  mean.precision /= n;
  mean.recall /= n;
  mean.f1 /= n;
  mean.relation_precision /= n;
  mean.relation_recall /= n;
  mean.relation_f1 /= n;
  mean.folds.assign(reports.begin(), reports.end());
  for (ScoreReport& f : mean.folds) f.folds.clear();
  return mean;
}

PrecisionRecall random_selector_baseline(std::span<const std::uint8_t> gold_mask,
                                         double threshold, Rng& rng,
                                         int trials) {
  if (trials < 1) throw ConfigError("trials must be at least 1");
  Counts c;
  for (int t = 0; t < trials; ++t) {
    for (std::uint8_t gold : gold_mask) {
      const bool chosen = rng.uniform() >= threshold;
      if (chosen && gold) ++c.tp;
      if (chosen && !gold) ++c.fp;
      if (!chosen && gold) ++c.fn;
    }
  }
  return precision_recall(c);
}

namespace {

nlohmann::json to_json(const ScoreReport& r) {
  nlohmann::json j;
  j["acc"] = r.acc;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["relation_precision"] = r.relation_precision;
  j["relation_recall"] = r.relation_recall;
  j["relation_f1"] = r.relation_f1;
  j["single_sentences"] = r.single_sentences;
  j["single_correct"] = r.single_correct;
  j["multi_sentences"] = r.multi_sentences;
  j["triplets"] = {{"tp", r.triplet_counts.tp},
                   {"fp", r.triplet_counts.fp},
                   {"fn", r.triplet_counts.fn}};
  j["relations"] = {{"tp", r.relation_counts.tp},
                    {"fp", r.relation_counts.fp},
                    {"fn", r.relation_counts.fn}};
  if (!r.folds.empty()) {
    j["folds"] = nlohmann::json::array();
    for (const ScoreReport& f : r.folds) j["folds"].push_back(to_json(f));
  }
  return j;
}

}  // namespace

std::string report_json(const ScoreReport& report) {
  return to_json(report).dump(2) + "\n";
}

std::string format_table(std::span<const TableRow> rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %-6s %8s | %8s %8s %8s | %8s %8s %8s\n",
                "Dataset", "Labels", "Acc.", "Pre.", "Rec.", "F1", "RelPre.",
                "RelRec.", "RelF1");
  out << line;
  out << std::string(std::string_view(line).size() - 1, '-') << '\n';
  for (const TableRow& row : rows) {
    const ScoreReport& r = row.report;
    std::snprintf(line, sizeof(line),
                  "%-12s m=%-4d %8.2f | %8.2f %8.2f %8.2f | %8.2f %8.2f %8.2f\n",
                  row.dataset.c_str(), row.m, 100 * r.acc, 100 * r.precision,
                  100 * r.recall, 100 * r.f1, 100 * r.relation_precision,
                  100 * r.relation_recall, 100 * r.relation_f1);
    out << line;
  }
  return out.str();
}

}  // namespace pcred
