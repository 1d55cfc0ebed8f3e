// Acceptance gate: prints one PASS/FAIL line per criterion. The exit code is
// the number of failed gating criteria; directional criteria are reported but
// do not gate. Pass criterion names as arguments to run a subset.

#include <algorithm>
#include <cstring>
#include <numeric>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "oracles.h"
#include "pcred/pipeline.h"
#include "pcred/synth.h"

using namespace pcred;
using ag::Matrix;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  return m;
}

BoundaryDistributions random_distributions(Rng& rng, int n, int l) {
  BoundaryDistributions d;
  for (auto& h : d.heads) {
    h = random_matrix(rng, n, l).array() + 1e-3;
    for (int q = 0; q < n; ++q) h.row(q) /= h.row(q).sum();
  }
  return d;
}

BoundaryDistributions permute_queries(const BoundaryDistributions& d,
                                      const std::vector<int>& perm) {
  BoundaryDistributions out = d;
  for (int h = 0; h < kBoundaryHeads; ++h) {
    for (std::size_t q = 0; q < perm.size(); ++q) {
      out.heads[h].row(q) = d.heads[h].row(perm[q]);
    }
  }
  return out;
}

double matched_entity_loss(const BoundaryDistributions& d,
                           const std::vector<Quadruple>& gold, int n) {
  const GoldBoundarySet padded = pad_gold(gold, n);
  const Assignment a = hungarian(cost_matrix(d, padded));
  const std::vector<BoundaryDistributions> ds = {d};
  return entity_loss(ds, std::vector<GoldBoundarySet>{padded}, std::vector<Assignment>{a});
}

// --- criteria ---

Outcome hungarian_oracle() {
  Rng rng(2024);
  const auto start = Clock::now();
  long mismatches = 0, total = 0;
  for (int n = 2; n <= 7; ++n) {
    for (int trial = 0; trial < 1000; ++trial) {
      Matrix cost = -4.0 * random_matrix(rng, n, n);
      if (trial % 10 == 0) cost = cost.array().round();  // integer ties
      const Assignment a = hungarian(cost);
      if (a.total_cost != testing::brute_force_min_cost(cost)) ++mismatches;
      ++total;
    }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 30.0,
          fmt::format("{} matrices, {} mismatches, {:.2f} s", total, mismatches, secs)};
}

Outcome entity_loss_invariance() {
  Rng rng(77);
  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    const int n = 4 + static_cast<int>(rng.below(3));
    const int l = 8 + static_cast<int>(rng.below(20));
    const int k = 1 + static_cast<int>(rng.below(n));
    const auto d = random_distributions(rng, n, l);
    std::vector<Quadruple> gold;
    for (int g = 0; g < k; ++g) {
      auto pos = [&] { return 1 + static_cast<int>(rng.below(l - 1)); };
      gold.push_back({pos(), pos(), pos(), pos()});
    }
    const double base = matched_entity_loss(d, gold, n);
    std::vector<Quadruple> shuffled = gold;
    rng.shuffle(std::span(shuffled));
    worst = std::max(worst, std::abs(matched_entity_loss(d, shuffled, n) - base));
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span(perm));
    worst = std::max(worst,
                     std::abs(matched_entity_loss(permute_queries(d, perm), shuffled, n) - base));
  }
  return {worst < 1e-6, fmt::format("200 cases, max |change| {:.3e}", worst)};
}

Outcome gradient_check() {
  Rng data_rng(5);
  const auto corpus = synth::generate(synth::seen_templates(), 12, data_rng,
                                      synth::Options{1.0, "g"});
  const Instance& instance = corpus[0];
  LabelSet labels;
  for (const auto& i : corpus) {
    for (const auto& t : i.triplets) labels.add(t.relation);
  }
  Corpus c{corpus, labels};
  RunConfig config;  // tiny encoder, d = 16
  auto tok = make_tokenizer(config, c);
  auto model = make_model(config, *tok);
  Rng rng(6);
  const std::vector<AugmentedGroup> groups = {build_group(
      instance, sample_candidates(instance, labels.labels(), 5, rng), *tok, 100)};
  const std::vector<const Instance*> batch = {&instance};
  const double alpha = 0.5;

  // Move away from the small-init regime where attention gradients vanish
  // below finite-difference round-off.
  for (const auto& p : model->parameters().parameters()) {
    ag::Var var = p.var;
    for (Eigen::Index i = 0; i < var.value().size(); ++i) {
      var.mutable_value().data()[i] += 0.3 * rng.normal();
    }
  }

  model->parameters().zero_grad();
  ag::backward(batch_loss(*model, batch, groups, alpha, 1.0));
  auto loss_value = [&] {
    ag::NoGradGuard guard;
    return batch_loss(*model, batch, groups, alpha, 1.0).scalar();
  };

  const double h = 1e-5;
  double worst = 0.0;
  std::string worst_name;
  int tensors = 0;
  for (const auto& p : model->parameters().parameters()) {
    ag::Var var = p.var;
    const Matrix analytic = var.grad().size() ? var.grad() : Matrix::Zero(var.rows(), var.cols());
    Matrix numeric(var.rows(), var.cols());
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      double& w = var.mutable_value().data()[i];
      const double saved = w;
      w = saved + h;
      const double up = loss_value();
      w = saved - h;
      const double down = loss_value();
      w = saved;
      numeric.data()[i] = (up - down) / (2 * h);
    }
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-8});
    const double rel = (analytic - numeric).norm() / scale;
    if (std::getenv("PCRED_GRADCHECK_VERBOSE")) {
      std::printf("  %-55s analytic %.3e numeric %.3e rel %.3e\n", p.name.c_str(),
                  analytic.norm(), numeric.norm(), rel);
    }
    if (rel > worst) {
      worst = rel;
      worst_name = p.name;
    }
    ++tensors;
  }
  return {worst < 1e-4, fmt::format("{} tensors, max relative error {:.3e} ({})", tensors,
                                    worst, worst_name)};
}

Outcome boundary_filter() {
  const InferenceConfig cfg;  // beta 0.4, max span 15
  const int s = 30;
  auto check = [&](Quadruple q, double score) {
    return check_boundary(DecodedBoundary{q, score}, s, cfg);
  };
  std::vector<std::string> failures;
  auto expect = [&](const char* what, BoundaryCheck got, BoundaryCheck want) {
    if (got != want) failures.push_back(fmt::format("{}: {}", what, to_string(got)));
  };
  expect("start>end", check({5, 3, 7, 8}, 0.9), BoundaryCheck::kStartAfterEnd);
  expect("end>=length", check({2, 3, 7, s + 1}, 0.9), BoundaryCheck::kOutsideSentence);
  expect("span>15", check({1, 16, 20, 21}, 0.9), BoundaryCheck::kSpanTooLong);
  expect("score<beta", check({2, 3, 7, 8}, 0.39), BoundaryCheck::kBelowThreshold);
  expect("all pass", check({2, 3, 7, 8}, 0.40), BoundaryCheck::kValid);

  // Monotonicity and post-hoc validity on random decoder outputs.
  const auto tok = testing::example_tokenizer();
  const auto instance = testing::example_instance();
  const auto group = build_group(
      instance, std::vector<RelationLabel>{{0, "member of political party"}}, tok, 100);
  Rng rng(9);
  long monotone_violations = 0, invalid_emitted = 0;
  for (int trial = 0; trial < 200; ++trial) {
    BoundarySet set;
    BoundaryDistributions d;
    for (auto& head : d.heads) {
      head = Matrix::Zero(4, group.max_length);
      for (int q = 0; q < 4; ++q) {
        for (int p = 0; p <= group.sentence_token_count[0]; ++p) {
          head(q, p) = std::pow(rng.uniform(), 6.0);
        }
        head.row(q) /= head.row(q).sum();
      }
    }
    set.relations.push_back(d);
    const RelationDecision decision{{1.0}, {1}, {0}};
    std::size_t previous = SIZE_MAX;
    for (int k = 1; k <= 9; ++k) {
      const InferenceConfig c{k / 10.0, 15};
      const auto out = extract(decision, set, group, c);
      if (out.size() > previous) ++monotone_violations;
      previous = out.size();
      for (const auto& t : out) {
        if (t.head.start > t.head.end || t.tail.start > t.tail.end ||
            t.score < c.boundary_threshold) {
          ++invalid_emitted;
        }
      }
      for (int q = 0; q < 4; ++q) {
        const DecodedBoundary b = decode_query(d, q);
        const auto verdict = check_boundary(b, group.sentence_token_count[0], c);
        const bool survives = verdict == BoundaryCheck::kValid;
        const bool by_hand = b.positions.head_start <= b.positions.head_end &&
                             b.positions.tail_start <= b.positions.tail_end &&
                             b.positions.head_start >= 1 && b.positions.tail_start >= 1 &&
                             b.positions.head_end <= group.sentence_token_count[0] &&
                             b.positions.tail_end <= group.sentence_token_count[0] &&
                             b.positions.head_end - b.positions.head_start < 15 &&
                             b.positions.tail_end - b.positions.tail_start < 15 &&
                             b.score >= c.boundary_threshold;
        if (survives != by_hand) ++invalid_emitted;
      }
    }
  }
  const bool pass = failures.empty() && monotone_violations == 0 && invalid_emitted == 0;
  std::string detail = fmt::format(
      "5 constructed cases, {} wrong; beta 0.1..0.9 monotone violations {}; "
      "post-hoc violations {}",
      failures.size(), monotone_violations, invalid_emitted);
  for (const auto& f : failures) detail += "; " + f;
  return {pass, detail};
}

Outcome relation_filter() {
  Rng rng(13);
  long mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int g = 1 + static_cast<int>(rng.below(8));
    std::vector<Matrix> rows;
    std::vector<std::uint8_t> mask;
    for (int r = 0; r < g; ++r) {
      rows.push_back(random_matrix(rng, 5 + rng.below(10), 16));
      mask.push_back(static_cast<std::uint8_t>(rng.below(2)));
    }
    const auto kept = filter_rows(rows, mask);
    const auto idx = kept_indices(mask);
    if (kept.size() != idx.size()) ++mismatches;
    for (std::size_t k = 0; k < kept.size() && k < idx.size(); ++k) {
      const Matrix& a = kept[k];
      const Matrix& b = rows[idx[k]];
      if (a.rows() != b.rows() ||
          std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) != 0) {
        ++mismatches;
      }
    }
  }
  // Running example: probabilities [0.9, 0.3, 0.6] over the three candidates.
  const std::vector<std::string> candidates = {"member of political party", "position held",
                                               "country of citizenship"};
  const std::vector<double> probs = {0.9, 0.3, 0.6};
  const auto mask = make_mask(probs, MaskMode::kInfer, {}, 0.5);
  const auto kept = filter_rows(candidates, mask);
  const bool table_ok = mask == std::vector<std::uint8_t>{1, 0, 1} &&
                        kept == std::vector<std::string>{"member of political party",
                                                         "country of citizenship"};
  return {mismatches == 0 && table_ok,
          fmt::format("200 random filters, {} mismatches; running example mask [{},{},{}] "
                      "keeps {} rows",
                      mismatches, mask[0], mask[1], mask[2], kept.size())};
}

Outcome metric_oracle() {
  Rng rng(31);
  const RelationLabel labels[3] = {{0, "a"}, {1, "b"}, {2, "c"}};
  int mismatches = 0;
  for (int config = 0; config < 50; ++config) {
    std::vector<Instance> gold;
    Predictions preds;
    const int n = 1 + static_cast<int>(rng.below(12));
    for (int i = 0; i < n; ++i) {
      Instance inst;
      inst.id = "s" + std::to_string(i);
      inst.words.assign(8, "w");
      const int k = 2 + static_cast<int>(rng.below(3));
      auto span = [&] {
        const int s = static_cast<int>(rng.below(8));
        return WordSpan{s, s + static_cast<int>(rng.below(8 - s))};
      };
      for (int t = 0; t < k; ++t) {
        inst.triplets.push_back({span(), span(), labels[rng.below(3)].text});
      }
      auto& p = preds[inst.id];
      for (const auto& t : inst.triplets) {
        if (rng.below(3)) {
          p.push_back({t.head, t.tail, labels[t.relation[0] - 'a'], rng.uniform()});
        }
      }
      const int extra = static_cast<int>(rng.below(3));
      for (int e = 0; e < extra; ++e) {
        p.push_back({span(), span(), labels[rng.below(3)], rng.uniform()});
      }
      if (p.empty() && rng.below(2)) preds.erase(inst.id);
      gold.push_back(std::move(inst));
    }
    const ScoreReport r = score(preds, gold, SplitKind::kMulti);
    const auto o = testing::count_matches(preds, gold);
    if (r.triplet_counts.tp != o.tp || r.triplet_counts.fp != o.fp ||
        r.triplet_counts.fn != o.fn || r.f1 != testing::oracle_f1(o)) {
      ++mismatches;
    }
  }
  // Hand example.
  const std::vector<Instance> hand = {
      Instance{"s1", {"a", "b", "c", "d"}, {{{0, 0}, {1, 1}, "a"}, {{2, 2}, {3, 3}, "b"}}},
      Instance{"s2", {"a", "b", "c", "d"}, {{{0, 0}, {3, 3}, "a"}}}};
  Predictions hp;
  hp["s1"] = {{{0, 0}, {1, 1}, labels[0], 0.5}};
  hp["s2"] = {{{0, 0}, {3, 3}, labels[0], 0.5}, {{1, 1}, {2, 2}, labels[1], 0.5}};
  const ScoreReport h = score(hp, hand, SplitKind::kMulti);
  const bool hand_ok = std::abs(h.precision - 2.0 / 3) < 1e-12 &&
                       std::abs(h.recall - 2.0 / 3) < 1e-12 &&
                       std::abs(h.f1 - 2.0 / 3) < 1e-12;
  return {mismatches == 0 && hand_ok,
          fmt::format("50 configurations, {} mismatches; hand example P={:.4f} R={:.4f} "
                      "F1={:.4f}",
                      mismatches, h.precision, h.recall, h.f1)};
}

Outcome random_baseline() {
  // Gold masks of the held-out synthetic groups with every label as candidate.
  Rng data_rng(41);
  const auto templates = synth::seen_templates();
  const auto corpus = synth::generate(templates, 60, data_rng);
  std::vector<RelationLabel> labels;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    labels.push_back({static_cast<int>(i), templates[i].relation});
  }
  std::vector<std::uint8_t> masks;
  for (const auto& inst : corpus) {
    const auto rels = inst.relations();
    for (const auto& l : labels) {
      masks.push_back(std::find(rels.begin(), rels.end(), l.text) != rels.end());
    }
  }
  Rng rng(42);
  const auto pr = random_selector_baseline(masks, 0.5, rng, 1000);
  return {pr.recall >= 0.45 && pr.recall <= 0.55,
          fmt::format("delta 0.5, 1000 trials over {} candidates: recall {:.4f}, "
                      "precision {:.4f}",
                      masks.size(), pr.recall, pr.precision)};
}

// Shared by the overfit and zero-shot criteria.
struct SmokeRun {
  bool done = false;
  double seconds = 0.0;
  ScoreReport train_report;
  ScoreReport heldout_report;
};

SmokeRun& smoke_run() {
  static SmokeRun run;
  if (run.done) return run;
  Rng seen_rng(7), heldout_rng(99);
  const auto train_set = synth::generate(synth::seen_templates(), 50, seen_rng);
  const auto heldout = synth::generate(synth::heldout_templates(), 40, heldout_rng,
                                       synth::Options{0.3, "heldout"});
  LabelSet seen, unseen;
  for (const auto& i : train_set) {
    for (const auto& t : i.triplets) seen.add(t.relation);
  }
  for (const auto& i : heldout) {
    for (const auto& t : i.triplets) unseen.add(t.relation);
  }
  Corpus all;
  all.instances = train_set;
  all.instances.insert(all.instances.end(), heldout.begin(), heldout.end());
  for (const auto& l : seen.labels()) all.labels.add(l.text);
  for (const auto& l : unseen.labels()) all.labels.add(l.text);

  RunConfig config;  // tiny encoder
  config.loss_weight = 0.5;
  config.max_epochs = 200;
  config.batch_size = 8;
  config.learning_rate = 1e-2;
  auto tok = make_tokenizer(config, all);
  auto model = make_model(config, *tok);
  const TrainData data{train_set, seen.labels(), {}, {}};
  const auto start = Clock::now();
  train(*model, *tok, data, config);
  run.seconds = seconds_since(start);
  run.train_report = evaluate(*model, *tok, train_set, seen.labels(), config).report;
  run.heldout_report = evaluate(*model, *tok, heldout, unseen.labels(), config).report;
  run.done = true;
  return run;
}

Outcome overfit_smoke() {
  const SmokeRun& run = smoke_run();
  const auto& r = run.train_report;
  return {r.f1 >= 0.95 && run.seconds < 600.0,
          fmt::format("50 sentences ({} multi-triplet), 6 relations, 200 epochs in {:.1f} s: "
                      "multi F1 {:.4f} (P {:.4f} R {:.4f}), single acc {:.4f}",
                      r.multi_sentences, run.seconds, r.f1, r.precision, r.recall, r.acc)};
}

Outcome zero_shot_smoke() {
  const auto& r = smoke_run().heldout_report;
  return {r.relation_recall >= 0.6,
          fmt::format("2 held-out relations, 40 sentences: relation recall {:.4f}, "
                      "precision {:.4f}",
                      r.relation_recall, r.relation_precision)};
}

Outcome split_protocol() {
  Corpus c;
  int next = 0;
  for (int l = 0; l < 80; ++l) {
    const std::string label = "relation " + std::to_string(l);
    c.labels.add(label);
    for (int k = 0; k < 3; ++k) {
      c.instances.push_back(
          Instance{"i" + std::to_string(next++), {"a", "b", "c"}, {{{0, 0}, {2, 2}, label}}});
    }
  }
  const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string detail;
  bool pass = true;
  for (auto [m, expect] : {std::pair{5, 70}, {10, 65}, {15, 60}}) {
    const auto splits = make_splits(c.instances, c.labels, m, 5, seeds);
    for (const auto& s : splits) {
      std::set<std::string> seen, unseen;
      for (const auto& l : s.seen_labels) seen.insert(l.text);
      for (const auto& l : s.unseen_labels()) unseen.insert(l.text);
      bool disjoint = true;
      for (const auto& u : unseen) disjoint = disjoint && !seen.count(u);
      pass = pass && static_cast<int>(s.seen_labels.size()) == expect &&
             s.validation_labels.size() == 5 && static_cast<int>(s.test_labels.size()) == m &&
             disjoint;
    }
    detail += fmt::format("{}m={}: {}/{}/{}", detail.empty() ? "" : "; ", m,
                          splits[0].seen_labels.size(), splits[0].validation_labels.size(),
                          splits[0].test_labels.size());
  }
  return {pass, detail + " over 5 folds, seen/unseen disjoint"};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
    bool directional = false;
  };
  const std::vector<Criterion> criteria = {
      {"hungarian_oracle", hungarian_oracle},
      {"entity_loss_permutation_invariance", entity_loss_invariance},
      {"gradient_check", gradient_check},
      {"boundary_filter_properties", boundary_filter},
      {"relation_filter_exactness", relation_filter},
      {"metric_oracle", metric_oracle},
      {"random_baseline_recall", random_baseline},
      {"overfit_smoke", overfit_smoke},
      {"zero_shot_smoke", zero_shot_smoke, true},
      {"split_protocol", split_protocol},
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  int gating = 0, directional = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.name)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++(c.directional ? directional : gating);
    std::printf("%s %s%s: %s\n", o.pass ? "PASS" : "FAIL", c.name.c_str(),
                c.directional ? " (directional)" : "", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("summary: %d gating failure(s), %d directional failure(s)\n", gating,
              directional);
  return gating;
}
