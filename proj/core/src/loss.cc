#include "pcred/loss.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

#include "pcred/errors.h"

namespace pcred {

GoldBoundarySet pad_gold(const std::vector<Quadruple>& gold, int max_triplets) {
  GoldBoundarySet out;
  for (const Quadruple& q : gold) {
    if (static_cast<int>(out.size()) == max_triplets) {
      spdlog::warn("{} gold triplets for one relation exceed max_triplets={}; "
                   "keeping the first {}",
                   gold.size(), max_triplets, max_triplets);
      break;
    }
    out.push_back(GoldTarget{q, false});
  }
  while (static_cast<int>(out.size()) < max_triplets) {
    out.push_back(GoldTarget::none());
  }
  return out;
}

double relation_loss(std::span<const double> probs,
                     std::span<const std::uint8_t> gold_mask) {
  if (probs.size() != gold_mask.size() || probs.empty()) {
    throw InternalError("relation_loss: size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p =
        std::clamp(probs[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= gold_mask[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

ag::Var relation_loss(const ag::Var& probs,
                      std::span<const std::uint8_t> gold_mask) {
  if (static_cast<std::size_t>(probs.rows()) != gold_mask.size() ||
      probs.cols() != 1) {
    throw InternalError("relation_loss: size mismatch");
  }
  ag::Matrix sign(probs.rows(), 1);
  ag::Matrix offset(probs.rows(), 1);
  // y=1 -> log(p); y=0 -> log(1 - p) = log(-p + 1).
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    sign(i, 0) = gold_mask[i] ? 1.0 : -1.0;
    offset(i, 0) = gold_mask[i] ? 0.0 : 1.0;
  }
  ag::Var p = ag::clamp(probs, kProbabilityClamp, 1.0 - kProbabilityClamp);
  ag::Var target_prob = ag::add(ag::mul(p, ag::constant(sign)),
                                ag::constant(offset));
  return ag::scale(ag::mean(ag::log(target_prob)), -1.0);
}

namespace {

void check_position(const BoundaryDistributions& dist, int position) {
  if (position < 0 || position >= dist.length()) {
    throw InternalError("gold boundary position " + std::to_string(position) +
                        " outside sequence of length " +
                        std::to_string(dist.length()));
  }
}

int target_position(const GoldTarget& gold, int head) {
  if (gold.null) return 0;
  switch (head) {
    case kHeadStart: return gold.boundary.head_start;
    case kHeadEnd: return gold.boundary.head_end;
    case kTailStart: return gold.boundary.tail_start;
    default: return gold.boundary.tail_end;
  }
}

}  // namespace

double match_cost(const BoundaryDistributions& dist, int query,
                  const GoldTarget& gold) {
  if (gold.null) return 0.0;
  double total = 0.0;
  for (int k = 0; k < kBoundaryHeads; ++k) {
    const int pos = target_position(gold, k);
    check_position(dist, pos);
    total += dist.heads[k](query, pos);
  }
  return -total;
}

ag::Matrix cost_matrix(const BoundaryDistributions& dist,
                       const GoldBoundarySet& gold) {
  const int n = dist.queries();
  if (static_cast<int>(gold.size()) != n) {
    throw InternalError("gold set size differs from the query count");
  }
  ag::Matrix cost(n, n);
  for (int q = 0; q < n; ++q) {
    for (int g = 0; g < n; ++g) cost(q, g) = match_cost(dist, q, gold[g]);
  }
  return cost;
}

namespace {

// Shortest augmenting path with potentials (O(n^3)); returns the optimal
// column of each row of the square sub-matrix given by rows/cols.
std::vector<int> solve_assignment(const ag::Matrix& cost,
                                  const std::vector<int>& rows,
                                  const std::vector<int>& cols) {
  const int n = static_cast<int>(rows.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(rows[i0 - 1], cols[j - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(n);
  for (int j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double assignment_cost(const ag::Matrix& cost, const std::vector<int>& rows,
                       const std::vector<int>& cols) {
  if (rows.empty()) return 0.0;
  const std::vector<int> a = solve_assignment(cost, rows, cols);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) total += cost(rows[r], cols[a[r]]);
  return total;
}

}  // namespace

Assignment hungarian(const ag::Matrix& cost) {
  if (cost.rows() != cost.cols()) throw InternalError("cost matrix not square");
  if (!cost.allFinite()) throw NumericError("non-finite matching cost");
  const int n = static_cast<int>(cost.rows());

  std::vector<int> rows(n), cols(n);
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  double remaining = assignment_cost(cost, rows, cols);
  const double tol = 1e-9 * std::max(1.0, cost.cwiseAbs().maxCoeff() * n);

  // Fix rows one at a time to the smallest column that keeps the optimum.
  Assignment result;
  result.query_to_gold.assign(n, -1);
  for (int r = 0; r < n; ++r) {
    std::vector<int> rest_rows(rows.begin() + r + 1, rows.end());
    bool fixed = false;
    for (std::size_t ci = 0; ci < cols.size(); ++ci) {
      const int c = cols[ci];
      std::vector<int> rest_cols = cols;
      rest_cols.erase(rest_cols.begin() + ci);
      const double sub = assignment_cost(cost, rest_rows, rest_cols);
      if (cost(r, c) + sub <= remaining + tol) {
        result.query_to_gold[r] = c;
        remaining = sub;
        cols = std::move(rest_cols);
        fixed = true;
        break;
      }
    }
    if (!fixed) throw InternalError("assignment refinement failed");
  }
  for (int r = 0; r < n; ++r) result.total_cost += cost(r, result.query_to_gold[r]);
  return result;
}

EntityLossTerms entity_loss_terms(const BoundaryLogProbs& log_probs,
                                  const GoldBoundarySet& gold,
                                  const Assignment& assignment,
                                  double null_weight) {
  const int n = static_cast<int>(log_probs.heads[0].rows());
  if (static_cast<int>(assignment.query_to_gold.size()) != n ||
      static_cast<int>(gold.size()) != n) {
    throw InternalError("entity loss: assignment size mismatch");
  }
  EntityLossTerms terms;
  std::vector<ag::Var> parts;
  for (int q = 0; q < n; ++q) {
    const GoldTarget& target = gold[assignment.query_to_gold[q]];
    if (target.null && null_weight == 0.0) continue;
    std::vector<ag::Var> picks;
    for (int k = 0; k < kBoundaryHeads; ++k) {
      const int pos = target_position(target, k);
      if (pos < 0 || pos >= log_probs.heads[k].cols()) {
        throw InternalError("gold boundary position outside the sequence");
      }
      picks.push_back(ag::element(log_probs.heads[k], q, pos));
    }
    ag::Var term = ag::scale(ag::add_all(picks), -1.0);
    if (target.null) {
      term = ag::scale(term, null_weight);
    } else {
      ++terms.non_null;
    }
    parts.push_back(term);
  }
  terms.total = parts.empty() ? ag::constant(ag::Matrix::Zero(1, 1))
                              : ag::add_all(parts);
  return terms;
}

double entity_loss(std::span<const BoundaryDistributions> predictions,
                   std::span<const GoldBoundarySet> gold,
                   std::span<const Assignment> assignments,
                   double null_weight) {
  if (predictions.size() != gold.size() ||
      predictions.size() != assignments.size()) {
    throw InternalError("entity loss: one assignment per relation row needed");
  }
  double total = 0.0;
  int non_null = 0;
  for (std::size_t r = 0; r < predictions.size(); ++r) {
    const BoundaryDistributions& dist = predictions[r];
    for (int q = 0; q < dist.queries(); ++q) {
      const GoldTarget& target = gold[r].at(assignments[r].query_to_gold.at(q));
      double term = 0.0;
      for (int k = 0; k < kBoundaryHeads; ++k) {
        const int pos = target_position(target, k);
        check_position(dist, pos);
        term -= std::log(dist.heads[k](q, pos));
      }
      if (target.null) {
        total += null_weight * term;
      } else {
        total += term;
        ++non_null;
      }
    }
  }
  return total / std::max(1, non_null);
}

void check_loss_weight(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("loss weight alpha must lie in [0, 1], got " +
                      std::to_string(alpha));
  }
}

double total_loss(double relation, double entity, double alpha) {
  check_loss_weight(alpha);
  return alpha * relation + (1.0 - alpha) * entity;
}

ag::Var total_loss(const ag::Var& relation, const ag::Var& entity,
                   double alpha) {
  check_loss_weight(alpha);
  return ag::add(ag::scale(relation, alpha), ag::scale(entity, 1.0 - alpha));
}

}  // namespace pcred
