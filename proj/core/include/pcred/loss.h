#ifndef PCRED_LOSS_H_
#define PCRED_LOSS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "pcred/augment.h"
#include "pcred/decoder.h"

namespace pcred {

inline constexpr double kProbabilityClamp = 1e-7;

// Gold boundary target; null targets pad a gold set up to N entries.
struct GoldTarget {
  Quadruple boundary;
  bool null = false;

  static GoldTarget none() { return GoldTarget{{0, 0, 0, 0}, true}; }
};

using GoldBoundarySet = std::vector<GoldTarget>;

// Pads to N with null targets; keeps the first N (with a warning) when there
// are more.
GoldBoundarySet pad_gold(const std::vector<Quadruple>& gold, int max_triplets);

// query_to_gold[q] is the gold slot matched with query q.
struct Assignment {
  std::vector<int> query_to_gold;
  double total_cost = 0.0;
};

// Mean binary cross-entropy over candidates with probabilities clamped to
// [1e-7, 1 - 1e-7].
double relation_loss(std::span<const double> probs,
                     std::span<const std::uint8_t> gold_mask);
ag::Var relation_loss(const ag::Var& probs,
                      std::span<const std::uint8_t> gold_mask);

// Negative sum of the four gold-position probabilities of one query; 0 for a
// null target. Out-of-range gold positions raise InternalError.
double match_cost(const BoundaryDistributions& dist, int query,
                  const GoldTarget& gold);

// cost(q, g) = match_cost(dist, q, gold[g]); N x N.
ag::Matrix cost_matrix(const BoundaryDistributions& dist,
                       const GoldBoundarySet& gold);

// Minimum-cost perfect assignment of rows to columns of a square matrix.
// Among optimal assignments the lexicographically smallest row->column
// permutation is returned. total_cost sums cost(r, perm[r]) in row order.
Assignment hungarian(const ag::Matrix& cost);

// Sum of matched negative log-likelihood terms for one relation row.
// Non-null targets use their gold positions; null targets use position 0 for
// all four heads, weighted by null_weight.
struct EntityLossTerms {
  ag::Var total;  // 1 x 1
  int non_null = 0;
};
EntityLossTerms entity_loss_terms(const BoundaryLogProbs& log_probs,
                                  const GoldBoundarySet& gold,
                                  const Assignment& assignment,
                                  double null_weight = 1.0);

// Entity loss over several relation rows: all matched terms summed and
// divided by the number of non-null matched pairs.
double entity_loss(std::span<const BoundaryDistributions> predictions,
                   std::span<const GoldBoundarySet> gold,
                   std::span<const Assignment> assignments,
                   double null_weight = 1.0);

// alpha * relation + (1 - alpha) * entity; alpha must lie in [0, 1].
double total_loss(double relation, double entity, double alpha);
ag::Var total_loss(const ag::Var& relation, const ag::Var& entity, double alpha);
void check_loss_weight(double alpha);

}  // namespace pcred

#endif  // PCRED_LOSS_H_
