#ifndef PCRED_INFER_H_
#define PCRED_INFER_H_

#include <optional>
#include <span>
#include <vector>

#include "pcred/augment.h"
#include "pcred/decoder.h"
#include "pcred/selector.h"

namespace pcred {

inline constexpr double kDefaultBoundaryThreshold = 0.4;
inline constexpr int kDefaultMaxSpanLength = 15;

struct InferenceConfig {
  double boundary_threshold = kDefaultBoundaryThreshold;
  // Longest entity in subtokens: end - start + 1 <= max_span_length.
  int max_span_length = kDefaultMaxSpanLength;
};

// Per-head argmax positions of one query and the product of their
// probabilities.
struct DecodedBoundary {
  Quadruple positions;
  double score = 0.0;
};

enum class BoundaryCheck {
  kValid,
  kNullSentinel,     // all four heads point at the leading marker
  kStartAfterEnd,    // start > end for head or tail
  kOutsideSentence,  // a boundary outside the sentence subtokens
  kSpanTooLong,      // entity longer than max_span_length
  kBelowThreshold,   // score < boundary threshold
};

const char* to_string(BoundaryCheck check);

DecodedBoundary decode_query(const BoundaryDistributions& dist, int query);

// Applies the sentinel test and the four validity criteria in order.
// sentence_token_count is the row's (possibly truncated) sentence length.
BoundaryCheck check_boundary(const DecodedBoundary& boundary,
                             int sentence_token_count,
                             const InferenceConfig& config);

struct PredictedTriplet {
  WordSpan head;
  WordSpan tail;
  RelationLabel relation;
  double score = 0.0;  // boundary score x relation probability
};

// Assembles triplets for the kept relations of one group. Duplicates of the
// same (head, tail, relation) keep the highest score. Output is ordered by
// (relation id, head, tail).
std::vector<PredictedTriplet> extract(const RelationDecision& decision,
                                      const BoundarySet& boundaries,
                                      const AugmentedGroup& group,
                                      const InferenceConfig& config);

// Highest score; ties go to the smallest (relation id, head start,
// tail start).
std::optional<PredictedTriplet> top1(std::span<const PredictedTriplet> triplets);

}  // namespace pcred

#endif  // PCRED_INFER_H_
