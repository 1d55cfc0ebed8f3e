#include "pcred/infer.h"

#include <map>
#include <tuple>

#include "pcred/errors.h"

namespace pcred {

const char* to_string(BoundaryCheck check) {
  switch (check) {
    case BoundaryCheck::kValid: return "valid";
    case BoundaryCheck::kNullSentinel: return "null-sentinel";
    case BoundaryCheck::kStartAfterEnd: return "start-after-end";
    case BoundaryCheck::kOutsideSentence: return "outside-sentence";
    case BoundaryCheck::kSpanTooLong: return "span-too-long";
    case BoundaryCheck::kBelowThreshold: return "below-threshold";
  }
  return "unknown";
}

DecodedBoundary decode_query(const BoundaryDistributions& dist, int query) {
  int pos[kBoundaryHeads];
  double score = 1.0;
  for (int k = 0; k < kBoundaryHeads; ++k) {
    Eigen::Index best;
    score *= dist.heads[k].row(query).maxCoeff(&best);
    pos[k] = static_cast<int>(best);
  }
  return DecodedBoundary{Quadruple{pos[0], pos[1], pos[2], pos[3]}, score};
}

BoundaryCheck check_boundary(const DecodedBoundary& boundary,
                             int sentence_token_count,
                             const InferenceConfig& config) {
  const Quadruple& q = boundary.positions;
  if (q.head_start == 0 && q.head_end == 0 && q.tail_start == 0 &&
      q.tail_end == 0) {
    return BoundaryCheck::kNullSentinel;
  }
  if (q.head_start > q.head_end || q.tail_start > q.tail_end) {
    return BoundaryCheck::kStartAfterEnd;
  }
  // Sentence subtoken i sits at position i + kSentenceOffset.
  const int last = sentence_token_count - 1 + kSentenceOffset;
  if (q.head_start < kSentenceOffset || q.tail_start < kSentenceOffset ||
      q.head_end > last || q.tail_end > last) {
    return BoundaryCheck::kOutsideSentence;
  }
  if (q.head_end - q.head_start >= config.max_span_length ||
      q.tail_end - q.tail_start >= config.max_span_length) {
    return BoundaryCheck::kSpanTooLong;
  }
  if (boundary.score < config.boundary_threshold) {
    return BoundaryCheck::kBelowThreshold;
  }
  return BoundaryCheck::kValid;
}

std::vector<PredictedTriplet> extract(const RelationDecision& decision,
                                      const BoundarySet& boundaries,
                                      const AugmentedGroup& group,
                                      const InferenceConfig& config) {
  if (boundaries.relations.size() != decision.kept_indices.size()) {
    throw InternalError("boundary set does not match the kept relations");
  }
  using Key = std::tuple<int, WordSpan, WordSpan>;
  std::map<Key, PredictedTriplet> best;
  for (std::size_t r = 0; r < boundaries.relations.size(); ++r) {
    const int row = decision.kept_indices[r];
    const BoundaryDistributions& dist = boundaries.relations[r];
    const RelationLabel& relation = group.candidates.at(row);
    for (int j = 0; j < dist.queries(); ++j) {
      const DecodedBoundary b = decode_query(dist, j);
      if (check_boundary(b, group.sentence_token_count.at(row), config) !=
          BoundaryCheck::kValid) {
        continue;
      }
      const Quadruple& q = b.positions;
      const int hs = word_at_position(group, row, q.head_start);
      const int he = word_at_position(group, row, q.head_end);
      const int ts = word_at_position(group, row, q.tail_start);
      const int te = word_at_position(group, row, q.tail_end);
      if (hs < 0 || he < 0 || ts < 0 || te < 0) continue;
      PredictedTriplet t{WordSpan{hs, he}, WordSpan{ts, te}, relation,
                         b.score * decision.probs.at(row)};
      Key key{relation.id, t.head, t.tail};
      auto it = best.find(key);
      if (it == best.end()) {
        best.emplace(key, std::move(t));
      } else if (t.score > it->second.score) {
        it->second = std::move(t);
      }
    }
  }
  std::vector<PredictedTriplet> out;
  for (auto& [key, t] : best) out.push_back(std::move(t));
  return out;
}

std::optional<PredictedTriplet> top1(std::span<const PredictedTriplet> triplets) {
  const PredictedTriplet* best = nullptr;
  for (const PredictedTriplet& t : triplets) {
    if (best == nullptr || t.score > best->score ||
        (t.score == best->score &&
         std::tuple(t.relation.id, t.head.start, t.tail.start) <
             std::tuple(best->relation.id, best->head.start,
                        best->tail.start))) {
      best = &t;
    }
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

}  // namespace pcred
