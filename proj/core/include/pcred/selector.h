#ifndef PCRED_SELECTOR_H_
#define PCRED_SELECTOR_H_

#include <cstdint>
#include <span>
#include <vector>

#include "pcred/nn.h"

namespace pcred {

inline constexpr double kDefaultRelationThreshold = 0.5;

struct RelationDecision {
  std::vector<double> probs;
  std::vector<std::uint8_t> mask;
  std::vector<int> kept_indices;  // strictly increasing

  int lambda() const { return static_cast<int>(kept_indices.size()); }
};

enum class MaskMode { kTrain, kInfer };

// Candidate relation selection head: a tanh pooling layer over the [CLS]
// states followed by a single sigmoid unit per candidate.
class RelationSelector {
 public:
  RelationSelector(int hidden_size, nn::ParameterStore& store, Rng& rng);

  // cls: G x d -> G x 1 probabilities. Rows are scored independently.
  ag::Var probabilities(const ag::Var& cls) const;
  std::vector<double> select(const ag::Matrix& cls) const;

  const nn::Linear& pooler() const { return pooler_; }
  const nn::Linear& classifier() const { return classifier_; }

 private:
  nn::Linear pooler_;
  nn::Linear classifier_;
};

// Train: the gold mask. Infer: probs[i] >= threshold (ties kept).
std::vector<std::uint8_t> make_mask(std::span<const double> probs, MaskMode mode,
                                    std::span<const std::uint8_t> gold_mask,
                                    double threshold);

RelationDecision make_decision(std::vector<double> probs,
                               std::vector<std::uint8_t> mask);

// Row selection keeping order; kept rows are the same objects as the input.
template <typename Row>
std::vector<Row> filter_rows(const std::vector<Row>& rows,
                             std::span<const std::uint8_t> mask) {
  std::vector<Row> out;
  for (std::size_t i = 0; i < rows.size() && i < mask.size(); ++i) {
    if (mask[i]) out.push_back(rows[i]);
  }
  return out;
}

std::vector<int> kept_indices(std::span<const std::uint8_t> mask);

}  // namespace pcred

#endif  // PCRED_SELECTOR_H_
