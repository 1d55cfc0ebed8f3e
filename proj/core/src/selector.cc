#include "pcred/selector.h"

#include "pcred/errors.h"

namespace pcred {

RelationSelector::RelationSelector(int hidden_size, nn::ParameterStore& store,
                                   Rng& rng)
    : pooler_(nn::Linear::make(store, "selector.pooler", hidden_size,
                               hidden_size, rng)),
      classifier_(nn::Linear::make(store, "selector.classifier", hidden_size, 1,
                                   rng)) {}

ag::Var RelationSelector::probabilities(const ag::Var& cls) const {
  if (!cls.value().allFinite()) {
    throw NumericError("non-finite [CLS] representation");
  }
  return ag::sigmoid(classifier_(ag::tanh(pooler_(cls))));
}

std::vector<double> RelationSelector::select(const ag::Matrix& cls) const {
  ag::NoGradGuard no_grad;
  ag::Var probs = probabilities(ag::constant(cls));
  return std::vector<double>(probs.value().data(),
                             probs.value().data() + probs.value().size());
}

std::vector<std::uint8_t> make_mask(std::span<const double> probs, MaskMode mode,
                                    std::span<const std::uint8_t> gold_mask,
                                    double threshold) {
  if (mode == MaskMode::kTrain) {
    if (gold_mask.size() != probs.size()) {
      throw InternalError("training mask needs one gold flag per candidate");
    }
    return std::vector<std::uint8_t>(gold_mask.begin(), gold_mask.end());
  }
  std::vector<std::uint8_t> mask(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) mask[i] = probs[i] >= threshold;
  return mask;
}

std::vector<int> kept_indices(std::span<const std::uint8_t> mask) {
  std::vector<int> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

RelationDecision make_decision(std::vector<double> probs,
                               std::vector<std::uint8_t> mask) {
  RelationDecision decision;
  decision.kept_indices = kept_indices(mask);
  decision.probs = std::move(probs);
  decision.mask = std::move(mask);
  return decision;
}

}  // namespace pcred
