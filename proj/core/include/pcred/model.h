#ifndef PCRED_MODEL_H_
#define PCRED_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "pcred/augment.h"
#include "pcred/decoder.h"
#include "pcred/encoder.h"
#include "pcred/infer.h"
#include "pcred/loss.h"
#include "pcred/selector.h"

namespace pcred {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  std::uint64_t init_seed = 0;
  double init_std = 0.02;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

struct ModelOutput {
  RelationDecision decision;
  BoundarySet boundaries;
  std::vector<PredictedTriplet> triplets;
};

// Differentiable training terms of one instance.
struct TrainingTerms {
  ag::Var relation;    // mean BCE over the group's candidates
  ag::Var entity_sum;  // summed matched entity terms over gold relations
  int non_null = 0;    // matched non-null pairs behind entity_sum
};

// Encoder, relation selector and boundary decoder sharing one parameter
// store.
class Model {
 public:
  explicit Model(const ModelConfig& config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  const TransformerEncoder& encoder() const { return encoder_; }
  const RelationSelector& selector() const { return selector_; }
  const BoundaryDecoder& decoder() const { return decoder_; }

  // Inference on one group. With `random_selector`, candidate probabilities
  // are replaced by uniform(0, 1) draws.
  ModelOutput predict(const AugmentedGroup& group, double relation_threshold,
                      const InferenceConfig& inference,
                      std::vector<nn::AttentionRecord>* trace = nullptr,
                      Rng* random_selector = nullptr) const;

  // Gold relation mask drives the filter; each gold relation row is matched
  // to its padded gold boundary set.
  TrainingTerms training_terms(const Instance& instance,
                               const AugmentedGroup& group,
                               double null_weight) const;

  // weights.bin + model.json
  void save(const std::filesystem::path& dir) const;
  static std::unique_ptr<Model> load(const std::filesystem::path& dir);

 private:
  ModelConfig config_;
  nn::ParameterStore store_;
  Rng init_rng_;
  TransformerEncoder encoder_;
  RelationSelector selector_;
  BoundaryDecoder decoder_;
};

// alpha * mean relation loss + (1 - alpha) * entity terms / non-null pairs,
// over a batch of instances and their groups.
ag::Var batch_loss(const Model& model, std::span<const Instance* const> instances,
                   std::span<const AugmentedGroup> groups, double alpha,
                   double null_weight);

}  // namespace pcred

#endif  // PCRED_MODEL_H_
