#include "pcred/model.h"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "pcred/errors.h"

namespace pcred {

using json = nlohmann::json;

std::string ModelConfig::to_json() const {
  json j;
  j["encoder"] = {{"vocab_size", encoder.vocab_size},
                  {"hidden_size", encoder.hidden_size},
                  {"layers", encoder.layers},
                  {"heads", encoder.heads},
                  {"intermediate_size", encoder.intermediate_size},
                  {"max_positions", encoder.max_positions},
                  {"type_vocab_size", encoder.type_vocab_size},
                  {"layer_norm_eps", encoder.layer_norm_eps},
                  {"freeze_word_embeddings", encoder.freeze_word_embeddings}};
  j["decoder"] = {{"hidden_size", decoder.hidden_size},
                  {"max_triplets", decoder.max_triplets},
                  {"heads", decoder.heads},
                  {"layer_norm_eps", decoder.layer_norm_eps}};
  j["init_seed"] = init_seed;
  j["init_std"] = init_std;
  return j.dump(2) + "\n";
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    const json& e = j.at("encoder");
    c.encoder.vocab_size = e.at("vocab_size");
    c.encoder.hidden_size = e.at("hidden_size");
    c.encoder.layers = e.at("layers");
    c.encoder.heads = e.at("heads");
    c.encoder.intermediate_size = e.at("intermediate_size");
    c.encoder.max_positions = e.at("max_positions");
    c.encoder.type_vocab_size = e.value("type_vocab_size", 2);
    c.encoder.layer_norm_eps = e.value("layer_norm_eps", 1e-12);
    c.encoder.freeze_word_embeddings = e.value("freeze_word_embeddings", false);
    if (j.contains("decoder")) {
      const json& d = j.at("decoder");
      c.decoder.hidden_size = d.at("hidden_size");
      c.decoder.max_triplets = d.at("max_triplets");
      c.decoder.heads = d.at("heads");
      c.decoder.layer_norm_eps = d.value("layer_norm_eps", 1e-12);
    } else {
      c.decoder.hidden_size = c.encoder.hidden_size;
    }
    c.init_seed = j.value("init_seed", std::uint64_t{0});
    c.init_std = j.value("init_std", 0.02);
  } catch (const json::exception& e) {
    throw LoadError(std::string("bad model config: ") + e.what());
  }
  if (c.decoder.hidden_size != c.encoder.hidden_size) {
    throw LoadError("decoder and encoder hidden sizes differ");
  }
  return c;
}

Model::Model(const ModelConfig& config)
    : config_(config),
      store_(config.init_std),
      init_rng_(config.init_seed),
      encoder_(config.encoder, store_, init_rng_),
      selector_(config.encoder.hidden_size, store_, init_rng_),
      decoder_(config.decoder, store_, init_rng_) {
  if (config.decoder.hidden_size != config.encoder.hidden_size) {
    throw ConfigError("decoder and encoder hidden sizes differ");
  }
}

ModelOutput Model::predict(const AugmentedGroup& group,
                           double relation_threshold,
                           const InferenceConfig& inference,
                           std::vector<nn::AttentionRecord>* trace,
                           Rng* random_selector) const {
  ag::NoGradGuard no_grad;
  ModelOutput out;
  if (group.size() == 0) return out;
  const ContextualRepr repr = encoder_.encode(group, trace);
  std::vector<double> probs;
  if (random_selector != nullptr) {
    for (int i = 0; i < group.size(); ++i) probs.push_back(random_selector->uniform());
  } else {
    probs = selector_.select(repr.cls.value());
  }
  std::vector<std::uint8_t> mask =
      make_mask(probs, MaskMode::kInfer, {}, relation_threshold);
  out.decision = make_decision(std::move(probs), std::move(mask));
  const std::vector<ag::Var> filtered = filter_rows(repr.values, out.decision.mask);
  out.boundaries = decoder_.decode_boundaries(filtered, out.decision.kept_indices,
                                              group, trace);
  out.triplets = extract(out.decision, out.boundaries, group, inference);
  return out;
}

TrainingTerms Model::training_terms(const Instance& instance,
                                    const AugmentedGroup& group,
                                    double null_weight) const {
  TrainingTerms terms;
  const ContextualRepr repr = encoder_.encode(group);
  ag::Var probs = selector_.probabilities(repr.cls);
  terms.relation = relation_loss(probs, group.gold_mask);

  std::vector<double> prob_values(probs.value().data(),
                                  probs.value().data() + probs.rows());
  const std::vector<std::uint8_t> mask =
      make_mask(prob_values, MaskMode::kTrain, group.gold_mask, 0.0);
  const std::vector<int> kept = kept_indices(mask);
  const std::vector<ag::Var> filtered = filter_rows(repr.values, mask);

  std::vector<ag::Var> entity_parts;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const int row = kept[i];
    const std::string& relation = group.candidates[row].text;
    std::vector<Quadruple> gold;
    for (const Triplet& t : instance.triplets) {
      if (t.relation != relation) continue;
      if (auto q = gold_quadruple(group, row, t)) {
        gold.push_back(*q);
      } else {
        spdlog::warn("instance {}: gold entity for '{}' truncated away",
                     instance.id, relation);
      }
    }
    const GoldBoundarySet padded = pad_gold(gold, config_.decoder.max_triplets);
    BoundaryLogProbs log_probs = decoder_.decode_row(
        filtered[i], group.attention_mask[row], boundary_bias(group, row));
    const Assignment assignment =
        hungarian(cost_matrix(to_distributions(log_probs), padded));
    EntityLossTerms e =
        entity_loss_terms(log_probs, padded, assignment, null_weight);
    entity_parts.push_back(e.total);
    terms.non_null += e.non_null;
  }
  terms.entity_sum = entity_parts.empty()
                         ? ag::constant(ag::Matrix::Zero(1, 1))
                         : ag::add_all(entity_parts);
  return terms;
}

void Model::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  store_.save(dir / "weights.bin");
  std::ofstream out(dir / "model.json");
  if (!out) throw IoError("cannot write " + (dir / "model.json").string());
  out << config_.to_json();
}

std::unique_ptr<Model> Model::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw LoadError("cannot open " + (dir / "model.json").string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto model = std::make_unique<Model>(ModelConfig::from_json(buffer.str()));
  model->store_.load(dir / "weights.bin");
  return model;
}

ag::Var batch_loss(const Model& model, std::span<const Instance* const> instances,
                   std::span<const AugmentedGroup> groups, double alpha,
                   double null_weight) {
  check_loss_weight(alpha);
  if (instances.size() != groups.size() || instances.empty()) {
    throw InternalError("batch_loss: one group per instance required");
  }
  std::vector<ag::Var> relation_terms;
  std::vector<ag::Var> entity_terms;
  int non_null = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    TrainingTerms t = model.training_terms(*instances[i], groups[i], null_weight);
    relation_terms.push_back(t.relation);
    entity_terms.push_back(t.entity_sum);
    non_null += t.non_null;
  }
  ag::Var relation = ag::scale(ag::add_all(relation_terms),
                               1.0 / static_cast<double>(instances.size()));
  ag::Var entity = ag::scale(ag::add_all(entity_terms),
                             1.0 / static_cast<double>(std::max(1, non_null)));
  return total_loss(relation, entity, alpha);
}

}  // namespace pcred
