#include "pcred/decoder.h"

#include <limits>

#include "pcred/errors.h"

namespace pcred {

namespace {

constexpr const char* kHeadNames[kBoundaryHeads] = {"head_start", "head_end",
                                                    "tail_start", "tail_end"};

}  // namespace

ag::RowVector boundary_bias(const AugmentedGroup& group, int row) {
  ag::RowVector bias = ag::RowVector::Constant(
      group.max_length, -std::numeric_limits<double>::infinity());
  bias(0) = 0.0;
  const int count = group.sentence_token_count.at(row);
  for (int i = 0; i < count; ++i) bias(i + kSentenceOffset) = 0.0;
  return bias;
}

BoundaryDecoder::BoundaryDecoder(const DecoderConfig& config,
                                 nn::ParameterStore& store, Rng& rng)
    : config_(config) {
  if (config.max_triplets < 1) throw ConfigError("max_triplets must be >= 1");
  const int d = config.hidden_size;
  queries_ = store.create("decoder.queries", config.max_triplets, d,
                          nn::Init::kNormal, rng);
  self_attention_ = nn::MultiHeadAttention::make(
      store, "decoder.self_attention", "decoder.self_attention.output", d,
      config.heads, rng);
  self_norm_ = nn::LayerNorm::make(store, "decoder.self_norm", d,
                                   config.layer_norm_eps, rng);
  cross_attention_ = nn::MultiHeadAttention::make(
      store, "decoder.cross_attention", "decoder.cross_attention.output", d,
      config.heads, rng);
  cross_norm_ = nn::LayerNorm::make(store, "decoder.cross_norm", d,
                                    config.layer_norm_eps, rng);
  for (int k = 0; k < kBoundaryHeads; ++k) {
    const std::string p = std::string("decoder.") + kHeadNames[k];
    Scorer& s = scorers_[k];
    s.query_proj = nn::Linear::make(store, p + ".query_proj", d, d, rng, false);
    s.state_proj = nn::Linear::make(store, p + ".state_proj", d, d, rng, false);
    s.ffn_weight = store.create(p + ".ffn.weight", 1, d, nn::Init::kNormal, rng);
    s.ffn_bias = store.create(p + ".ffn.bias", 1, 1, nn::Init::kZeros, rng);
  }
}

BoundaryLogProbs BoundaryDecoder::decode_row(
    const ag::Var& states, const std::vector<int>& attention_mask,
    const ag::RowVector& position_bias, std::vector<nn::AttentionRecord>* trace,
    const std::string& tag) const {
  const ag::RowVector open =
      ag::RowVector::Zero(config_.max_triplets);
  ag::Var q = self_norm_(ag::add(
      queries_, self_attention_(queries_, queries_, open, trace,
                                tag.empty() ? "" : tag + ".self")));
  ag::Var out = cross_norm_(
      ag::add(q, cross_attention_(q, states, nn::key_bias(attention_mask),
                                  trace, tag.empty() ? "" : tag + ".cross")));

  BoundaryLogProbs result;
  for (int k = 0; k < kBoundaryHeads; ++k) {
    const Scorer& s = scorers_[k];
    ag::Var logits = ag::pairwise_gelu_score(
        s.query_proj(out), s.state_proj(states), s.ffn_weight, s.ffn_bias);
    result.heads[k] = ag::log_softmax_rows(logits, position_bias);
  }
  return result;
}

BoundaryDistributions to_distributions(const BoundaryLogProbs& log_probs) {
  BoundaryDistributions d;
  for (int k = 0; k < kBoundaryHeads; ++k) {
    d.heads[k] = log_probs.heads[k].value().array().exp();
  }
  return d;
}

BoundarySet BoundaryDecoder::decode_boundaries(
    const std::vector<ag::Var>& filtered, const std::vector<int>& kept,
    const AugmentedGroup& group, std::vector<nn::AttentionRecord>* trace) const {
  if (filtered.size() != kept.size()) {
    throw InternalError("filtered rows and kept indices differ in length");
  }
  ag::NoGradGuard no_grad;
  BoundarySet set;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    const int row = kept[i];
    set.relations.push_back(to_distributions(decode_row(
        filtered[i], group.attention_mask.at(row), boundary_bias(group, row),
        trace, trace ? "decoder.row" + std::to_string(row) : "")));
  }
  return set;
}

}  // namespace pcred
