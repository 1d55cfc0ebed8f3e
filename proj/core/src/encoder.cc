#include "pcred/encoder.h"

#include <numeric>

#include "pcred/errors.h"

namespace pcred {

EncoderConfig EncoderConfig::tiny(int vocab_size) {
  EncoderConfig c;
  c.vocab_size = vocab_size;
  c.hidden_size = 16;
  c.layers = 2;
  c.heads = 2;
  c.intermediate_size = 64;
  c.max_positions = 128;
  return c;
}

EncoderConfig EncoderConfig::base(int vocab_size) {
  EncoderConfig c;
  c.vocab_size = vocab_size;
  c.hidden_size = 768;
  c.layers = 12;
  c.heads = 12;
  c.intermediate_size = 3072;
  c.max_positions = 512;
  c.freeze_word_embeddings = true;
  return c;
}

TransformerEncoder::TransformerEncoder(const EncoderConfig& config,
                                       nn::ParameterStore& store, Rng& rng)
    : config_(config) {
  if (config.vocab_size < 1 || config.hidden_size < 1 || config.layers < 0) {
    throw ConfigError("invalid encoder configuration");
  }
  const int d = config.hidden_size;
  const std::string p = "encoder.";
  word_embeddings_ = store.create(p + "embeddings.word_embeddings.weight",
                                  config.vocab_size, d, nn::Init::kNormal, rng);
  position_embeddings_ =
      store.create(p + "embeddings.position_embeddings.weight",
                   config.max_positions, d, nn::Init::kNormal, rng);
  segment_embeddings_ =
      store.create(p + "embeddings.token_type_embeddings.weight",
                   config.type_vocab_size, d, nn::Init::kNormal, rng);
  embedding_norm_ = nn::LayerNorm::make(store, p + "embeddings.LayerNorm", d,
                                        config.layer_norm_eps, rng);
  if (config.freeze_word_embeddings) {
    store.set_trainable(p + "embeddings.word_embeddings.weight", false);
  }
  for (int i = 0; i < config.layers; ++i) {
    const std::string lp = p + "layer." + std::to_string(i) + ".";
    Layer layer;
    layer.attention = nn::MultiHeadAttention::make(
        store, lp + "attention.self", lp + "attention.output.dense", d,
        config.heads, rng);
    layer.attention_norm = nn::LayerNorm::make(
        store, lp + "attention.output.LayerNorm", d, config.layer_norm_eps, rng);
    layer.intermediate = nn::Linear::make(store, lp + "intermediate.dense", d,
                                          config.intermediate_size, rng);
    layer.output = nn::Linear::make(store, lp + "output.dense",
                                    config.intermediate_size, d, rng);
    layer.output_norm = nn::LayerNorm::make(store, lp + "output.LayerNorm", d,
                                            config.layer_norm_eps, rng);
    layers_.push_back(std::move(layer));
  }
}

ag::Var TransformerEncoder::encode_row(const std::vector<int>& ids,
                                       const std::vector<int>& segments,
                                       const std::vector<int>& mask,
                                       std::vector<nn::AttentionRecord>* trace,
                                       const std::string& tag) const {
  const int length = static_cast<int>(ids.size());
  if (segments.size() != ids.size() || mask.size() != ids.size()) {
    throw InputError("ids, segments and mask lengths differ");
  }
  if (length > config_.max_positions) {
    throw InputError("sequence length " + std::to_string(length) +
                     " exceeds max positions " +
                     std::to_string(config_.max_positions));
  }
  std::vector<int> positions(length);
  std::iota(positions.begin(), positions.end(), 0);

  ag::Var x = ag::add(ag::add(ag::gather_rows(word_embeddings_, ids),
                              ag::gather_rows(position_embeddings_, positions)),
                      ag::gather_rows(segment_embeddings_, segments));
  x = embedding_norm_(x);

  const ag::RowVector bias = nn::key_bias(mask);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    ag::Var attended = layer.attention(
        x, x, bias, trace, tag.empty() ? std::string() : tag + ".layer" + std::to_string(i));
    x = layer.attention_norm(ag::add(x, attended));
    ag::Var hidden = layer.output(ag::gelu(layer.intermediate(x)));
    x = layer.output_norm(ag::add(x, hidden));
  }
  return x;
}

ContextualRepr TransformerEncoder::encode(
    const AugmentedGroup& group, std::vector<nn::AttentionRecord>* trace) const {
  ContextualRepr repr;
  std::vector<ag::Var> cls_rows;
  for (int r = 0; r < group.size(); ++r) {
    ag::Var h = encode_row(group.token_ids[r], group.segment_ids[r],
                           group.attention_mask[r], trace,
                           trace ? "encoder.row" + std::to_string(r) : "");
    cls_rows.push_back(ag::slice_rows(h, 0, 1));
    repr.values.push_back(std::move(h));
  }
  if (!cls_rows.empty()) repr.cls = ag::concat_rows(cls_rows);
  return repr;
}

}  // namespace pcred
