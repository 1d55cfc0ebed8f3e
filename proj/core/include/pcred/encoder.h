#ifndef PCRED_ENCODER_H_
#define PCRED_ENCODER_H_

#include <string>
#include <vector>

#include "pcred/augment.h"
#include "pcred/nn.h"

namespace pcred {

struct EncoderConfig {
  int vocab_size = 0;
  int hidden_size = 16;
  int layers = 2;
  int heads = 2;
  int intermediate_size = 64;
  int max_positions = 128;
  int type_vocab_size = 2;
  double layer_norm_eps = 1e-12;
  // Keep the word-embedding table fixed during training.
  bool freeze_word_embeddings = false;

  // Small configuration used by tests and desk-scale runs.
  static EncoderConfig tiny(int vocab_size);
  // Shape of a base-size pretrained bidirectional encoder.
  static EncoderConfig base(int vocab_size);
};

// Contextual representation of one augmented group.
struct ContextualRepr {
  std::vector<ag::Var> values;  // G entries of l x d
  ag::Var cls;                  // G x d, position 0 of every row

  int rows() const { return static_cast<int>(values.size()); }
};

// Post-LayerNorm transformer encoder with word, position and segment
// embeddings. Parameter names follow the common pretrained-checkpoint layout
// under the "encoder." prefix so converted weights load by name.
class TransformerEncoder {
 public:
  TransformerEncoder(const EncoderConfig& config, nn::ParameterStore& store,
                     Rng& rng);

  const EncoderConfig& config() const { return config_; }

  ContextualRepr encode(const AugmentedGroup& group,
                        std::vector<nn::AttentionRecord>* trace = nullptr) const;

  // One sequence: ids, segments and mask all of length l. Returns l x d.
  ag::Var encode_row(const std::vector<int>& ids,
                     const std::vector<int>& segments,
                     const std::vector<int>& mask,
                     std::vector<nn::AttentionRecord>* trace = nullptr,
                     const std::string& tag = {}) const;

 private:
  struct Layer {
    nn::MultiHeadAttention attention;
    nn::LayerNorm attention_norm;
    nn::Linear intermediate;
    nn::Linear output;
    nn::LayerNorm output_norm;
  };

  EncoderConfig config_;
  ag::Var word_embeddings_;
  ag::Var position_embeddings_;
  ag::Var segment_embeddings_;
  nn::LayerNorm embedding_norm_;
  std::vector<Layer> layers_;
};

}  // namespace pcred

#endif  // PCRED_ENCODER_H_
