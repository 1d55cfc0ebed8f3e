#ifndef PCRED_DECODER_H_
#define PCRED_DECODER_H_

#include <array>
#include <vector>

#include "pcred/augment.h"
#include "pcred/nn.h"

namespace pcred {

struct DecoderConfig {
  int hidden_size = 16;
  int max_triplets = 4;  // number of learned queries per relation
  int heads = 2;
  double layer_norm_eps = 1e-12;
};

enum BoundaryHead { kHeadStart = 0, kHeadEnd = 1, kTailStart = 2, kTailEnd = 3 };
inline constexpr int kBoundaryHeads = 4;

// Per-position log-probabilities of one relation row, N x l for each head.
struct BoundaryLogProbs {
  std::array<ag::Var, kBoundaryHeads> heads;
};

// Per-position probabilities of one relation row, N x l for each head.
struct BoundaryDistributions {
  std::array<ag::Matrix, kBoundaryHeads> heads;

  int queries() const { return static_cast<int>(heads[0].rows()); }
  int length() const { return static_cast<int>(heads[0].cols()); }
};

// One entry per kept relation, in kept-index order.
struct BoundarySet {
  std::vector<BoundaryDistributions> relations;
};

// Positions a boundary may point at: the leading marker (null sentinel) and
// the row's sentence subtokens. 0 there, -inf elsewhere.
ag::RowVector boundary_bias(const AugmentedGroup& group, int row);

// Learned queries refined by self-attention, cross-attending to one
// relation's sequence states, then four additive GELU scorers (one per
// boundary) producing a softmax over positions for every query.
class BoundaryDecoder {
 public:
  BoundaryDecoder(const DecoderConfig& config, nn::ParameterStore& store,
                  Rng& rng);

  const DecoderConfig& config() const { return config_; }

  // states: l x d of one kept row.
  BoundaryLogProbs decode_row(const ag::Var& states,
                              const std::vector<int>& attention_mask,
                              const ag::RowVector& position_bias,
                              std::vector<nn::AttentionRecord>* trace = nullptr,
                              const std::string& tag = {}) const;

  // Inference over the filtered rows of a group. `kept` names the source row
  // of each entry of `filtered`; an empty input yields an empty set.
  BoundarySet decode_boundaries(const std::vector<ag::Var>& filtered,
                                const std::vector<int>& kept,
                                const AugmentedGroup& group,
                                std::vector<nn::AttentionRecord>* trace =
                                    nullptr) const;

  const ag::Var& queries() const { return queries_; }

 private:
  struct Scorer {
    nn::Linear query_proj;
    nn::Linear state_proj;
    ag::Var ffn_weight;  // 1 x d
    ag::Var ffn_bias;    // 1 x 1
  };

  DecoderConfig config_;
  ag::Var queries_;
  nn::MultiHeadAttention self_attention_;
  nn::LayerNorm self_norm_;
  nn::MultiHeadAttention cross_attention_;
  nn::LayerNorm cross_norm_;
  std::array<Scorer, kBoundaryHeads> scorers_;
};

BoundaryDistributions to_distributions(const BoundaryLogProbs& log_probs);

}  // namespace pcred

#endif  // PCRED_DECODER_H_
