#ifndef PCRED_AUGMENT_H_
#define PCRED_AUGMENT_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pcred/corpus.h"
#include "pcred/rng.h"
#include "pcred/tokenizer.h"

namespace pcred {

// Row layout: [CLS] sentence [SEP] relation [SEP] [PAD]...
// Sentence subtoken i sits at row position i + kSentenceOffset.
inline constexpr int kSentenceOffset = 1;

// Entity boundaries as row positions (inclusive ends).
struct Quadruple {
  int head_start = 0;
  int head_end = 0;
  int tail_start = 0;
  int tail_end = 0;

  friend auto operator<=>(const Quadruple&, const Quadruple&) = default;
};

struct AugmentedGroup {
  int max_length = 0;  // padded row width l: longest row, at most the cap
  std::vector<std::vector<int>> token_ids;       // G x l
  std::vector<std::vector<int>> segment_ids;     // G x l
  std::vector<std::vector<int>> attention_mask;  // G x l
  std::vector<RelationLabel> candidates;
  std::vector<std::uint8_t> gold_mask;
  // Per row, per sentence word: subtoken span relative to the sentence, or
  // nullopt when truncation cut the word.
  std::vector<std::vector<std::optional<SubtokenSpan>>> word_alignment;
  std::vector<int> sentence_token_count;

  int size() const { return static_cast<int>(candidates.size()); }
};

// Gold relations plus G-K distinct irrelevant labels drawn from `pool`, in
// rng-shuffled order. Throws ConfigError when K > G or the pool is too small.
std::vector<RelationLabel> sample_candidates(const Instance& instance,
                                             std::span<const RelationLabel> pool,
                                             int group_size, Rng& rng);

// Every label of the evaluation label set, ordered by label id.
std::vector<RelationLabel> all_candidates(std::span<const RelationLabel> labels);

// Builds one row per candidate. Rows longer than max_length lose sentence
// tail subtokens, never relation text.
AugmentedGroup build_group(const Instance& instance,
                           std::span<const RelationLabel> candidates,
                           const Tokenizer& tokenizer, int max_length);

// Gold quadruple of `triplet` in row positions of `row`, or nullopt when an
// entity word was truncated away.
std::optional<Quadruple> gold_quadruple(const AugmentedGroup& group, int row,
                                        const Triplet& triplet);

// Word index containing the sentence subtoken at row position `position`,
// or -1 when the position is outside the sentence.
int word_at_position(const AugmentedGroup& group, int row, int position);

}  // namespace pcred

#endif  // PCRED_AUGMENT_H_
