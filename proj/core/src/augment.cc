#include "pcred/augment.h"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "pcred/errors.h"

namespace pcred {

std::vector<RelationLabel> sample_candidates(const Instance& instance,
                                             std::span<const RelationLabel> pool,
                                             int group_size, Rng& rng) {
  const std::vector<std::string> gold = instance.relations();
  const int k = static_cast<int>(gold.size());
  if (k > group_size) {
    throw ConfigError("instance " + instance.id + " expresses " +
                      std::to_string(k) + " relations but group size is " +
                      std::to_string(group_size) + "; increase group_size");
  }

  std::vector<RelationLabel> out;
  std::vector<RelationLabel> irrelevant;
  for (const std::string& text : gold) {
    auto it = std::find_if(pool.begin(), pool.end(),
                           [&](const RelationLabel& l) { return l.text == text; });
    if (it == pool.end()) {
      throw ValidationError("gold relation '" + text + "' of instance " +
                            instance.id + " is not in the candidate pool");
    }
    out.push_back(*it);
  }
  for (const RelationLabel& label : pool) {
    if (std::find(gold.begin(), gold.end(), label.text) == gold.end()) {
      irrelevant.push_back(label);
    }
  }
  const int needed = group_size - k;
  if (static_cast<int>(irrelevant.size()) < needed) {
    throw ConfigError("candidate pool too small for group size " +
                      std::to_string(group_size));
  }
  // Partial Fisher-Yates: the first `needed` entries become the sample.
  for (int i = 0; i < needed; ++i) {
    const std::size_t j = i + rng.below(irrelevant.size() - i);
    std::swap(irrelevant[i], irrelevant[j]);
    out.push_back(irrelevant[i]);
  }
  rng.shuffle(std::span(out));
  return out;
}

std::vector<RelationLabel> all_candidates(std::span<const RelationLabel> labels) {
  if (labels.empty()) throw ConfigError("evaluation label set is empty");
  std::vector<RelationLabel> out(labels.begin(), labels.end());
  std::sort(out.begin(), out.end(),
            [](const RelationLabel& a, const RelationLabel& b) {
              return a.id < b.id;
            });
  return out;
}

AugmentedGroup build_group(const Instance& instance,
                           std::span<const RelationLabel> candidates,
                           const Tokenizer& tokenizer, int max_length) {
  const WordEncoding sentence = tokenizer.encode_words(instance.words);
  if (sentence.ids.empty()) {
    throw InputError("instance " + instance.id + " has no subtokens");
  }
  const std::vector<std::string> gold = instance.relations();

  AugmentedGroup group;
  group.max_length = max_length;
  for (const RelationLabel& candidate : candidates) {
    const std::vector<int> relation = tokenizer.encode_text(candidate.text);
    const int room = max_length - static_cast<int>(relation.size()) - 3;
    if (room < 1) {
      throw InputError("relation '" + candidate.text +
                       "' leaves no room for the sentence at max length " +
                       std::to_string(max_length));
    }
    const int kept = std::min(room, static_cast<int>(sentence.ids.size()));
    if (kept < static_cast<int>(sentence.ids.size())) {
      spdlog::warn("instance {}: truncated {} sentence subtokens for '{}'",
                   instance.id, sentence.ids.size() - kept, candidate.text);
    }

    std::vector<int> ids(max_length, tokenizer.pad_id());
    std::vector<int> segments(max_length, 0);
    std::vector<int> mask(max_length, 0);
    int pos = 0;
    ids[pos++] = tokenizer.cls_id();
    for (int i = 0; i < kept; ++i) ids[pos++] = sentence.ids[i];
    ids[pos++] = tokenizer.sep_id();
    for (int id : relation) {
      segments[pos] = 1;
      ids[pos++] = id;
    }
    segments[pos] = 1;
    ids[pos++] = tokenizer.sep_id();
    std::fill(mask.begin(), mask.begin() + pos, 1);

    std::vector<std::optional<SubtokenSpan>> alignment;
    for (const SubtokenSpan& span : sentence.word_spans) {
      if (span.last < kept) {
        alignment.push_back(span);
      } else {
        alignment.push_back(std::nullopt);
      }
    }

    group.token_ids.push_back(std::move(ids));
    group.segment_ids.push_back(std::move(segments));
    group.attention_mask.push_back(std::move(mask));
    group.candidates.push_back(candidate);
    group.gold_mask.push_back(
        std::find(gold.begin(), gold.end(), candidate.text) != gold.end());
    group.word_alignment.push_back(std::move(alignment));
    group.sentence_token_count.push_back(kept);
  }
  // Pad to the longest row of the group rather than to max_length.
  int width = 0;
  for (const auto& mask : group.attention_mask) {
    width = std::max(width, static_cast<int>(std::count(mask.begin(), mask.end(), 1)));
  }
  for (int r = 0; r < group.size(); ++r) {
    group.token_ids[r].resize(width);
    group.segment_ids[r].resize(width);
    group.attention_mask[r].resize(width);
  }
  group.max_length = width;
  return group;
}

std::optional<Quadruple> gold_quadruple(const AugmentedGroup& group, int row,
                                        const Triplet& triplet) {
  const auto& alignment = group.word_alignment.at(row);
  auto span = [&](const WordSpan& words)
      -> std::optional<std::pair<int, int>> {
    if (words.start < 0 || words.end >= static_cast<int>(alignment.size())) {
      throw InternalError("gold span outside the aligned sentence");
    }
    const auto& first = alignment[words.start];
    const auto& last = alignment[words.end];
    if (!first || !last) return std::nullopt;
    return std::pair{first->first + kSentenceOffset,
                     last->last + kSentenceOffset};
  };
  auto head = span(triplet.head);
  auto tail = span(triplet.tail);
  if (!head || !tail) return std::nullopt;
  return Quadruple{head->first, head->second, tail->first, tail->second};
}

int word_at_position(const AugmentedGroup& group, int row, int position) {
  const int subtoken = position - kSentenceOffset;
  if (subtoken < 0 || subtoken >= group.sentence_token_count.at(row)) return -1;
  const auto& alignment = group.word_alignment[row];
  for (std::size_t w = 0; w < alignment.size(); ++w) {
    if (alignment[w] && alignment[w]->first <= subtoken &&
        subtoken <= alignment[w]->last) {
      return static_cast<int>(w);
    }
  }
  return -1;
}

}  // namespace pcred
