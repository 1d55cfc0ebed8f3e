#ifndef PCRED_CORPUS_H_
#define PCRED_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace pcred {

struct RelationLabel {
  int id = 0;
  std::string text;

  friend bool operator==(const RelationLabel&, const RelationLabel&) = default;
};

// Inclusive word span [start, end].
struct WordSpan {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  friend auto operator<=>(const WordSpan&, const WordSpan&) = default;
};

struct Triplet {
  WordSpan head;
  WordSpan tail;
  std::string relation;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct Instance {
  std::string id;
  std::vector<std::string> words;
  std::vector<Triplet> triplets;

  // Distinct relation texts in first-appearance order.
  std::vector<std::string> relations() const;
};

// Ordered, text-deduplicated relation labels with dense ids 0..size-1.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(const std::vector<std::string>& texts);

  // Returns the id of `text`, adding it when absent.
  int add(std::string_view text);
  std::optional<int> find(std::string_view text) const;
  bool contains(std::string_view text) const { return find(text).has_value(); }

  const RelationLabel& operator[](int id) const { return labels_.at(id); }
  const std::vector<RelationLabel>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

 private:
  std::vector<RelationLabel> labels_;
  std::map<std::string, int, std::less<>> by_text_;
};

struct Corpus {
  std::vector<Instance> instances;
  LabelSet labels;
};

enum class CorpusFormat { kJsonl };

// Checks spans against the word count; throws ValidationError.
void validate_instance(const Instance& instance);

// Reads the JSONL corpus layout documented in docs/corpus_schema.md.
// Malformed records raise ParseError with the line number; span violations
// raise ValidationError.
Corpus load_corpus(const std::filesystem::path& path,
                   CorpusFormat format = CorpusFormat::kJsonl);
Corpus parse_corpus(std::istream& in);

void write_corpus(std::ostream& out, const std::vector<Instance>& instances);
void write_corpus(const std::filesystem::path& path,
                  const std::vector<Instance>& instances);

// Number of relation labels held out for validation in every fold.
inline constexpr int kValidationLabelCount = 5;

struct ZeroShotSplit {
  std::uint64_t fold_seed = 0;
  int m = 0;
  std::vector<RelationLabel> seen_labels;
  std::vector<RelationLabel> validation_labels;
  std::vector<RelationLabel> test_labels;
  std::vector<Instance> train;
  std::vector<Instance> validation;
  std::vector<Instance> test;

  // validation_labels followed by test_labels.
  std::vector<RelationLabel> unseen_labels() const;
};

// Partitions labels into seen / validation-unseen / test-unseen per seed and
// assigns each instance to the partition holding all of its relations.
// Instances whose relations straddle partitions are dropped.
std::vector<ZeroShotSplit> make_splits(const std::vector<Instance>& instances,
                                       const LabelSet& labels, int m,
                                       int n_folds,
                                       const std::vector<std::uint64_t>& seeds);

// Split manifest: fold seed, label partitions and instance ids as JSON.
std::string split_manifest_json(const ZeroShotSplit& split);
void write_split_manifest(const std::filesystem::path& path,
                          const ZeroShotSplit& split);
// Rebuilds a split from a manifest and the corpus it was generated from.
ZeroShotSplit load_split_manifest(const std::filesystem::path& path,
                                  const Corpus& corpus);

}  // namespace pcred

#endif  // PCRED_CORPUS_H_
