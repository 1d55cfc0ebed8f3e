#include "pcred/corpus.h"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "pcred/errors.h"
#include "pcred/rng.h"

namespace pcred {

using json = nlohmann::json;

std::vector<std::string> Instance::relations() const {
  std::vector<std::string> out;
  for (const Triplet& t : triplets) {
    if (std::find(out.begin(), out.end(), t.relation) == out.end()) {
      out.push_back(t.relation);
    }
  }
  return out;
}

LabelSet::LabelSet(const std::vector<std::string>& texts) {
  for (const std::string& text : texts) add(text);
}

int LabelSet::add(std::string_view text) {
  if (text.empty()) throw ValidationError("relation label text is empty");
  if (auto it = by_text_.find(text); it != by_text_.end()) return it->second;
  const int id = static_cast<int>(labels_.size());
  labels_.push_back(RelationLabel{id, std::string(text)});
  by_text_.emplace(std::string(text), id);
  return id;
}

std::optional<int> LabelSet::find(std::string_view text) const {
  if (auto it = by_text_.find(text); it != by_text_.end()) return it->second;
  return std::nullopt;
}

void validate_instance(const Instance& instance) {
  const int n = static_cast<int>(instance.words.size());
  if (instance.triplets.empty()) {
    throw ValidationError("instance " + instance.id + " has no triplets");
  }
  auto check = [&](const WordSpan& span, const char* which) {
    if (span.start < 0 || span.start > span.end || span.end >= n) {
      throw ValidationError("instance " + instance.id + ": " + which +
                            " span [" + std::to_string(span.start) + ", " +
                            std::to_string(span.end) +
                            "] out of range for " + std::to_string(n) +
                            " words");
    }
  };
  for (const Triplet& t : instance.triplets) {
    check(t.head, "head");
    check(t.tail, "tail");
    if (t.relation.empty()) {
      throw ValidationError("instance " + instance.id + ": empty relation");
    }
  }
}

namespace {

// Accepts either a list of contiguous word indices or a [start, end] pair
// object {"start": s, "end": e}.
WordSpan parse_span(const json& value, long line) {
  if (value.is_object()) {
    return WordSpan{value.at("start").get<int>(), value.at("end").get<int>()};
  }
  if (!value.is_array() || value.empty()) {
    throw ParseError("entity span must be a non-empty index list", line);
  }
  std::vector<int> idx = value.get<std::vector<int>>();
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (idx[i] != idx[i - 1] + 1) {
      throw ParseError("entity span indices must be contiguous and ascending",
                       line);
    }
  }
  return WordSpan{idx.front(), idx.back()};
}

Instance parse_record(const json& record, long line) {
  if (!record.is_object()) throw ParseError("record is not an object", line);
  Instance instance;
  instance.id = record.contains("id") ? record["id"].get<std::string>()
                                      : std::to_string(line);
  if (!record.contains("triplets") || !record["triplets"].is_array()) {
    throw ParseError("record has no \"triplets\" array", line);
  }
  if (record.contains("tokens")) {
    instance.words = record["tokens"].get<std::vector<std::string>>();
  }
  for (const json& t : record["triplets"]) {
    if (t.contains("tokens")) {
      auto words = t["tokens"].get<std::vector<std::string>>();
      if (instance.words.empty()) {
        instance.words = std::move(words);
      } else if (words != instance.words) {
        throw ParseError("triplets of one record disagree on tokens", line);
      }
    }
    if (!t.contains("head") || !t.contains("tail") || !t.contains("label")) {
      throw ParseError("triplet needs \"head\", \"tail\" and \"label\"", line);
    }
    instance.triplets.push_back(Triplet{parse_span(t["head"], line),
                                        parse_span(t["tail"], line),
                                        t["label"].get<std::string>()});
  }
  if (instance.words.empty()) throw ParseError("record has no tokens", line);
  return instance;
}

json span_json(const WordSpan& span) {
  json out = json::array();
  for (int i = span.start; i <= span.end; ++i) out.push_back(i);
  return out;
}

}  // namespace

Corpus parse_corpus(std::istream& in) {
  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  std::string text;
  long line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Instance instance;
    try {
      instance = parse_record(json::parse(text), line);
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line);
    }
    try {
      validate_instance(instance);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line) + ": " + e.what());
    }
    if (!seen_ids.insert(instance.id).second) {
      throw ValidationError("line " + std::to_string(line) +
                            ": duplicate instance id " + instance.id);
    }
    for (const Triplet& t : instance.triplets) corpus.labels.add(t.relation);
    corpus.instances.push_back(std::move(instance));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (format != CorpusFormat::kJsonl) throw ConfigError("unsupported format");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  return parse_corpus(in);
}

void write_corpus(std::ostream& out, const std::vector<Instance>& instances) {
  for (const Instance& instance : instances) {
    json record;
    record["id"] = instance.id;
    record["tokens"] = instance.words;
    record["triplets"] = json::array();
    for (const Triplet& t : instance.triplets) {
      record["triplets"].push_back({{"head", span_json(t.head)},
                                    {"tail", span_json(t.tail)},
                                    {"label", t.relation}});
    }
    out << record.dump() << '\n';
  }
}

void write_corpus(const std::filesystem::path& path,
                  const std::vector<Instance>& instances) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_corpus(out, instances);
}

std::vector<RelationLabel> ZeroShotSplit::unseen_labels() const {
  std::vector<RelationLabel> out = validation_labels;
  out.insert(out.end(), test_labels.begin(), test_labels.end());
  return out;
}

namespace {

enum class Partition { kSeen, kValidation, kTest, kMixed };

Partition classify(const Instance& instance,
                   const std::map<std::string, Partition, std::less<>>& where) {
  std::optional<Partition> found;
  for (const Triplet& t : instance.triplets) {
    auto it = where.find(t.relation);
    if (it == where.end()) return Partition::kMixed;
    if (found && *found != it->second) return Partition::kMixed;
    found = it->second;
  }
  return found.value_or(Partition::kMixed);
}

}  // namespace

std::vector<ZeroShotSplit> make_splits(const std::vector<Instance>& instances,
                                       const LabelSet& labels, int m,
                                       int n_folds,
                                       const std::vector<std::uint64_t>& seeds) {
  if (m < 1) throw ConfigError("m must be at least 1");
  if (static_cast<std::size_t>(m + kValidationLabelCount) > labels.size()) {
    throw ConfigError("m=" + std::to_string(m) + " plus " +
                      std::to_string(kValidationLabelCount) +
                      " validation labels exceeds the " +
                      std::to_string(labels.size()) + " available labels");
  }
  if (n_folds < 1 || seeds.size() != static_cast<std::size_t>(n_folds)) {
    throw ConfigError("need exactly one seed per fold");
  }

  std::vector<ZeroShotSplit> folds;
  for (std::uint64_t seed : seeds) {
    std::vector<RelationLabel> order = labels.labels();
    Rng rng(seed);
    rng.shuffle(std::span(order));

    ZeroShotSplit split;
    split.fold_seed = seed;
    split.m = m;
    std::map<std::string, Partition, std::less<>> where;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i < static_cast<std::size_t>(m)) {
        split.test_labels.push_back(order[i]);
        where[order[i].text] = Partition::kTest;
      } else if (i < static_cast<std::size_t>(m + kValidationLabelCount)) {
        split.validation_labels.push_back(order[i]);
        where[order[i].text] = Partition::kValidation;
      } else {
        split.seen_labels.push_back(order[i]);
        where[order[i].text] = Partition::kSeen;
      }
    }
    auto by_id = [](const RelationLabel& a, const RelationLabel& b) {
      return a.id < b.id;
    };
    std::sort(split.test_labels.begin(), split.test_labels.end(), by_id);
    std::sort(split.validation_labels.begin(), split.validation_labels.end(),
              by_id);
    std::sort(split.seen_labels.begin(), split.seen_labels.end(), by_id);

    for (const Instance& instance : instances) {
      switch (classify(instance, where)) {
        case Partition::kSeen: split.train.push_back(instance); break;
        case Partition::kValidation: split.validation.push_back(instance); break;
        case Partition::kTest: split.test.push_back(instance); break;
        case Partition::kMixed: break;
      }
    }
    folds.push_back(std::move(split));
  }
  return folds;
}

namespace {

json label_texts(const std::vector<RelationLabel>& labels) {
  json out = json::array();
  for (const RelationLabel& l : labels) out.push_back(l.text);
  return out;
}

json instance_ids(const std::vector<Instance>& instances) {
  json out = json::array();
  for (const Instance& i : instances) out.push_back(i.id);
  return out;
}

}  // namespace

std::string split_manifest_json(const ZeroShotSplit& split) {
  json manifest;
  manifest["fold_seed"] = split.fold_seed;
  manifest["m"] = split.m;
  manifest["seen_labels"] = label_texts(split.seen_labels);
  manifest["validation_labels"] = label_texts(split.validation_labels);
  manifest["test_labels"] = label_texts(split.test_labels);
  manifest["train_ids"] = instance_ids(split.train);
  manifest["validation_ids"] = instance_ids(split.validation);
  manifest["test_ids"] = instance_ids(split.test);
  return manifest.dump(2) + "\n";
}

void write_split_manifest(const std::filesystem::path& path,
                          const ZeroShotSplit& split) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << split_manifest_json(split);
}

ZeroShotSplit load_split_manifest(const std::filesystem::path& path,
                                  const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split manifest " + path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }

  std::map<std::string, const Instance*, std::less<>> by_id;
  for (const Instance& i : corpus.instances) by_id[i.id] = &i;

  auto labels = [&](const char* key) {
    std::vector<RelationLabel> out;
    for (const std::string& text :
         manifest.at(key).get<std::vector<std::string>>()) {
      auto id = corpus.labels.find(text);
      if (!id) throw ValidationError("manifest label not in corpus: " + text);
      out.push_back(corpus.labels[*id]);
    }
    return out;
  };
  auto instances = [&](const char* key) {
    std::vector<Instance> out;
    for (const std::string& id :
         manifest.at(key).get<std::vector<std::string>>()) {
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw ValidationError("manifest instance not in corpus: " + id);
      }
      out.push_back(*it->second);
    }
    return out;
  };

  ZeroShotSplit split;
  try {
    split.fold_seed = manifest.at("fold_seed").get<std::uint64_t>();
    split.m = manifest.at("m").get<int>();
    split.seen_labels = labels("seen_labels");
    split.validation_labels = labels("validation_labels");
    split.test_labels = labels("test_labels");
    split.train = instances("train_ids");
    split.validation = instances("validation_ids");
    split.test = instances("test_ids");
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  return split;
}

}  // namespace pcred
