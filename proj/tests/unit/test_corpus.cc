#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "oracles.h"
#include "pcred/corpus.h"
#include "pcred/errors.h"

using namespace pcred;

namespace {

constexpr const char* kRecord =
    R"({"id": "t1", "tokens": ["Richard", "is", "a", "Democratic", "politician", "in", "the", "United", "States", "."],)"
    R"( "triplets": [{"head": [0], "tail": [3], "label": "member of political party"},)"
    R"( {"head": {"start": 0, "end": 0}, "tail": [6, 7, 8], "label": "country of citizenship"}]})";

// Corpus with `n_labels` relations, `per_label` single-triplet instances
// each, plus some two-relation instances.
Corpus labelled_corpus(int n_labels, int per_label) {
  Corpus c;
  int next = 0;
  for (int l = 0; l < n_labels; ++l) {
    const std::string label = "relation " + std::to_string(l);
    c.labels.add(label);
    for (int k = 0; k < per_label; ++k) {
      Instance i;
      i.id = "i" + std::to_string(next++);
      i.words = {"a", "b", "c", "d"};
      i.triplets = {{{0, 0}, {2, 3}, label}};
      c.instances.push_back(i);
    }
  }
  for (int l = 0; l + 1 < n_labels; l += 2) {
    Instance i;
    i.id = "pair" + std::to_string(l);
    i.words = {"a", "b", "c", "d"};
    i.triplets = {{{0, 0}, {1, 1}, c.labels[l].text},
                  {{2, 2}, {3, 3}, c.labels[l + 1].text}};
    c.instances.push_back(i);
  }
  return c;
}

std::vector<std::uint64_t> seeds(int n) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < n; ++i) s.push_back(100 + i);
  return s;
}

}  // namespace

TEST_CASE("one record with two triplets") {
  std::istringstream in(kRecord);
  const Corpus c = parse_corpus(in);
  REQUIRE(c.instances.size() == 1);
  CHECK(c.instances[0].triplets.size() == 2);
  CHECK(c.labels.size() == 2);
  CHECK(c.instances[0].triplets[1].tail == WordSpan{6, 8});
  CHECK(c.labels[0].text == "member of political party");
}

TEST_CASE("empty input gives an empty corpus") {
  std::istringstream in("");
  const Corpus c = parse_corpus(in);
  CHECK(c.instances.empty());
  CHECK(c.labels.empty());
}

TEST_CASE("span past the last word is a validation error") {
  std::istringstream in(
      R"({"tokens": ["a", "b"], "triplets": [{"head": [0], "tail": [2], "label": "r"}]})");
  CHECK_THROWS_AS(parse_corpus(in), ValidationError);
}

TEST_CASE("malformed line reports its line number") {
  std::istringstream in(std::string(kRecord) + "\n\n{not json\n");
  try {
    parse_corpus(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("non-contiguous span list is rejected") {
  std::istringstream in(
      R"({"tokens": ["a", "b", "c"], "triplets": [{"head": [0, 2], "tail": [1], "label": "r"}]})");
  CHECK_THROWS_AS(parse_corpus(in), ParseError);
}

TEST_CASE("duplicate ids are rejected") {
  std::istringstream in(std::string(kRecord) + "\n" + kRecord + "\n");
  CHECK_THROWS_AS(parse_corpus(in), ValidationError);
}

TEST_CASE("write then parse round-trips") {
  std::istringstream in(kRecord);
  const Corpus c = parse_corpus(in);
  std::ostringstream out;
  write_corpus(out, c.instances);
  std::istringstream back(out.str());
  const Corpus d = parse_corpus(back);
  REQUIRE(d.instances.size() == 1);
  CHECK(d.instances[0].words == c.instances[0].words);
  CHECK(d.instances[0].triplets.size() == 2);
  CHECK(d.instances[0].triplets[0].relation == c.instances[0].triplets[0].relation);
  CHECK(d.instances[0].triplets[1].tail == c.instances[0].triplets[1].tail);
}

TEST_CASE("label counts per fold match the split protocol") {
  const Corpus fewrel = labelled_corpus(80, 2);
  for (auto [m, train] : {std::pair{5, 70}, {10, 65}, {15, 60}}) {
    const auto splits = make_splits(fewrel.instances, fewrel.labels, m, 5, seeds(5));
    REQUIRE(splits.size() == 5);
    for (const auto& s : splits) {
      CHECK(static_cast<int>(s.seen_labels.size()) == train);
      CHECK(s.validation_labels.size() == 5);
      CHECK(static_cast<int>(s.test_labels.size()) == m);
    }
  }
  const Corpus wiki = labelled_corpus(113, 1);
  const auto splits = make_splits(wiki.instances, wiki.labels, 15, 5, seeds(5));
  CHECK(splits[0].seen_labels.size() == 93);
}

TEST_CASE("fold partitions are disjoint and instances respect them") {
  const Corpus c = labelled_corpus(20, 3);
  const auto splits = make_splits(c.instances, c.labels, 5, 3, seeds(3));
  for (const auto& s : splits) {
    std::set<std::string> seen, unseen, test;
    for (const auto& l : s.seen_labels) seen.insert(l.text);
    for (const auto& l : s.unseen_labels()) unseen.insert(l.text);
    for (const auto& l : s.test_labels) test.insert(l.text);
    for (const auto& l : unseen) CHECK(seen.count(l) == 0);
    for (const auto& i : s.test) {
      for (const auto& t : i.triplets) {
        CHECK(seen.count(t.relation) == 0);
        CHECK(test.count(t.relation) == 1);
      }
    }
    for (const auto& i : s.train) {
      for (const auto& t : i.triplets) CHECK(seen.count(t.relation) == 1);
    }
  }
}

TEST_CASE("splits are deterministic per seed and differ across seeds") {
  const Corpus c = labelled_corpus(20, 2);
  const auto a = make_splits(c.instances, c.labels, 5, 2, {7, 8});
  const auto b = make_splits(c.instances, c.labels, 5, 2, {7, 8});
  CHECK(split_manifest_json(a[0]) == split_manifest_json(b[0]));
  CHECK(split_manifest_json(a[1]) == split_manifest_json(b[1]));
  CHECK(split_manifest_json(a[0]) != split_manifest_json(a[1]));
}

TEST_CASE("bad split parameters are configuration errors") {
  const Corpus c = labelled_corpus(80, 1);
  CHECK_THROWS_AS(make_splits(c.instances, c.labels, 200, 5, seeds(5)), ConfigError);
  CHECK_THROWS_AS(make_splits(c.instances, c.labels, 76, 1, seeds(1)), ConfigError);
  CHECK_THROWS_AS(make_splits(c.instances, c.labels, 0, 1, seeds(1)), ConfigError);
  CHECK_THROWS_AS(make_splits(c.instances, c.labels, 5, 5, seeds(4)), ConfigError);
}

TEST_CASE("manifest reload rebuilds the same split") {
  const Corpus c = labelled_corpus(20, 2);
  const auto splits = make_splits(c.instances, c.labels, 5, 1, {42});
  const auto path = std::filesystem::temp_directory_path() / "pcred_manifest_test.json";
  write_split_manifest(path, splits[0]);
  const ZeroShotSplit back = load_split_manifest(path, c);
  CHECK(split_manifest_json(back) == split_manifest_json(splits[0]));
  std::filesystem::remove(path);
}
