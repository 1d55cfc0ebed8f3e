#include <doctest.h>

#include <algorithm>
#include <set>

#include "oracles.h"
#include "pcred/augment.h"
#include "pcred/errors.h"

using namespace pcred;

namespace {

std::vector<RelationLabel> table1_pool() {
  return {{0, "member of political party"},
          {1, "country of citizenship"},
          {2, "position held"}};
}

std::string row_text(const AugmentedGroup& g, const Tokenizer& tok, int r) {
  std::string out;
  for (std::size_t p = 0; p < g.token_ids[r].size(); ++p) {
    if (!g.attention_mask[r][p]) break;
    if (!out.empty()) out += ' ';
    out += tok.token(g.token_ids[r][p]);
  }
  return out;
}

}  // namespace

TEST_CASE("candidates contain every gold relation") {
  const auto instance = testing::example_instance();
  Rng rng(1);
  const auto c = sample_candidates(instance, table1_pool(), 3, rng);
  REQUIRE(c.size() == 3);
  std::set<std::string> texts;
  for (const auto& l : c) texts.insert(l.text);
  CHECK(texts.count("member of political party") == 1);
  CHECK(texts.count("country of citizenship") == 1);
  CHECK(texts.count("position held") == 1);
}

TEST_CASE("G equal to the gold count yields exactly the gold set") {
  const auto instance = testing::example_instance();
  Rng rng(2);
  const auto c = sample_candidates(instance, table1_pool(), 2, rng);
  std::set<std::string> texts;
  for (const auto& l : c) texts.insert(l.text);
  CHECK(texts == std::set<std::string>{"member of political party",
                                       "country of citizenship"});
}

TEST_CASE("sampling is deterministic per seed") {
  const auto instance = testing::example_instance();
  std::vector<RelationLabel> pool = table1_pool();
  for (int i = 3; i < 12; ++i) pool.push_back({i, "rel " + std::to_string(i)});
  Rng a(9), b(9);
  const auto x = sample_candidates(instance, pool, 5, a);
  const auto y = sample_candidates(instance, pool, 5, b);
  REQUIRE(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].text == y[i].text);
}

TEST_CASE("more gold relations than G is a configuration error") {
  const auto instance = testing::example_instance();
  Rng rng(3);
  CHECK_THROWS_AS(sample_candidates(instance, table1_pool(), 1, rng), ConfigError);
}

TEST_CASE("all_candidates covers the label set") {
  std::vector<RelationLabel> labels;
  for (int i = 0; i < 15; ++i) labels.push_back({14 - i, "r" + std::to_string(i)});
  const auto c = all_candidates(labels);
  CHECK(c.size() == 15);
  CHECK(std::is_sorted(c.begin(), c.end(),
                       [](const auto& a, const auto& b) { return a.id < b.id; }));
  CHECK(all_candidates(std::span(labels).first(1)).size() == 1);
  CHECK_THROWS_AS(all_candidates({}), ConfigError);
}

TEST_CASE("augmented rows follow the sentence-marker-relation layout") {
  const auto tok = testing::example_tokenizer();
  const auto instance = testing::example_instance();
  const auto g = build_group(instance, table1_pool(), tok, 100);
  REQUIRE(g.size() == 3);
  CHECK(row_text(g, tok, 0) ==
        "[CLS] richard is a demo ##cratic politician in the united states . "
        "[SEP] member of political party [SEP]");
  CHECK(row_text(g, tok, 2) ==
        "[CLS] richard is a demo ##cratic politician in the united states . "
        "[SEP] position held [SEP]");
  CHECK(g.gold_mask == std::vector<std::uint8_t>{1, 1, 0});
  for (int r = 0; r < g.size(); ++r) CHECK(g.sentence_token_count[r] == 11);
}

TEST_CASE("segment ids mark the relation text and its trailing marker") {
  const auto tok = testing::example_tokenizer();
  const auto g = build_group(testing::example_instance(), table1_pool(), tok, 100);
  for (int r = 0; r < g.size(); ++r) {
    const int s = g.sentence_token_count[r];
    for (std::size_t p = 0; p < g.segment_ids[r].size(); ++p) {
      // [CLS] sentence [SEP] relation [SEP]
      const bool relation_part =
          static_cast<int>(p) >= s + 2 && g.attention_mask[r][p];
      CHECK(g.segment_ids[r][p] == (relation_part ? 1 : 0));
    }
  }
}

TEST_CASE("alignment maps a split word to both subtokens") {
  const auto tok = testing::example_tokenizer();
  const auto instance = testing::example_instance();
  const auto g = build_group(instance, table1_pool(), tok, 100);
  const auto& a = g.word_alignment[0];
  REQUIRE(a[3].has_value());
  CHECK(a[3]->last - a[3]->first == 1);
  // Re-detokenise every word from its aligned subtokens.
  for (std::size_t w = 0; w < instance.words.size(); ++w) {
    REQUIRE(a[w].has_value());
    CHECK(a[w]->first <= a[w]->last);
    CHECK(a[w]->last < g.sentence_token_count[0]);
    std::string text;
    for (int p = a[w]->first; p <= a[w]->last; ++p) {
      std::string piece = tok.token(g.token_ids[0][p + kSentenceOffset]);
      if (piece.rfind("##", 0) == 0) piece = piece.substr(2);
      text += piece;
    }
    std::string lowered = instance.words[w];
    std::transform(lowered.begin(), lowered.end(), lowered.begin(), ::tolower);
    CHECK(text == lowered);
  }
}

TEST_CASE("reordering candidates permutes rows identically") {
  const auto tok = testing::example_tokenizer();
  const auto instance = testing::example_instance();
  auto pool = table1_pool();
  const auto a = build_group(instance, pool, tok, 100);
  std::reverse(pool.begin(), pool.end());
  const auto b = build_group(instance, pool, tok, 100);
  for (int r = 0; r < 3; ++r) {
    CHECK(a.token_ids[r] == b.token_ids[2 - r]);
    CHECK(a.segment_ids[r] == b.segment_ids[2 - r]);
    CHECK(a.gold_mask[r] == b.gold_mask[2 - r]);
  }
}

TEST_CASE("gold quadruples land on the right subtokens") {
  const auto tok = testing::example_tokenizer();
  const auto instance = testing::example_instance();
  const auto g = build_group(instance, table1_pool(), tok, 100);
  const auto q = gold_quadruple(g, 0, instance.triplets[0]);
  REQUIRE(q.has_value());
  CHECK(*q == Quadruple{1, 1, 4, 5});
  CHECK(word_at_position(g, 0, 4) == 3);
  CHECK(word_at_position(g, 0, 5) == 3);
  CHECK(word_at_position(g, 0, 0) == -1);
  CHECK(word_at_position(g, 0, 12) == -1);
}

TEST_CASE("truncation drops tail words and their gold quadruples") {
  const auto tok = testing::example_tokenizer();
  const auto instance = testing::example_instance();
  // "country of citizenship" needs 3 subtokens: room = 12 - 3 - 3 = 6.
  const auto g = build_group(instance, table1_pool(), tok, 12);
  CHECK(g.sentence_token_count[1] == 6);
  CHECK_FALSE(g.word_alignment[1][6].has_value());
  CHECK_FALSE(gold_quadruple(g, 1, instance.triplets[1]).has_value());
  for (const auto& row : g.token_ids) CHECK(row.size() <= 12);
}

TEST_CASE("rows are padded to the longest row") {
  const auto tok = testing::example_tokenizer();
  const auto g = build_group(testing::example_instance(), table1_pool(), tok, 100);
  // Longest row: 1 + 11 + 1 + 4 + 1.
  CHECK(g.max_length == 18);
  CHECK(std::count(g.attention_mask[2].begin(), g.attention_mask[2].end(), 1) == 16);
  CHECK(g.token_ids[2][17] == tok.pad_id());
}

TEST_CASE("sentence without subtokens is an input error") {
  const auto tok = testing::example_tokenizer();
  Instance empty;
  empty.id = "e";
  CHECK_THROWS_AS(build_group(empty, table1_pool(), tok, 100), InputError);
}
