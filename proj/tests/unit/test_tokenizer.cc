#include <doctest.h>

#include <filesystem>

#include "oracles.h"
#include "pcred/tokenizer.h"

using namespace pcred;

TEST_CASE("greedy longest match with continuation pieces") {
  const auto tok = testing::example_tokenizer();
  const auto ids = tok.tokenize_word("Democratic");
  REQUIRE(ids.size() == 2);
  CHECK(tok.token(ids[0]) == "demo");
  CHECK(tok.token(ids[1]) == "##cratic");
}

TEST_CASE("unknown words map to the unknown token") {
  const auto tok = testing::example_tokenizer();
  const auto ids = tok.tokenize_word("zebra");
  REQUIRE(ids.size() == 1);
  CHECK(ids[0] == tok.unk_id());
}

TEST_CASE("punctuation is split from words") {
  CHECK(basic_pieces("Paris,", true) == std::vector<std::string>{"paris", ","});
  CHECK(basic_pieces("U.S.", false) ==
        std::vector<std::string>{"U", ".", "S", "."});
}

TEST_CASE("word spans are contiguous and cover every subtoken") {
  const auto tok = testing::example_tokenizer();
  const auto instance = testing::example_instance();
  const WordEncoding enc = tok.encode_words(instance.words);
  REQUIRE(enc.word_spans.size() == instance.words.size());
  int expected = 0;
  for (const auto& s : enc.word_spans) {
    CHECK(s.first == expected);
    CHECK(s.last >= s.first);
    expected = s.last + 1;
  }
  CHECK(expected == static_cast<int>(enc.ids.size()));
  CHECK(enc.word_spans[3] == SubtokenSpan{3, 4});
}

TEST_CASE("vocabulary save and load round-trip") {
  const auto tok = testing::example_tokenizer();
  const auto path = std::filesystem::temp_directory_path() / "pcred_vocab_test.txt";
  tok.vocabulary().save(path);
  const Vocabulary back = Vocabulary::load(path);
  CHECK(back.tokens() == tok.vocabulary().tokens());
  std::filesystem::remove(path);
}

TEST_CASE("built vocabulary starts with the special tokens") {
  const std::vector<std::string> texts = {"b a", "c", "A"};
  const Vocabulary v = build_vocabulary(texts);
  REQUIRE(v.size() == 7);
  CHECK(v.token(0) == "[PAD]");
  CHECK(v.token(1) == "[UNK]");
  CHECK(v.token(2) == "[CLS]");
  CHECK(v.token(3) == "[SEP]");
  CHECK(v.find("a") >= 4);
  CHECK(v.find("A") == -1);
}
