#ifndef PCRED_TOKENIZER_H_
#define PCRED_TOKENIZER_H_

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pcred {

// First and last subtoken index (inclusive) of one word.
struct SubtokenSpan {
  int first = 0;
  int last = 0;
  friend bool operator==(const SubtokenSpan&, const SubtokenSpan&) = default;
};

struct WordEncoding {
  std::vector<int> ids;
  std::vector<SubtokenSpan> word_spans;  // one per input word
};

// Tokenizer contract used by group construction: words to subtoken ids with
// per-word offsets, plus the special marker ids.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::vector<int> tokenize_word(std::string_view word) const = 0;
  virtual int cls_id() const = 0;
  virtual int sep_id() const = 0;
  virtual int pad_id() const = 0;
  virtual int unk_id() const = 0;
  virtual int vocab_size() const = 0;
  virtual const std::string& token(int id) const = 0;

  // Words that produce no subtokens are encoded as the unknown token so every
  // word keeps a non-empty span.
  WordEncoding encode_words(std::span<const std::string> words) const;
  // Whitespace-split text, e.g. a relation label.
  std::vector<int> encode_text(std::string_view text) const;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int find(std::string_view token) const;  // -1 when absent
  const std::string& token(int id) const { return tokens_.at(id); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";

// Greedy longest-match-first WordPiece with BERT-style basic splitting of
// ASCII punctuation and optional lowercasing.
class WordPieceTokenizer : public Tokenizer {
 public:
  explicit WordPieceTokenizer(Vocabulary vocab, bool lowercase = true);

  std::vector<int> tokenize_word(std::string_view word) const override;
  int cls_id() const override { return cls_; }
  int sep_id() const override { return sep_; }
  int pad_id() const override { return pad_; }
  int unk_id() const override { return unk_; }
  int vocab_size() const override { return vocab_.size(); }
  const std::string& token(int id) const override { return vocab_.token(id); }

  const Vocabulary& vocabulary() const { return vocab_; }
  bool lowercase() const { return lowercase_; }

 private:
  void wordpiece(std::string_view piece, std::vector<int>& out) const;

  Vocabulary vocab_;
  bool lowercase_;
  int cls_, sep_, pad_, unk_;
};

// Splits a word into basic pieces: lowercased (ASCII) when requested, with
// every ASCII punctuation character as its own piece.
std::vector<std::string> basic_pieces(std::string_view word, bool lowercase);

// Whole-word vocabulary over `texts` (words and whitespace-split label
// texts), special tokens first, remaining tokens sorted.
Vocabulary build_vocabulary(std::span<const std::string> texts,
                            bool lowercase = true);

}  // namespace pcred

#endif  // PCRED_TOKENIZER_H_
