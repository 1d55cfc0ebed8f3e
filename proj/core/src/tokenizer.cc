#include "pcred/tokenizer.h"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "pcred/errors.h"

namespace pcred {

namespace {

constexpr std::size_t kMaxWordBytes = 100;

bool is_utf8_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

}  // namespace

WordEncoding Tokenizer::encode_words(std::span<const std::string> words) const {
  WordEncoding enc;
  for (const std::string& word : words) {
    std::vector<int> ids = tokenize_word(word);
    if (ids.empty()) ids.push_back(unk_id());
    const int first = static_cast<int>(enc.ids.size());
    enc.ids.insert(enc.ids.end(), ids.begin(), ids.end());
    enc.word_spans.push_back({first, static_cast<int>(enc.ids.size()) - 1});
  }
  return enc;
}

std::vector<int> Tokenizer::encode_text(std::string_view text) const {
  std::vector<std::string> words = split_whitespace(text);
  return encode_words(words).ids;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ValidationError("duplicate vocabulary token: " + tokens_[i]);
    }
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const std::string& t : tokens_) out << t << '\n';
}

int Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? -1 : it->second;
}

std::vector<std::string> basic_pieces(std::string_view word, bool lowercase) {
  std::vector<std::string> pieces;
  std::string current;
  for (char ch : word) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) pieces.push_back(std::move(current));
      current.clear();
    } else if (c < 0x80 && std::ispunct(c)) {
      if (!current.empty()) pieces.push_back(std::move(current));
      current.clear();
      pieces.emplace_back(1, ch);
    } else {
      current.push_back(lowercase && c < 0x80
                            ? static_cast<char>(std::tolower(c))
                            : ch);
    }
  }
  if (!current.empty()) pieces.push_back(std::move(current));
  return pieces;
}

WordPieceTokenizer::WordPieceTokenizer(Vocabulary vocab, bool lowercase)
    : vocab_(std::move(vocab)), lowercase_(lowercase) {
  cls_ = vocab_.find(kClsToken);
  sep_ = vocab_.find(kSepToken);
  pad_ = vocab_.find(kPadToken);
  unk_ = vocab_.find(kUnkToken);
  if (cls_ < 0 || sep_ < 0 || pad_ < 0 || unk_ < 0) {
    throw ConfigError("vocabulary lacks one of [PAD] [UNK] [CLS] [SEP]");
  }
}

void WordPieceTokenizer::wordpiece(std::string_view piece,
                                   std::vector<int>& out) const {
  if (piece.size() > kMaxWordBytes) {
    out.push_back(unk_);
    return;
  }
  std::vector<int> ids;
  std::size_t start = 0;
  while (start < piece.size()) {
    std::size_t end = piece.size();
    int found = -1;
    while (end > start) {
      // Only cut on UTF-8 character boundaries.
      if (end < piece.size() &&
          is_utf8_continuation(static_cast<unsigned char>(piece[end]))) {
        --end;
        continue;
      }
      std::string candidate(piece.substr(start, end - start));
      if (start > 0) candidate.insert(0, "##");
      found = vocab_.find(candidate);
      if (found >= 0) break;
      --end;
    }
    if (found < 0) {
      out.push_back(unk_);
      return;
    }
    ids.push_back(found);
    start = end;
  }
  out.insert(out.end(), ids.begin(), ids.end());
}

std::vector<int> WordPieceTokenizer::tokenize_word(std::string_view word) const {
  std::vector<int> out;
  for (const std::string& piece : basic_pieces(word, lowercase_)) {
    wordpiece(piece, out);
  }
  return out;
}

Vocabulary build_vocabulary(std::span<const std::string> texts,
                            bool lowercase) {
  std::set<std::string> words;
  for (const std::string& text : texts) {
    for (const std::string& w : split_whitespace(text)) {
      for (std::string& piece : basic_pieces(w, lowercase)) {
        words.insert(std::move(piece));
      }
    }
  }
  std::vector<std::string> tokens = {std::string(kPadToken),
                                     std::string(kUnkToken),
                                     std::string(kClsToken),
                                     std::string(kSepToken)};
  for (const std::string& w : words) {
    if (w != kPadToken && w != kUnkToken && w != kClsToken && w != kSepToken) {
      tokens.push_back(w);
    }
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace pcred
