#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "traitgrade/dataset.hpp"

namespace traitgrade {

// Rule-based splitter: breaks after runs of '.', '!' or '?' (plus closing quotes or
// brackets) that are followed by whitespace, except after known abbreviations and
// single-letter initials. Throws EmptyEssayError on blank text.
std::vector<std::string> split_sentences(std::string_view text);

// Lowercased word/punctuation tokens with clitics split off ("don't" -> "do",
// "n't"). ASAP anonymisation placeholders such as "@PERSON1" stay whole.
std::vector<std::string> tokenize(std::string_view sentence);

// Token ids of one essay, sentence by sentence.
using EncodedEssay = std::vector<std::vector<int>>;

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr std::size_t kDefaultMaxWords = 4000;

  Vocabulary();
  // `content` lists content tokens in id order (ids start at 2).
  static Vocabulary from_tokens(std::span<const std::string> content);

  int lookup(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  // Every token in id order, specials included.
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Most frequent `max_words` tokens of the given essays; ties broken lexicographically.
Vocabulary build_vocab(std::span<const EssayRecord> train_essays,
                       std::size_t max_words = Vocabulary::kDefaultMaxWords);
Vocabulary build_vocab_from_texts(std::span<const std::string> texts,
                                  std::size_t max_words = Vocabulary::kDefaultMaxWords);

EncodedEssay encode_text(std::string_view text, const Vocabulary& vocab);
EncodedEssay encode_essay(const EssayRecord& record, const Vocabulary& vocab);
std::vector<std::vector<std::string>> decode_essay(const EncodedEssay& essay, const Vocabulary& vocab);

}  // namespace traitgrade
