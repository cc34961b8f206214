#include "traitgrade/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <unordered_set>

#include "traitgrade/errors.hpp"

namespace traitgrade {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_word_byte(char c) { return is_alnum(c) || static_cast<unsigned char>(c) >= 0x80; }
char to_lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

// Folds common typographic punctuation onto ASCII.
std::string normalize_punctuation(std::string_view s) {
  static const std::array<std::pair<std::string_view, std::string_view>, 8> table{{
      {"\xE2\x80\x98", "'"},
      {"\xE2\x80\x99", "'"},
      {"\xE2\x80\x9C", "\""},
      {"\xE2\x80\x9D", "\""},
      {"\xE2\x80\x93", "-"},
      {"\xE2\x80\x94", "--"},
      {"\xE2\x80\xA6", "..."},
      {"\xC2\xA0", " "},
  }};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    bool replaced = false;
    if (static_cast<unsigned char>(s[i]) >= 0x80) {
      for (const auto& [from, to] : table) {
        if (s.substr(i, from.size()) == from) {
          out += to;
          i += from.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += s[i++];
  }
  return out;
}

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> set = {
      "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "e.g", "i.e", "u.s", "a.m", "p.m",
  };
  return set;
}

bool is_closing(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

// True when the '.' at `dot` ends an abbreviation or an initial rather than a sentence.
bool is_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && !is_space(text[start - 1])) --start;
  std::string word(text.substr(start, dot - start));
  while (!word.empty() && !is_alnum(word.front())) word.erase(word.begin());
  if (word.empty()) return false;
  if (word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0])) && word[0] != 'I' && word[0] != 'A')
    return true;
  std::string key;
  for (char c : word) key += to_lower(c);
  return abbreviations().count(key) > 0;
}

std::string trim_copy(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(a, b - a + 1));
}

void push_word(std::vector<std::string>& out, std::string word) {
  static const std::array<std::string_view, 6> clitics{"'s", "'re", "'ve", "'ll", "'d", "'m"};
  if (word.size() > 3 && word.compare(word.size() - 3, 3, "n't") == 0) {
    out.push_back(word.substr(0, word.size() - 3));
    out.emplace_back("n't");
    return;
  }
  if (const auto pos = word.rfind('\''); pos != std::string::npos && pos > 0) {
    const std::string_view suffix = std::string_view(word).substr(pos);
    if (std::find(clitics.begin(), clitics.end(), suffix) != clitics.end()) {
      out.push_back(word.substr(0, pos));
      out.emplace_back(suffix);
      return;
    }
  }
  out.push_back(std::move(word));
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view raw) {
  const std::string text = normalize_punctuation(raw);
  if (trim_copy(text).empty()) throw EmptyEssayError("essay text is empty");

  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    const std::size_t run_start = i;
    while (i < text.size() && (text[i] == '.' || text[i] == '!' || text[i] == '?')) ++i;
    const bool single_dot = i - run_start == 1 && text[run_start] == '.';
    while (i < text.size() && is_closing(text[i])) ++i;
    const bool at_boundary = i == text.size() || is_space(text[i]);
    if (!at_boundary) continue;
    if (single_dot && is_abbreviation(text, run_start)) continue;
    auto sentence = trim_copy(std::string_view(text).substr(start, i - start));
    if (!sentence.empty()) out.push_back(std::move(sentence));
    start = i;
  }
  auto tail = trim_copy(std::string_view(text).substr(start));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

std::vector<std::string> tokenize(std::string_view raw) {
  const std::string s = normalize_punctuation(raw);
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    const char c = s[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (c == '@' && i + 1 < n && is_alnum(s[i + 1])) {
      std::string token = "@";
      ++i;
      while (i < n && is_alnum(s[i])) token += to_lower(s[i++]);
      out.push_back(std::move(token));
      continue;
    }
    if (is_word_byte(c)) {
      std::string word;
      while (i < n) {
        const char d = s[i];
        if (is_word_byte(d)) {
          word += to_lower(d);
          ++i;
        } else if ((d == '\'' || d == '-') && i + 1 < n && is_word_byte(s[i + 1]) && !word.empty()) {
          word += d;
          ++i;
        } else if ((d == '.' || d == ',') && i + 1 < n && is_digit(s[i + 1]) && !word.empty() &&
                   is_digit(word.back())) {
          word += d;
          ++i;
        } else {
          break;
        }
      }
      push_word(out, std::move(word));
      continue;
    }
    if (c == '.' || c == '-') {
      std::size_t j = i;
      while (j < n && s[j] == c) ++j;
      out.emplace_back(s.substr(i, j - i));
      i = j;
      continue;
    }
    out.emplace_back(1, c);
    ++i;
  }
  return out;
}

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"} {
  ids_.emplace(tokens_[0], kPad);
  ids_.emplace(tokens_[1], kUnk);
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> content) {
  Vocabulary v;
  for (const auto& t : content) {
    if (!v.ids_.emplace(t, static_cast<int>(v.tokens_.size())).second)
      throw ArgumentError("duplicate vocabulary token '" + t + "'");
    v.tokens_.push_back(t);
  }
  return v;
}

int Vocabulary::lookup(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end() || it->second < 2) return kUnk;
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary build_vocab_from_texts(std::span<const std::string> texts, std::size_t max_words) {
  if (texts.empty()) throw ArgumentError("cannot build a vocabulary from an empty training set");
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    if (trim_copy(text).empty()) continue;
    for (const auto& sentence : split_sentences(text))
      for (auto& tok : tokenize(sentence)) ++counts[std::move(tok)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // `counts` is already in lexicographic order, so a stable sort by count keeps ties ordered.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_words) ranked.resize(max_words);
  std::vector<std::string> content;
  content.reserve(ranked.size());
  for (auto& [tok, _] : ranked) content.push_back(std::move(tok));
  return Vocabulary::from_tokens(content);
}

Vocabulary build_vocab(std::span<const EssayRecord> train_essays, std::size_t max_words) {
  std::vector<std::string> texts;
  texts.reserve(train_essays.size());
  for (const auto& r : train_essays) texts.push_back(r.text);
  return build_vocab_from_texts(texts, max_words);
}

EncodedEssay encode_text(std::string_view text, const Vocabulary& vocab) {
  EncodedEssay out;
  for (const auto& sentence : split_sentences(text)) {
    std::vector<int> ids;
    for (const auto& tok : tokenize(sentence)) ids.push_back(vocab.lookup(tok));
    if (!ids.empty()) out.push_back(std::move(ids));
  }
  if (out.empty()) throw EmptyEssayError("essay has no tokens");
  return out;
}

EncodedEssay encode_essay(const EssayRecord& record, const Vocabulary& vocab) {
  try {
    return encode_text(record.text, vocab);
  } catch (const EmptyEssayError&) {
    throw EmptyEssayError("essay " + std::to_string(record.essay_id) + " has no tokens");
  }
}

std::vector<std::vector<std::string>> decode_essay(const EncodedEssay& essay, const Vocabulary& vocab) {
  std::vector<std::vector<std::string>> out;
  for (const auto& sentence : essay) {
    auto& row = out.emplace_back();
    for (int id : sentence) row.push_back(vocab.token(id));
  }
  return out;
}

}  // namespace traitgrade
