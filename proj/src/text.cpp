#include "ssg/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

namespace ssg {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

constexpr std::array<std::string_view, 5> kAbbreviations{"mr", "mrs", "dr", "ms", "st"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > 0 && is_alpha(text[begin - 1])) --begin;
  if (begin == dot) return false;
  std::string word(text.substr(begin, dot - begin));
  std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

std::string join_tokens(std::span<const Token> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> sentence_split(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminal(text[i])) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && is_terminal(text[end])) ++end;
    std::size_t next = end;
    while (next < text.size() && is_space(text[next])) ++next;
    const bool at_end = next == text.size();
    const bool boundary = at_end || (next > end && is_upper(text[next]));
    const bool abbreviation = end == i + 1 && text[i] == '.' && is_abbreviation(text, i);
    if (boundary && !abbreviation) {
      auto sentence = trim(text.substr(start, end - start));
      if (!sentence.empty()) out.emplace_back(sentence);
      start = next;
    }
    i = end;
  }
  if (start < text.size()) {
    auto tail = trim(text.substr(start));
    if (!tail.empty()) out.emplace_back(tail);
  }
  return out;
}

NGramCounts ngrams(std::span<const Token> tokens, std::size_t n) {
  if (n == 0) throw std::invalid_argument("ngrams: n must be at least 1");
  NGramCounts counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[NGram(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::size_t ngram_total(const NGramCounts& counts) {
  std::size_t total = 0;
  for (const auto& [g, c] : counts) total += c;
  return total;
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() {
  for (const char* s : {"<pad>", "<bos>", "<eos>", "<unk>"}) append(s);
}

void Vocab::append(const std::string& token) {
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

Vocab Vocab::build(std::span<const Tokens> corpus, std::size_t min_count) {
  if (min_count == 0) throw std::invalid_argument("build_vocab: min_count must be at least 1");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& seq : corpus)
    for (const auto& tok : seq) ++freq[tok];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, c] : freq) {
    if (c >= min_count) kept.emplace_back(tok, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (const auto& [tok, c] : kept) {
    if (!v.contains(tok)) v.append(tok);
  }
  return v;
}

Vocab Vocab::from_lines(std::span<const std::string> lines) {
  Vocab v;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || v.contains(lines[i])) {
      throw std::runtime_error(fmt::format("vocabulary line {}: empty or duplicate token '{}'", i + 1, lines[i]));
    }
    v.append(lines[i]);
  }
  return v;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open vocabulary file {}", path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return from_lines(lines);
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write vocabulary file {}", path));
  for (std::size_t i = kNumSpecial; i < id_to_token_.size(); ++i) out << id_to_token_[i] << '\n';
}

int Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw std::out_of_range(fmt::format("token id {} outside vocabulary of {}", id, id_to_token_.size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view token) const { return token_to_id_.count(std::string(token)) > 0; }

TokenIds Vocab::encode(std::span<const Token> tokens) const {
  TokenIds ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Tokens Vocab::decode(std::span<const int> ids) const {
  Tokens out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    out.push_back(token(id));
  }
  return out;
}

}  // namespace ssg
