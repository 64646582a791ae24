#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ssg {

using Token = std::string;
using Tokens = std::vector<Token>;
using TokenIds = std::vector<int>;
using NGram = std::vector<std::string>;
using NGramCounts = std::map<NGram, std::size_t>;

/// Lowercases, splits on whitespace, and emits every ASCII punctuation
/// character as its own token.
Tokens tokenize(std::string_view text);

/// Joins tokens with single spaces.
std::string join_tokens(std::span<const Token> tokens);

/// Splits after '.', '!' or '?' when followed by whitespace and an uppercase
/// letter, or by end of text. A '.' ending one of {mr, mrs, dr, ms, st}
/// never ends a sentence. Returned sentences are trimmed.
std::vector<std::string> sentence_split(std::string_view text);

/// All contiguous windows of length n, with multiplicity.
NGramCounts ngrams(std::span<const Token> tokens, std::size_t n);
/// Number of windows, max(0, len - n + 1).
std::size_t ngram_total(const NGramCounts& counts);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecial = 4;

  Vocab();

  /// Tokens with frequency >= min_count, by descending frequency then
  /// lexicographically, after the four specials.
  static Vocab build(std::span<const Tokens> corpus, std::size_t min_count);

  /// One token per line; line i holds id i + 4.
  static Vocab load(const std::string& path);
  void save(const std::string& path) const;
  static Vocab from_lines(std::span<const std::string> lines);

  std::size_t size() const { return id_to_token_.size(); }
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;

  TokenIds encode(std::span<const Token> tokens) const;
  /// Drops PAD/BOS and stops at EOS.
  Tokens decode(std::span<const int> ids) const;

  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  void append(const std::string& token);

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

}  // namespace ssg
