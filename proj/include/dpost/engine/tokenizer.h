#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dpost::engine {

using TokenId = int;
using Tokens = std::vector<TokenId>;

// Word-level tokenizer over a closed vocabulary. Words and symbols exist in a
// bare form and a space-prefixed form (" has"), so decoding is plain
// concatenation. Digits are single tokens; `<<`, `>>`, `####` and "\n" are
// atomic.
class Tokenizer {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;

  // Vocabulary with the fixed symbol inventory, the synthetic corpus words and
  // `extra_words`.
  static Tokenizer build(const std::vector<std::string>& extra_words = {});
  // Restores a tokenizer from a saved piece list (index = token id).
  explicit Tokenizer(std::vector<std::string> pieces);

  Tokens encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> tokens) const;
  // Surface text of one token, including any leading space.
  const std::string& piece(TokenId id) const { return pieces_.at(static_cast<size_t>(id)); }
  // Surface text without the leading space.
  std::string_view bare(TokenId id) const;

  size_t size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  // Id of an exact piece, or kUnk.
  TokenId id_of(std::string_view piece) const;

  // [BOS] question "\n"
  Tokens encode_prompt(std::string_view question) const;
  // rationale [EOS]
  Tokens encode_completion(std::string_view rationale) const;

  // Word pieces (letter runs) appearing in `text`.
  static std::vector<std::string> words_in(std::string_view text);

 private:
  Tokenizer() = default;
  void add(std::string piece);

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace dpost::engine
