#include "dpost/engine/tokenizer.h"

#include <algorithm>
#include <cctype>
#include <set>

#include "dpost/corpus/synthetic.h"

namespace dpost::engine {
namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Length of the piece starting at text[pos]; pos < text.size().
size_t piece_length(std::string_view text, size_t pos) {
  std::string_view rest = text.substr(pos);
  if (rest.starts_with("####")) return 4;
  if (rest.starts_with("<<") || rest.starts_with(">>")) return 2;
  if (is_alpha(rest[0])) {
    size_t n = 1;
    while (n < rest.size() && is_alpha(rest[n])) ++n;
    return n;
  }
  return 1;
}

constexpr std::string_view kSymbols = "0123456789+-*/()=.,?!:;'$%<>#&\"";

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> pieces) {
  for (auto& p : pieces) add(std::move(p));
}

void Tokenizer::add(std::string piece) {
  if (index_.contains(piece)) return;
  index_.emplace(piece, static_cast<TokenId>(pieces_.size()));
  pieces_.push_back(std::move(piece));
}

Tokenizer Tokenizer::build(const std::vector<std::string>& extra_words) {
  Tokenizer t;
  t.add("<pad>");
  t.add("<bos>");
  t.add("<eos>");
  t.add("<unk>");
  t.add("\n");
  t.add(" ");
  for (std::string_view multi : {"<<", ">>", "####"}) {
    t.add(std::string(multi));
    t.add(" " + std::string(multi));
  }
  for (char c : kSymbols) {
    t.add(std::string(1, c));
    t.add(" " + std::string(1, c));
  }
  std::set<std::string> words;
  for (auto& w : corpus::synthetic_vocabulary()) words.insert(w);
  for (const auto& w : extra_words) {
    if (!w.empty() && std::all_of(w.begin(), w.end(), is_alpha)) words.insert(w);
  }
  for (const auto& w : words) {
    t.add(w);
    t.add(" " + w);
  }
  return t;
}

TokenId Tokenizer::id_of(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  return it == index_.end() ? kUnk : it->second;
}

std::string_view Tokenizer::bare(TokenId id) const {
  std::string_view p = piece(id);
  if (p.size() > 1 && p.front() == ' ') p.remove_prefix(1);
  return p;
}

Tokens Tokenizer::encode(std::string_view text) const {
  Tokens out;
  size_t pos = 0;
  while (pos < text.size()) {
    bool spaced = false;
    if (text[pos] == ' ' && pos + 1 < text.size() && text[pos + 1] != ' ' && text[pos + 1] != '\n') {
      spaced = true;
      ++pos;
    } else if (text[pos] == ' ') {
      out.push_back(id_of(" "));
      ++pos;
      continue;
    }
    size_t len = piece_length(text, pos);
    std::string_view piece = text.substr(pos, len);
    pos += len;
    if (spaced) {
      TokenId id = id_of(" " + std::string(piece));
      if (id != kUnk) {
        out.push_back(id);
        continue;
      }
      out.push_back(id_of(" "));
    }
    out.push_back(id_of(piece));
  }
  return out;
}

std::string Tokenizer::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t == kBos || t == kEos || t == kPad) continue;
    out += piece(t);
  }
  return out;
}

Tokens Tokenizer::encode_prompt(std::string_view question) const {
  Tokens out{kBos};
  Tokens body = encode(std::string(question) + "\n");
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Tokens Tokenizer::encode_completion(std::string_view rationale) const {
  Tokens out = encode(rationale);
  out.push_back(kEos);
  return out;
}

std::vector<std::string> Tokenizer::words_in(std::string_view text) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos < text.size()) {
    if (is_alpha(text[pos])) {
      size_t len = piece_length(text, pos);
      out.emplace_back(text.substr(pos, len));
      pos += len;
    } else {
      ++pos;
    }
  }
  return out;
}

}  // namespace dpost::engine
