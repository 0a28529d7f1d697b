#include "dpost/corpus/dedup.h"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "dpost/corpus/annotations.h"

namespace dpost::corpus {

TokenSet jaccard_tokens(std::string_view text) {
  TokenSet tokens;
  std::istringstream in(strip_annotations(text));
  std::string word;
  while (in >> word) tokens.insert(word);
  return tokens;
}

double jaccard(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  size_t united = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(united);
}

std::vector<size_t> deduplicate_indices(const std::vector<std::string>& texts, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("dedup threshold must be in (0, 1]");
  std::vector<size_t> kept;
  std::vector<TokenSet> kept_sets;
  for (size_t i = 0; i < texts.size(); ++i) {
    TokenSet candidate = jaccard_tokens(texts[i]);
    bool duplicate = std::any_of(kept_sets.begin(), kept_sets.end(),
                                 [&](const TokenSet& k) { return jaccard(candidate, k) >= threshold; });
    if (!duplicate) {
      kept.push_back(i);
      kept_sets.push_back(std::move(candidate));
    }
  }
  return kept;
}

std::vector<Rationale> deduplicate(const std::vector<Rationale>& rationales, double threshold) {
  std::vector<std::string> texts;
  texts.reserve(rationales.size());
  for (const auto& r : rationales) texts.push_back(r.text);
  std::vector<Rationale> out;
  for (size_t i : deduplicate_indices(texts, threshold)) out.push_back(rationales[i]);
  return out;
}

}  // namespace dpost::corpus
