#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dpost/corpus/problem.h"

namespace dpost::corpus {

using TokenSet = std::set<std::string>;

// Whitespace tokens of the rationale after strip_annotations.
TokenSet jaccard_tokens(std::string_view rationale_text);

// |a ∩ b| / |a ∪ b|, and 1.0 when both are empty.
double jaccard(const TokenSet& a, const TokenSet& b);

// Greedy first-wins scan: an item is kept iff its similarity to every item
// kept so far is below `threshold`. Order is preserved.
std::vector<Rationale> deduplicate(const std::vector<Rationale>& rationales, double threshold);

// Index form of deduplicate over raw texts; returns kept indices in order.
std::vector<size_t> deduplicate_indices(const std::vector<std::string>& texts, double threshold);

}  // namespace dpost::corpus
