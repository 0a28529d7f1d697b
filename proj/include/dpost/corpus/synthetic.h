#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpost/corpus/problem.h"

namespace dpost::corpus {

struct StepRange {
  int min = 1;
  int max = 3;
};

// Templated two-entity word problems. Every arithmetic step is one
// `a op b=<<a op b=r>>r` annotation over integers, with exact division only,
// and the rationale ends in `#### answer`. Deterministic in `seed`; question
// texts are unique within one call. `id_prefix` names the problems
// "<prefix><index>".
Dataset generate_synthetic(uint64_t seed, int count, StepRange steps, const std::string& id_prefix = "syn-");

// Every surface word the generator can emit, for vocabulary construction.
std::vector<std::string> synthetic_vocabulary();

// Empty when the problem satisfies the corpus invariants: non-empty question,
// well-formed consistent annotations in order, and an extracted answer equal
// to the gold answer.
std::vector<std::string> validate_problem(const Problem& problem);

}  // namespace dpost::corpus
