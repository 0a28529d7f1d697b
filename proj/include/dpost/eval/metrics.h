#pragma once

#include <cstdint>
#include <vector>

#include "dpost/calc/generate.h"
#include "dpost/corpus/problem.h"
#include "dpost/engine/model.h"

namespace dpost::eval {

class ComputeLedger;

struct EvalOptions {
  bool calculator_enabled = true;
  int max_new_tokens = 300;
  int max_batch = 32;
};

struct AccuracyReport {
  double rate = 0.0;
  std::vector<bool> correct;
  std::vector<std::string> transcripts;
};

// Greedy-decodes every question and scores the extracted answer against the
// gold answer. Problems without a parseable answer count as wrong.
AccuracyReport evaluate_greedy(const engine::ModelCheckpoint& model, const corpus::Dataset& testset,
                               const EvalOptions& options = {}, ComputeLedger* ledger = nullptr);

double accuracy(const engine::ModelCheckpoint& model, const corpus::Dataset& testset, bool calculator_enabled,
                ComputeLedger* ledger = nullptr);

// True when the rationale's final answer numeric-equals `gold`.
bool is_correct(const corpus::Rationale& rationale, double gold);

struct PassAtKReport {
  int k = 1;
  double temperature = 0.0;
  std::vector<bool> hits;     // per problem
  std::vector<int> correct;   // correct samples per problem
  double rate = 0.0;

  // Pass@j for j <= k over the first j samples of each problem.
  std::vector<double> rates_by_k;
};

// Draws k samples per problem, each from its own stream keyed by
// (seed, problem index, sample index), so the first j samples are the same for
// every k >= j. A problem is a hit when any sample is correct.
PassAtKReport pass_at_k(const engine::ModelCheckpoint& model, const corpus::Dataset& testset, int k,
                        double temperature, uint64_t seed, const EvalOptions& options = {},
                        ComputeLedger* ledger = nullptr);

// Pass@K from per-problem correctness of nested samples: hit iff any of the
// first k is correct.
double pass_rate(const std::vector<std::vector<bool>>& sample_correct, int k);

}  // namespace dpost::eval
