#pragma once

#include <span>
#include <string>
#include <vector>

#include "dpost/calc/interceptor.h"
#include "dpost/corpus/problem.h"
#include "dpost/engine/decoder.h"

namespace dpost::calc {

struct DecodedRationale {
  std::string text;
  corpus::Rationale rationale;
  engine::Tokens tokens;
  bool stopped_at_eos = false;
  int steps = 0;
  std::vector<CalcEvent> events;  // empty when the calculator is off

  size_t malformed_count() const;
};

struct GenerateOptions {
  int max_batch = 32;
  bool echo_result = true;
};

// Batched decode of every request. With config.calculator_enabled each lane
// runs through its own calculator; otherwise this is a plain decode.
std::vector<DecodedRationale> generate_rationales(const engine::ModelCheckpoint& model,
                                                  std::span<const engine::GenerationRequest> requests,
                                                  const engine::SamplingConfig& config,
                                                  const GenerateOptions& options = {},
                                                  engine::DecodeStats* stats = nullptr);

// Single prompt.
DecodedRationale generate(const engine::ModelCheckpoint& model, const std::string& question,
                          const engine::SamplingConfig& config, uint64_t stream = 0,
                          const GenerateOptions& options = {});

}  // namespace dpost::calc
