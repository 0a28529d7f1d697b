#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dpost/engine/decoder.h"

namespace dpost::calc {

struct BenchRow {
  int batch_size = 1;
  bool calculator = false;
  double tokens_per_sec = 0.0;  // median over runs
  std::vector<double> runs;     // every timed run
  long long tokens = 0;         // tokens decoded per run
};

struct BenchConfig {
  std::vector<int> batch_sizes = {1, 2, 4, 8, 16, 32};
  std::vector<bool> calculator_settings = {false, true};
  int runs = 3;
  int warmup_prompts = 8;
  engine::SamplingConfig sampling;

  void validate() const;
};

inline constexpr size_t kMinBenchPrompts = 100;

// Wall-clock decoded tokens per second for every (batch size, calculator)
// combination. Each setting gets an untimed warm-up decode first; the
// reported figure is the median of `runs` timed decodes of all prompts.
std::vector<BenchRow> throughput_bench(const engine::ModelCheckpoint& model,
                                       std::span<const engine::GenerationRequest> prompts, const BenchConfig& config);

// batch_size,calculator,tokens_per_sec with an optional "# config_hash=" line.
void write_bench_csv(const std::filesystem::path& path, std::span<const BenchRow> rows,
                     const std::string& config_hash = "");

}  // namespace dpost::calc
