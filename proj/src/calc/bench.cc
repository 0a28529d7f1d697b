#include "dpost/calc/bench.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <stdexcept>

#include "dpost/calc/generate.h"

namespace dpost::calc {

void BenchConfig::validate() const {
  if (batch_sizes.empty()) throw std::invalid_argument("no batch sizes to benchmark");
  for (int b : batch_sizes) {
    if (b < 1) throw std::invalid_argument("batch sizes must be positive");
  }
  if (calculator_settings.empty()) throw std::invalid_argument("no calculator settings to benchmark");
  if (runs < 1) throw std::invalid_argument("runs must be positive");
  sampling.validate();
}

std::vector<BenchRow> throughput_bench(const engine::ModelCheckpoint& model,
                                       std::span<const engine::GenerationRequest> prompts, const BenchConfig& config) {
  config.validate();
  if (prompts.size() < kMinBenchPrompts) {
    throw std::invalid_argument("throughput bench needs at least " + std::to_string(kMinBenchPrompts) + " prompts");
  }
  std::vector<BenchRow> rows;
  for (bool calc : config.calculator_settings) {
    engine::SamplingConfig sampling = config.sampling;
    sampling.calculator_enabled = calc;
    for (int batch : config.batch_sizes) {
      GenerateOptions options;
      options.max_batch = batch;
      size_t warm = std::min(prompts.size(), static_cast<size_t>(std::max(config.warmup_prompts, batch)));
      generate_rationales(model, prompts.first(warm), sampling, options);

      BenchRow row;
      row.batch_size = batch;
      row.calculator = calc;
      for (int r = 0; r < config.runs; ++r) {
        engine::DecodeStats stats;
        auto t0 = std::chrono::steady_clock::now();
        generate_rationales(model, prompts, sampling, options, &stats);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.tokens = stats.generated_tokens;
        row.runs.push_back(static_cast<double>(stats.generated_tokens) / secs);
      }
      std::vector<double> sorted = row.runs;
      std::sort(sorted.begin(), sorted.end());
      size_t n = sorted.size();
      row.tokens_per_sec = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_bench_csv(const std::filesystem::path& path, std::span<const BenchRow> rows,
                     const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
  out << "batch_size,calculator,tokens_per_sec\n";
  out.precision(10);
  for (const auto& r : rows) out << r.batch_size << "," << (r.calculator ? "on" : "off") << "," << r.tokens_per_sec << "\n";
}

}  // namespace dpost::calc
