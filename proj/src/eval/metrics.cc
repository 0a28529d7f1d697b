#include "dpost/eval/metrics.h"

#include <stdexcept>

#include "dpost/common/rng.h"
#include "dpost/corpus/answer.h"
#include "dpost/eval/ledger.h"

namespace dpost::eval {
namespace {

std::vector<engine::GenerationRequest> prompts_for(const engine::ModelCheckpoint& model,
                                                   const corpus::Dataset& set, int samples, uint64_t tag_value,
                                                   bool keyed) {
  std::vector<engine::GenerationRequest> reqs;
  reqs.reserve(set.size() * static_cast<size_t>(samples));
  for (size_t i = 0; i < set.size(); ++i) {
    engine::Tokens prompt = model.tokenizer().encode_prompt(set.items[i].question);
    for (int s = 0; s < samples; ++s) {
      uint64_t stream = keyed ? stream_id({tag_value, i, static_cast<uint64_t>(s)}) : 0;
      reqs.push_back({prompt, stream});
    }
  }
  return reqs;
}

engine::SamplingConfig sampling(const EvalOptions& o, double temperature, uint64_t seed) {
  engine::SamplingConfig c;
  c.temperature = temperature;
  c.max_new_tokens = o.max_new_tokens;
  c.seed = seed;
  c.calculator_enabled = o.calculator_enabled;
  return c;
}

}  // namespace

bool is_correct(const corpus::Rationale& rationale, double gold) {
  return rationale.answer.has_value() && corpus::numeric_equal(*rationale.answer, gold);
}

AccuracyReport evaluate_greedy(const engine::ModelCheckpoint& model, const corpus::Dataset& testset,
                               const EvalOptions& options, ComputeLedger* ledger) {
  AccuracyReport report;
  if (testset.empty()) return report;
  auto reqs = prompts_for(model, testset, 1, 0, false);
  engine::DecodeStats stats;
  calc::GenerateOptions go;
  go.max_batch = options.max_batch;
  auto out = calc::generate_rationales(model, reqs, sampling(options, 0.0, 0), go, &stats);
  if (ledger) ledger->add_inference("eval", stats.processed_tokens);
  size_t hits = 0;
  for (size_t i = 0; i < out.size(); ++i) {
    bool ok = is_correct(out[i].rationale, testset.items[i].gold_answer);
    hits += ok;
    report.correct.push_back(ok);
    report.transcripts.push_back(std::move(out[i].text));
  }
  report.rate = static_cast<double>(hits) / static_cast<double>(testset.size());
  return report;
}

double accuracy(const engine::ModelCheckpoint& model, const corpus::Dataset& testset, bool calculator_enabled,
                ComputeLedger* ledger) {
  EvalOptions o;
  o.calculator_enabled = calculator_enabled;
  return evaluate_greedy(model, testset, o, ledger).rate;
}

double pass_rate(const std::vector<std::vector<bool>>& sample_correct, int k) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (sample_correct.empty()) return 0.0;
  size_t hits = 0;
  for (const auto& samples : sample_correct) {
    size_t limit = std::min(samples.size(), static_cast<size_t>(k));
    for (size_t j = 0; j < limit; ++j) {
      if (samples[j]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(sample_correct.size());
}

PassAtKReport pass_at_k(const engine::ModelCheckpoint& model, const corpus::Dataset& testset, int k,
                        double temperature, uint64_t seed, const EvalOptions& options, ComputeLedger* ledger) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  PassAtKReport report;
  report.k = k;
  report.temperature = temperature;
  if (testset.empty()) return report;
  auto reqs = prompts_for(model, testset, k, tag(StreamTag::kPassAtK), true);
  engine::DecodeStats stats;
  calc::GenerateOptions go;
  go.max_batch = options.max_batch;
  auto out = calc::generate_rationales(model, reqs, sampling(options, temperature, seed), go, &stats);
  if (ledger) ledger->add_inference("pass_at_k", stats.processed_tokens);

  std::vector<std::vector<bool>> flags(testset.size());
  for (size_t i = 0; i < testset.size(); ++i) {
    int n = 0;
    for (int s = 0; s < k; ++s) {
      bool ok = is_correct(out[i * static_cast<size_t>(k) + static_cast<size_t>(s)].rationale,
                           testset.items[i].gold_answer);
      flags[i].push_back(ok);
      n += ok;
    }
    report.correct.push_back(n);
    report.hits.push_back(n > 0);
  }
  for (int j = 1; j <= k; ++j) report.rates_by_k.push_back(pass_rate(flags, j));
  report.rate = report.rates_by_k.back();
  return report;
}

}  // namespace dpost::eval
