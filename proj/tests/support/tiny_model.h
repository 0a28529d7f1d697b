#pragma once

#include "dpost/corpus/synthetic.h"
#include "dpost/engine/model.h"
#include "dpost/training/losses.h"
#include "dpost/training/optimizer.h"

namespace dpost::testing {

inline std::vector<training::SftExample> sft_examples(const engine::Tokenizer& tok, const corpus::Dataset& data) {
  std::vector<training::SftExample> out;
  for (const auto& p : data.items) {
    out.push_back({tok.encode_prompt(p.question), tok.encode_completion(p.gold_rationale->text)});
  }
  return out;
}

inline engine::ModelCheckpoint tiny_base(uint64_t seed) {
  engine::ModelConfig c;
  c.d_model = 32;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 64;
  c.context = 128;
  return engine::ModelCheckpoint::initialize(c, engine::Tokenizer::build(), seed);
}

inline engine::ModelCheckpoint fit(const engine::ModelCheckpoint& base, const corpus::Dataset& data, int epochs,
                                   double learning_rate, int batch_size, uint64_t seed) {
  auto examples = sft_examples(base.tokenizer(), data);
  training::TrainProfile profile = training::toy_sft_profile();
  profile.epochs = epochs;
  profile.learning_rate = learning_rate;
  profile.batch_size = batch_size;
  auto loss = [&](const engine::ModelCheckpoint& m, std::span<const size_t> idx, std::span<double> grad) {
    std::vector<training::SftExample> batch;
    long long tokens = 0;
    for (size_t i : idx) {
      batch.push_back(examples[i]);
      tokens += training::token_count(examples[i]);
    }
    return training::BatchResult{training::sft_loss(m, batch, grad), tokens};
  };
  return training::optimize(base, examples.size(), loss, profile, seed).checkpoint;
}

// A small model fitted to synthetic rationales until it writes annotations of
// its own.
inline engine::ModelCheckpoint annotating_model(uint64_t seed = 3) {
  return fit(tiny_base(seed), corpus::generate_synthetic(seed, 96, {1, 1}), 15, 1e-2, 32, seed);
}

}  // namespace dpost::testing
