#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpost/engine/model.h"

namespace dpost::training {

using engine::ModelCheckpoint;

// AdamW with decoupled weight decay, global-norm clipping and a linear
// warm-up followed by cosine decay to zero.
struct TrainProfile {
  int batch_size = 32;
  std::optional<int> epochs;
  std::optional<int> max_steps;
  double learning_rate = 3e-3;
  double warmup_ratio = 0.1;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  std::string schedule = "cosine-with-warmup";
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  // Optimizer steps needed to train on `examples` items.
  int total_steps(size_t examples) const;
};

// Learning rate for 0-based `step` out of `total` steps.
double learning_rate_at(const TrainProfile& profile, int step, int total);

// Table 5 of the source paper (Flan-T5-Large rows), kept for reference.
TrainProfile paper_sft_profile();
TrainProfile paper_dpo_profile();
// Llama-3 rows of the same table.
TrainProfile paper_llama_sft_profile();
TrainProfile paper_llama_dpo_profile();
// Scaled-down defaults for the toy model.
TrainProfile toy_sft_profile();
TrainProfile toy_dpo_profile();

struct LossPoint {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct BatchResult {
  double loss = 0.0;
  long long tokens = 0;
};

// Evaluates the loss on the examples at `indices` and adds its gradient into
// `grad` (which arrives zeroed).
using BatchLossFn =
    std::function<BatchResult(const ModelCheckpoint& model, std::span<const size_t> indices, std::span<double> grad)>;

struct TrainResult {
  ModelCheckpoint checkpoint;
  std::vector<LossPoint> curve;
  long long tokens_processed = 0;
  int steps = 0;
  std::string initial_hash;  // parameters training started from
};

// Trains a copy of `initial`. Each epoch visits the data in an order shuffled
// from (seed, epoch); a max_steps profile keeps cycling epochs until done.
// Throws DivergenceDetected if a batch loss is not finite.
TrainResult optimize(const ModelCheckpoint& initial, size_t data_size, const BatchLossFn& loss_fn,
                     const TrainProfile& profile, uint64_t seed);

// step,loss,lr with an optional leading "# config_hash=..." line.
void write_loss_curve(const std::filesystem::path& path, std::span<const LossPoint> curve,
                      const std::string& config_hash = "");

}  // namespace dpost::training
