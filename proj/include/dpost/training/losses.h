#pragma once

#include <span>
#include <vector>

#include "dpost/engine/model.h"

namespace dpost::training {

using engine::ModelCheckpoint;
using engine::Tokens;

struct SftExample {
  Tokens prompt;      // [BOS] question "\n"
  Tokens completion;  // rationale tokens followed by EOS
};

// Mean over the batch of -Σ log p(completion | prompt); prompt tokens carry no
// loss. When `grad` is non-empty the loss gradient is added into it.
double sft_loss(const ModelCheckpoint& model, std::span<const SftExample> batch, std::span<double> grad = {});

struct DpoConfig {
  double beta = 0.1;
  int max_steps = 100;
  double learning_rate = 1e-5;

  void validate() const;
};

struct PreferenceExample {
  Tokens prompt;
  Tokens chosen;    // winning completion, EOS-terminated
  Tokens rejected;  // losing completion, EOS-terminated
};

// Sequence log-probabilities of both completions under a model.
struct PairLogprobs {
  double chosen = 0.0;
  double rejected = 0.0;
};

PairLogprobs pair_logprobs(const ModelCheckpoint& model, const PreferenceExample& pair);

// -log σ(β[(lw - ref_w) - (ll - ref_l)]) for one pair, evaluated stably.
double dpo_pair_loss(double beta, const PairLogprobs& policy, const PairLogprobs& reference);

// Mean pair loss with reference log-probabilities given. The reference enters
// only as constants, so `grad` (policy parameters) is the only gradient.
double dpo_loss(const ModelCheckpoint& policy, std::span<const PairLogprobs> reference,
                std::span<const PreferenceExample> batch, double beta, std::span<double> grad = {});

// Same, scoring the reference model first. The reference is read, never
// differentiated.
double dpo_loss(const ModelCheckpoint& policy, const ModelCheckpoint& reference,
                std::span<const PreferenceExample> batch, const DpoConfig& config, std::span<double> grad = {});

// Tokens fed through the model by one forward over each example (the final
// completion token is only a target).
long long token_count(const SftExample& example);
long long token_count(const PreferenceExample& example);

}  // namespace dpost::training
