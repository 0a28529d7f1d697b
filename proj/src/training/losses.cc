#include "dpost/training/losses.h"

#include <cmath>
#include <stdexcept>

#include "dpost/common/error.h"
#include "dpost/engine/graph.h"

namespace dpost::training {
namespace {

using engine::ForwardPass;
using engine::TargetWeight;

// The last completion token is only predicted, never read.
Tokens scored_sequence(const Tokens& prompt, const Tokens& completion) {
  return engine::concat(prompt, std::span<const engine::TokenId>(completion).first(completion.size() - 1));
}

double scored_logprob(const ModelCheckpoint& model, const Tokens& prompt, const Tokens& completion, double weight,
                      std::span<double> grad) {
  if (completion.empty()) return 0.0;
  Tokens seq = scored_sequence(prompt, completion);
  ForwardPass pass(model, seq);
  auto targets = engine::completion_targets(prompt, completion, weight);
  double total = 0.0;
  for (const auto& t : targets) total += pass.logprob(t.position, t.token);
  if (!grad.empty() && weight != 0.0) pass.backward(targets, grad);
  return total;
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void check_finite(double loss, const char* what) {
  if (!std::isfinite(loss)) throw NonFiniteLoss(std::string(what) + " loss is not finite");
}

}  // namespace

double sft_loss(const ModelCheckpoint& model, std::span<const SftExample> batch, std::span<double> grad) {
  if (batch.empty()) throw std::invalid_argument("empty SFT batch");
  const double n = static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& ex : batch) total -= scored_logprob(model, ex.prompt, ex.completion, -1.0 / n, grad);
  double loss = total / n;
  check_finite(loss, "SFT");
  return loss;
}

void DpoConfig::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("DPO beta must be positive");
  if (max_steps < 0) throw std::invalid_argument("DPO max_steps must be non-negative");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("DPO learning rate must be non-negative");
}

PairLogprobs pair_logprobs(const ModelCheckpoint& model, const PreferenceExample& pair) {
  return {scored_logprob(model, pair.prompt, pair.chosen, 0.0, {}),
          scored_logprob(model, pair.prompt, pair.rejected, 0.0, {})};
}

double dpo_pair_loss(double beta, const PairLogprobs& policy, const PairLogprobs& reference) {
  double z = beta * ((policy.chosen - reference.chosen) - (policy.rejected - reference.rejected));
  return softplus(-z);
}

double dpo_loss(const ModelCheckpoint& policy, std::span<const PairLogprobs> reference,
                std::span<const PreferenceExample> batch, double beta, std::span<double> grad) {
  if (batch.empty()) throw std::invalid_argument("empty DPO batch");
  if (reference.size() != batch.size()) throw std::invalid_argument("reference log-probs do not match the batch");
  const double n = static_cast<double>(batch.size());
  double total = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    if (ex.chosen.empty() || ex.rejected.empty()) throw std::invalid_argument("empty preference completion");
    Tokens seq_w = scored_sequence(ex.prompt, ex.chosen);
    Tokens seq_l = scored_sequence(ex.prompt, ex.rejected);
    ForwardPass pass_w(policy, seq_w);
    ForwardPass pass_l(policy, seq_l);
    auto targets_w = engine::completion_targets(ex.prompt, ex.chosen, 1.0);
    auto targets_l = engine::completion_targets(ex.prompt, ex.rejected, 1.0);
    PairLogprobs lp;
    for (const auto& t : targets_w) lp.chosen += pass_w.logprob(t.position, t.token);
    for (const auto& t : targets_l) lp.rejected += pass_l.logprob(t.position, t.token);
    double z = beta * ((lp.chosen - reference[i].chosen) - (lp.rejected - reference[i].rejected));
    total += softplus(-z);
    if (!grad.empty()) {
      // d softplus(-z)/dz = -σ(-z)
      double w = -beta * sigmoid(-z) / n;
      for (auto& t : targets_w) t.weight = w;
      for (auto& t : targets_l) t.weight = -w;
      pass_w.backward(targets_w, grad);
      pass_l.backward(targets_l, grad);
    }
  }
  double loss = total / n;
  check_finite(loss, "DPO");
  return loss;
}

double dpo_loss(const ModelCheckpoint& policy, const ModelCheckpoint& reference,
                std::span<const PreferenceExample> batch, const DpoConfig& config, std::span<double> grad) {
  config.validate();
  std::vector<PairLogprobs> ref;
  ref.reserve(batch.size());
  for (const auto& ex : batch) ref.push_back(pair_logprobs(reference, ex));
  return dpo_loss(policy, ref, batch, config.beta, grad);
}

long long token_count(const SftExample& example) {
  return static_cast<long long>(example.prompt.size() + example.completion.size()) - 1;
}

long long token_count(const PreferenceExample& example) {
  return static_cast<long long>(2 * example.prompt.size() + example.chosen.size() + example.rejected.size()) - 2;
}

}  // namespace dpost::training
