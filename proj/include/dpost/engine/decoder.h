#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dpost/engine/model.h"

namespace dpost::engine {

struct SamplingConfig {
  // 0 means greedy (argmax, ties to the lowest token id).
  double temperature = 0.7;
  int max_new_tokens = 300;
  uint64_t seed = 0;
  bool calculator_enabled = true;

  void validate() const;
};

// Per-lane hook that sees every proposed token and returns the token that is
// actually emitted (and fed back into the model).
class LaneFilter {
 public:
  virtual ~LaneFilter() = default;
  virtual TokenId filter(TokenId proposed) = 0;
  // Called once when the lane stops, whether by EOS, token budget or context.
  virtual void finish() {}
};

using LaneFilterFactory = std::function<std::unique_ptr<LaneFilter>()>;

struct GenerationRequest {
  Tokens prompt;
  // Sampling stream for this sequence; see stream_id().
  uint64_t stream = 0;
};

struct Generation {
  Tokens tokens;           // emitted tokens, excluding the final EOS
  bool stopped_at_eos = false;
  int steps = 0;           // decoding steps taken (tokens sampled, EOS included)
  std::unique_ptr<LaneFilter> filter;  // the lane's filter, for inspecting its record
};

struct DecodeStats {
  long long generated_tokens = 0;
  long long processed_tokens = 0;  // every token fed through the model
};

// Batched incremental decoder with per-lane KV caches.
//
// Activations for a step are stored lane-contiguous ([feature][lane]) and every
// per-lane value is an fma chain in a fixed order that does not depend on how
// many lanes share the step, so a lane's output is bit-identical for any batch
// composition. Batching pays off because each weight is loaded once per step
// and applied to all lanes with vector instructions.
class Decoder {
 public:
  explicit Decoder(const ModelCheckpoint& model);

  // Decodes every request with up to `max_batch` lanes in flight; a finished
  // lane's slot is refilled from the queue. Results are in request order.
  std::vector<Generation> generate(std::span<const GenerationRequest> requests, const SamplingConfig& config,
                                   int max_batch, const LaneFilterFactory* filter_factory = nullptr,
                                   DecodeStats* stats = nullptr) const;

  const ModelCheckpoint& model() const { return model_; }

 private:
  struct Lane;
  struct Layer {
    std::vector<double> norm1, wq, wk, wv, wo, norm2, w1, b1, w2, b2;  // weights row-major [out][in]
  };

  void step(std::vector<Lane*>& lanes, std::vector<double>& logits) const;

  const ModelCheckpoint& model_;
  ModelConfig config_;
  std::vector<Layer> layers_;
  std::vector<double> norm_f_, head_, head_b_;
};

// Single-prompt generation returning the decoded text.
std::string generate_text(const ModelCheckpoint& model, const std::string& question, const SamplingConfig& config,
                          uint64_t stream, const LaneFilterFactory* filter_factory = nullptr);

}  // namespace dpost::engine
