#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "dpost/engine/model.h"

namespace dpost::engine {

// d(loss)/d(log p[position][token]) for one realised token.
struct TargetWeight {
  int position = 0;
  TokenId token = 0;
  double weight = 0.0;
};

// Full-sequence forward pass with every activation retained for backward.
// Column t of logprobs() is the next-token log-distribution after reading
// tokens[0..t]. Throws ContextOverflow when the sequence exceeds the context.
class ForwardPass {
 public:
  ForwardPass(const ModelCheckpoint& model, std::span<const TokenId> tokens);

  int length() const { return static_cast<int>(tokens_.size()); }
  const Eigen::MatrixXd& logprobs() const { return logp_; }
  double logprob(int position, TokenId token) const { return logp_(token, position); }

  // grad += d/dθ Σ weight · log p[position][token]
  void backward(std::span<const TargetWeight> targets, std::span<double> grad) const;

 private:
  struct LayerCache {
    Eigen::MatrixXd x_in;
    Eigen::VectorXd r1;
    Eigen::MatrixXd a, q, k, v;
    std::vector<Eigen::MatrixXd> probs;  // per head, [T x T], upper triangular
    Eigen::MatrixXd attn;
    Eigen::MatrixXd x_mid;
    Eigen::VectorXd r2;
    Eigen::MatrixXd b, u, th, g;  // th: tanh term of the GELU
  };

  const ModelCheckpoint& model_;
  std::vector<TokenId> tokens_;
  std::vector<LayerCache> layers_;
  Eigen::MatrixXd x_final_;
  Eigen::VectorXd r_final_;
  Eigen::MatrixXd hf_;
  Eigen::MatrixXd logp_;
};

// Convenience: log-probability table for `tokens`.
Eigen::MatrixXd forward_logprobs(const ModelCheckpoint& model, std::span<const TokenId> tokens);

// Sum of log p(completion_i | prompt, completion_<i). 0 for an empty completion.
double sequence_logprob(const ModelCheckpoint& model, std::span<const TokenId> prompt,
                        std::span<const TokenId> completion);

// Token positions of `completion` inside prompt+completion, paired with the
// tokens they predict, each with `weight`.
std::vector<TargetWeight> completion_targets(std::span<const TokenId> prompt, std::span<const TokenId> completion,
                                             double weight);

// Joins prompt and completion into one sequence.
Tokens concat(std::span<const TokenId> prompt, std::span<const TokenId> completion);

// tanh-approximation GELU and its derivative; shared with the decoder.
double gelu(double x);
double gelu_grad(double x);

}  // namespace dpost::engine
