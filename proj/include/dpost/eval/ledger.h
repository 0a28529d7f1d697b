#pragma once

#include <map>
#include <string>

namespace dpost::eval {

// Standard approximations: a forward pass costs 2·P FLOPs per token and a
// training step (forward plus backward) 6·P.
double inference_flops(double params, double tokens);
double training_flops(double params, double tokens);

class ComputeLedger {
 public:
  ComputeLedger() = default;
  explicit ComputeLedger(long long param_count) : params_(param_count) {}

  void add_inference(const std::string& phase, long long tokens);
  void add_training(const std::string& phase, long long tokens);

  long long param_count() const { return params_; }
  long long inference_tokens() const { return inference_tokens_; }
  long long training_tokens() const { return training_tokens_; }
  double inference_flops() const;
  double training_flops() const;
  double total_flops() const { return inference_flops() + training_flops(); }

  struct Phase {
    long long inference_tokens = 0;
    long long training_tokens = 0;
  };
  const std::map<std::string, Phase>& phases() const { return phases_; }

  // Sum of two ledgers over the same model size.
  ComputeLedger& operator+=(const ComputeLedger& other);

 private:
  long long params_ = 0;
  long long inference_tokens_ = 0;
  long long training_tokens_ = 0;
  std::map<std::string, Phase> phases_;
};

}  // namespace dpost::eval
