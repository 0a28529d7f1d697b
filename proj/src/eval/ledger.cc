#include "dpost/eval/ledger.h"

#include <stdexcept>

namespace dpost::eval {

double inference_flops(double params, double tokens) { return 2.0 * params * tokens; }
double training_flops(double params, double tokens) { return 6.0 * params * tokens; }

void ComputeLedger::add_inference(const std::string& phase, long long tokens) {
  if (tokens < 0) throw std::invalid_argument("negative token count");
  inference_tokens_ += tokens;
  phases_[phase].inference_tokens += tokens;
}

void ComputeLedger::add_training(const std::string& phase, long long tokens) {
  if (tokens < 0) throw std::invalid_argument("negative token count");
  training_tokens_ += tokens;
  phases_[phase].training_tokens += tokens;
}

double ComputeLedger::inference_flops() const {
  return eval::inference_flops(static_cast<double>(params_), static_cast<double>(inference_tokens_));
}

double ComputeLedger::training_flops() const {
  return eval::training_flops(static_cast<double>(params_), static_cast<double>(training_tokens_));
}

ComputeLedger& ComputeLedger::operator+=(const ComputeLedger& other) {
  if (params_ == 0) params_ = other.params_;
  if (other.params_ != 0 && other.params_ != params_) throw std::invalid_argument("ledgers for different model sizes");
  inference_tokens_ += other.inference_tokens_;
  training_tokens_ += other.training_tokens_;
  for (const auto& [name, p] : other.phases_) {
    phases_[name].inference_tokens += p.inference_tokens;
    phases_[name].training_tokens += p.training_tokens;
  }
  return *this;
}

}  // namespace dpost::eval
