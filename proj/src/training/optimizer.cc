#include "dpost/training/optimizer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "dpost/common/error.h"
#include "dpost/common/rng.h"

namespace dpost::training {
namespace {

bool decays(const std::string& name) {
  return !(name.ends_with("norm1") || name.ends_with("norm2") || name == "norm_f" || name.ends_with(".b1") ||
           name.ends_with(".b2") || name == "head_b");
}

}  // namespace

void TrainProfile::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (epochs.has_value() == max_steps.has_value()) {
    throw std::invalid_argument("exactly one of epochs and max_steps must be set");
  }
  if (epochs && *epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (max_steps && *max_steps < 0) throw std::invalid_argument("max_steps must be non-negative");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be non-negative");
  if (!(warmup_ratio >= 0.0 && warmup_ratio <= 0.5)) throw std::invalid_argument("warmup_ratio must be in [0, 0.5]");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (!(grad_clip > 0.0)) throw std::invalid_argument("grad_clip must be positive");
  if (schedule != "cosine-with-warmup") throw std::invalid_argument("unknown schedule '" + schedule + "'");
}

int TrainProfile::total_steps(size_t examples) const {
  if (max_steps) return *max_steps;
  if (examples == 0) return 0;
  size_t per_epoch = (examples + static_cast<size_t>(batch_size) - 1) / static_cast<size_t>(batch_size);
  return static_cast<int>(per_epoch) * *epochs;
}

double learning_rate_at(const TrainProfile& p, int step, int total) {
  if (total <= 0) return 0.0;
  int warm = static_cast<int>(std::floor(p.warmup_ratio * total));
  if (step < warm) return p.learning_rate * (step + 1) / warm;
  double progress = static_cast<double>(step - warm) / std::max(1, total - warm);
  return p.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainProfile paper_sft_profile() {
  TrainProfile p;
  p.batch_size = 96;
  p.epochs = 8;
  p.learning_rate = 3e-4;
  p.warmup_ratio = 0.1;
  return p;
}

TrainProfile paper_dpo_profile() {
  TrainProfile p;
  p.batch_size = 96;
  p.max_steps = 150;
  p.learning_rate = 7e-7;
  p.warmup_ratio = 0.1;
  return p;
}

TrainProfile paper_llama_sft_profile() {
  TrainProfile p;
  p.batch_size = 128;
  p.epochs = 2;
  p.learning_rate = 2e-5;
  p.warmup_ratio = 0.03;
  return p;
}

TrainProfile paper_llama_dpo_profile() {
  TrainProfile p;
  p.batch_size = 128;
  p.max_steps = 100;
  p.learning_rate = 3e-7;
  p.warmup_ratio = 0.03;
  return p;
}

TrainProfile toy_sft_profile() {
  TrainProfile p;
  p.batch_size = 32;
  p.epochs = 10;
  p.learning_rate = 3e-3;
  p.warmup_ratio = 0.1;
  return p;
}

TrainProfile toy_dpo_profile() {
  TrainProfile p;
  p.batch_size = 32;
  p.max_steps = 100;
  p.learning_rate = 1e-5;
  p.warmup_ratio = 0.1;
  return p;
}

TrainResult optimize(const ModelCheckpoint& initial, size_t data_size, const BatchLossFn& loss_fn,
                     const TrainProfile& profile, uint64_t seed) {
  profile.validate();
  TrainResult result{initial, {}, 0, 0, initial.param_hash()};
  ModelCheckpoint& model = result.checkpoint;
  const int total = profile.total_steps(data_size);
  if (total > 0 && data_size == 0) throw std::invalid_argument("no training data");

  const size_t n = model.param_count();
  std::vector<double> grad(n), m(n, 0.0), v(n, 0.0), decay_mask(n, 0.0);
  for (const auto& t : model.layout().tensors()) {
    if (decays(t.name)) std::fill_n(decay_mask.begin() + static_cast<ptrdiff_t>(t.offset), t.size(), 1.0);
  }

  std::vector<size_t> order(data_size);
  size_t cursor = data_size;
  int epoch = 0;
  const size_t bs = static_cast<size_t>(profile.batch_size);
  std::vector<size_t> batch;

  for (int step = 0; step < total; ++step) {
    if (cursor >= data_size) {
      std::iota(order.begin(), order.end(), size_t{0});
      RngStream rng(seed, stream_id({tag(StreamTag::kShuffle), static_cast<uint64_t>(epoch)}));
      rng.shuffle(order);
      cursor = 0;
      ++epoch;
    }
    size_t end = std::min(cursor + bs, data_size);
    batch.assign(order.begin() + static_cast<ptrdiff_t>(cursor), order.begin() + static_cast<ptrdiff_t>(end));
    cursor = end;

    std::fill(grad.begin(), grad.end(), 0.0);
    BatchResult br;
    try {
      br = loss_fn(model, batch, grad);
    } catch (const NonFiniteLoss& e) {
      throw DivergenceDetected(std::string("step ") + std::to_string(step) + ": " + e.what());
    }
    if (!std::isfinite(br.loss)) throw DivergenceDetected("non-finite loss at step " + std::to_string(step));
    result.tokens_processed += br.tokens;

    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    double norm = std::sqrt(norm2);
    if (!std::isfinite(norm)) throw DivergenceDetected("non-finite gradient at step " + std::to_string(step));
    double clip = norm > profile.grad_clip ? profile.grad_clip / norm : 1.0;

    const double lr = learning_rate_at(profile, step, total);
    const double b1 = profile.adam_beta1, b2 = profile.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, step + 1), c2 = 1.0 - std::pow(b2, step + 1);
    auto params = model.mutable_params();
    for (size_t i = 0; i < n; ++i) {
      double g = grad[i] * clip;
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + profile.adam_eps);
      params[i] -= lr * (update + profile.weight_decay * decay_mask[i] * params[i]);
    }
    result.curve.push_back({step, br.loss, lr});
    result.steps = step + 1;
  }
  return result;
}

void write_loss_curve(const std::filesystem::path& path, std::span<const LossPoint> curve,
                      const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
  out << "step,loss,lr\n";
  out.precision(17);
  for (const auto& p : curve) out << p.step << "," << p.loss << "," << p.lr << "\n";
}

}  // namespace dpost::training
