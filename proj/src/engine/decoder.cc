#include "dpost/engine/decoder.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpost/common/error.h"
#include "dpost/common/rng.h"
#include "dpost/engine/graph.h"

namespace dpost::engine {
namespace {

std::vector<double> row_major(const ConstMatrixMap& m) {
  std::vector<double> out(static_cast<size_t>(m.rows() * m.cols()));
  for (Eigen::Index o = 0; o < m.rows(); ++o) {
    for (Eigen::Index i = 0; i < m.cols(); ++i) out[static_cast<size_t>(o * m.cols() + i)] = m(o, i);
  }
  return out;
}

std::vector<double> flat(const ConstMatrixMap& m) { return std::vector<double>(m.data(), m.data() + m.size()); }

// Y[o][b] = Σ_i W[o][i] X[i][b], accumulated in increasing i for every lane.
void matmul(const double* W, int out, int in, const double* X, int B, double* Y) {
  for (int o = 0; o < out; ++o) {
    double* y = Y + static_cast<ptrdiff_t>(o) * B;
    std::fill(y, y + B, 0.0);
    const double* w = W + static_cast<ptrdiff_t>(o) * in;
    for (int i = 0; i < in; ++i) {
      const double wi = w[i];
      const double* x = X + static_cast<ptrdiff_t>(i) * B;
      for (int b = 0; b < B; ++b) y[b] = std::fma(wi, x[b], y[b]);
    }
  }
}

void rms_norm(const double* X, int d, int B, const double* gain, double* Y, double* scratch) {
  std::fill(scratch, scratch + B, 0.0);
  for (int i = 0; i < d; ++i) {
    const double* x = X + static_cast<ptrdiff_t>(i) * B;
    for (int b = 0; b < B; ++b) scratch[b] = std::fma(x[b], x[b], scratch[b]);
  }
  for (int b = 0; b < B; ++b) scratch[b] = 1.0 / std::sqrt(scratch[b] / d + kNormEps);
  for (int i = 0; i < d; ++i) {
    const double* x = X + static_cast<ptrdiff_t>(i) * B;
    double* y = Y + static_cast<ptrdiff_t>(i) * B;
    for (int b = 0; b < B; ++b) y[b] = x[b] * scratch[b] * gain[i];
  }
}

TokenId pick_token(const double* logits, ptrdiff_t stride, int vocab, double temperature, RngStream& rng,
                   std::vector<double>& weights) {
  if (temperature <= 0.0) {
    TokenId best = 0;
    for (int v = 1; v < vocab; ++v) {
      if (logits[v * stride] > logits[best * stride]) best = v;
    }
    return best;
  }
  double m = logits[0];
  for (int v = 1; v < vocab; ++v) m = std::max(m, logits[v * stride]);
  weights.resize(static_cast<size_t>(vocab));
  double total = 0.0;
  for (int v = 0; v < vocab; ++v) {
    weights[static_cast<size_t>(v)] = std::exp((logits[v * stride] - m) / temperature);
    total += weights[static_cast<size_t>(v)];
  }
  double u = rng.uniform() * total;
  double cum = 0.0;
  for (int v = 0; v < vocab; ++v) {
    cum += weights[static_cast<size_t>(v)];
    if (u < cum) return v;
  }
  for (int v = vocab - 1; v >= 0; --v) {
    if (weights[static_cast<size_t>(v)] > 0.0) return v;
  }
  return 0;
}

}  // namespace

void SamplingConfig::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw std::invalid_argument("temperature must be >= 0");
  if (max_new_tokens < 1) throw std::invalid_argument("max_new_tokens must be positive");
}

struct Decoder::Lane {
  size_t request = 0;
  Tokens tokens;
  size_t prompt_len = 0;
  int pos = 0;  // tokens already fed through the model
  int steps = 0;
  bool done = false;
  bool eos = false;
  RngStream rng;
  std::unique_ptr<LaneFilter> filter;
  std::vector<std::vector<double>> keys;    // per layer, [position][d]
  std::vector<std::vector<double>> values;  // per layer, [position][d]

  Lane(uint64_t seed, uint64_t stream) : rng(seed, stream) {}
};

Decoder::Decoder(const ModelCheckpoint& model) : model_(model), config_(model.config()) {
  const ParamLayout& L = model.layout();
  for (int l = 0; l < config_.n_layers; ++l) {
    const auto& B = L.block(l);
    layers_.push_back({flat(model.view(B.norm1)), row_major(model.view(B.wq)), row_major(model.view(B.wk)),
                       row_major(model.view(B.wv)), row_major(model.view(B.wo)), flat(model.view(B.norm2)),
                       row_major(model.view(B.w1)), flat(model.view(B.b1)), row_major(model.view(B.w2)),
                       flat(model.view(B.b2))});
  }
  norm_f_ = flat(model.view(L.norm_f()));
  head_ = row_major(model.view(L.head()));
  head_b_ = flat(model.view(L.head_b()));
}

void Decoder::step(std::vector<Lane*>& lanes, std::vector<double>& logits) const {
  const int B = static_cast<int>(lanes.size());
  const int d = config_.d_model;
  const int dff = config_.d_ff;
  const int hd = config_.head_dim();
  const int V = config_.vocab_size;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const ParamLayout& L = model_.layout();
  auto emb = model_.view(L.tok_emb());
  auto pos_emb = model_.view(L.pos_emb());

  std::vector<double> x(static_cast<size_t>(d * B)), a(x.size()), q(x.size()), k(x.size()), v(x.size()),
      attn(x.size()), proj(x.size()), scratch(static_cast<size_t>(B));
  std::vector<double> u(static_cast<size_t>(dff * B)), g(u.size());
  for (int b = 0; b < B; ++b) {
    const Lane& lane = *lanes[static_cast<size_t>(b)];
    TokenId tok = lane.tokens[static_cast<size_t>(lane.pos)];
    for (int i = 0; i < d; ++i) x[static_cast<size_t>(i * B + b)] = emb(i, tok) + pos_emb(i, lane.pos);
  }

  std::vector<double> scores, qh(static_cast<size_t>(hd)), oh(static_cast<size_t>(hd));
  for (int l = 0; l < config_.n_layers; ++l) {
    const Layer& W = layers_[static_cast<size_t>(l)];
    rms_norm(x.data(), d, B, W.norm1.data(), a.data(), scratch.data());
    matmul(W.wq.data(), d, d, a.data(), B, q.data());
    matmul(W.wk.data(), d, d, a.data(), B, k.data());
    matmul(W.wv.data(), d, d, a.data(), B, v.data());
    for (int b = 0; b < B; ++b) {
      Lane& lane = *lanes[static_cast<size_t>(b)];
      const int p = lane.pos;
      auto& K = lane.keys[static_cast<size_t>(l)];
      auto& Vc = lane.values[static_cast<size_t>(l)];
      if (K.size() < static_cast<size_t>((p + 1) * d)) {
        K.resize(static_cast<size_t>((p + 1) * d) * 2);
        Vc.resize(K.size());
      }
      for (int i = 0; i < d; ++i) {
        K[static_cast<size_t>(p * d + i)] = k[static_cast<size_t>(i * B + b)];
        Vc[static_cast<size_t>(p * d + i)] = v[static_cast<size_t>(i * B + b)];
      }
      scores.resize(static_cast<size_t>(p + 1));
      for (int h = 0; h < config_.n_heads; ++h) {
        for (int j = 0; j < hd; ++j) qh[static_cast<size_t>(j)] = q[static_cast<size_t>((h * hd + j) * B + b)];
        double m = -INFINITY;
        for (int s = 0; s <= p; ++s) {
          const double* key = K.data() + static_cast<ptrdiff_t>(s) * d + h * hd;
          double acc = 0.0;
          for (int j = 0; j < hd; ++j) acc = std::fma(qh[static_cast<size_t>(j)], key[j], acc);
          scores[static_cast<size_t>(s)] = acc * scale;
          m = std::max(m, scores[static_cast<size_t>(s)]);
        }
        double sum = 0.0;
        for (int s = 0; s <= p; ++s) {
          scores[static_cast<size_t>(s)] = std::exp(scores[static_cast<size_t>(s)] - m);
          sum += scores[static_cast<size_t>(s)];
        }
        std::fill(oh.begin(), oh.end(), 0.0);
        for (int s = 0; s <= p; ++s) {
          const double w = scores[static_cast<size_t>(s)] / sum;
          const double* val = Vc.data() + static_cast<ptrdiff_t>(s) * d + h * hd;
          for (int j = 0; j < hd; ++j) oh[static_cast<size_t>(j)] = std::fma(w, val[j], oh[static_cast<size_t>(j)]);
        }
        for (int j = 0; j < hd; ++j) attn[static_cast<size_t>((h * hd + j) * B + b)] = oh[static_cast<size_t>(j)];
      }
    }
    matmul(W.wo.data(), d, d, attn.data(), B, proj.data());
    for (size_t i = 0; i < x.size(); ++i) x[i] += proj[i];
    rms_norm(x.data(), d, B, W.norm2.data(), a.data(), scratch.data());
    matmul(W.w1.data(), dff, d, a.data(), B, u.data());
    for (int o = 0; o < dff; ++o) {
      for (int b = 0; b < B; ++b) {
        size_t idx = static_cast<size_t>(o * B + b);
        g[idx] = gelu(u[idx] + W.b1[static_cast<size_t>(o)]);
      }
    }
    matmul(W.w2.data(), d, dff, g.data(), B, proj.data());
    for (int i = 0; i < d; ++i) {
      for (int b = 0; b < B; ++b) {
        size_t idx = static_cast<size_t>(i * B + b);
        x[idx] += proj[idx] + W.b2[static_cast<size_t>(i)];
      }
    }
  }
  rms_norm(x.data(), d, B, norm_f_.data(), a.data(), scratch.data());
  logits.resize(static_cast<size_t>(V * B));
  matmul(head_.data(), V, d, a.data(), B, logits.data());
  for (int o = 0; o < V; ++o) {
    for (int b = 0; b < B; ++b) logits[static_cast<size_t>(o * B + b)] += head_b_[static_cast<size_t>(o)];
  }
}

std::vector<Generation> Decoder::generate(std::span<const GenerationRequest> requests, const SamplingConfig& config,
                                          int max_batch, const LaneFilterFactory* filter_factory,
                                          DecodeStats* stats) const {
  config.validate();
  if (max_batch < 1) throw std::invalid_argument("max_batch must be positive");
  std::vector<Generation> results(requests.size());
  std::vector<std::unique_ptr<Lane>> active;
  size_t next = 0;
  std::vector<double> logits, weights;
  const int V = config_.vocab_size;

  auto finish = [&](Lane& lane) {
    lane.done = true;
    if (lane.filter) lane.filter->finish();
    Generation& out = results[lane.request];
    out.tokens.assign(lane.tokens.begin() + static_cast<ptrdiff_t>(lane.prompt_len), lane.tokens.end());
    out.stopped_at_eos = lane.eos;
    out.steps = lane.steps;
    out.filter = std::move(lane.filter);
  };

  while (next < requests.size() || !active.empty()) {
    while (static_cast<int>(active.size()) < max_batch && next < requests.size()) {
      const GenerationRequest& req = requests[next];
      if (req.prompt.empty()) throw std::invalid_argument("empty prompt");
      if (static_cast<int>(req.prompt.size()) > config_.context) {
        throw ContextOverflow("prompt of " + std::to_string(req.prompt.size()) + " tokens exceeds context");
      }
      auto lane = std::make_unique<Lane>(config.seed, req.stream);
      lane->request = next;
      lane->tokens = req.prompt;
      lane->prompt_len = req.prompt.size();
      lane->keys.resize(static_cast<size_t>(config_.n_layers));
      lane->values.resize(static_cast<size_t>(config_.n_layers));
      if (filter_factory != nullptr && *filter_factory) lane->filter = (*filter_factory)();
      active.push_back(std::move(lane));
      ++next;
    }
    std::vector<Lane*> lanes;
    for (auto& l : active) lanes.push_back(l.get());
    step(lanes, logits);
    if (stats != nullptr) stats->processed_tokens += static_cast<long long>(lanes.size());

    const ptrdiff_t B = static_cast<ptrdiff_t>(lanes.size());
    for (ptrdiff_t b = 0; b < B; ++b) {
      Lane& lane = *lanes[static_cast<size_t>(b)];
      ++lane.pos;
      if (lane.pos < static_cast<int>(lane.tokens.size())) continue;  // still reading the prompt
      TokenId proposed = pick_token(logits.data() + b, B, V, config.temperature, lane.rng, weights);
      TokenId emitted = lane.filter ? lane.filter->filter(proposed) : proposed;
      ++lane.steps;
      if (stats != nullptr) ++stats->generated_tokens;
      if (emitted == Tokenizer::kEos) {
        lane.eos = true;
        finish(lane);
        continue;
      }
      lane.tokens.push_back(emitted);
      if (lane.steps >= config.max_new_tokens || static_cast<int>(lane.tokens.size()) >= config_.context) finish(lane);
    }
    std::erase_if(active, [](const std::unique_ptr<Lane>& l) { return l->done; });
  }
  return results;
}

std::string generate_text(const ModelCheckpoint& model, const std::string& question, const SamplingConfig& config,
                          uint64_t stream, const LaneFilterFactory* filter_factory) {
  Decoder decoder(model);
  GenerationRequest req{model.tokenizer().encode_prompt(question), stream};
  auto out = decoder.generate(std::span<const GenerationRequest>(&req, 1), config, 1, filter_factory);
  return model.tokenizer().decode(out.front().tokens);
}

}  // namespace dpost::engine
