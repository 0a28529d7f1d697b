#include "dpost/engine/graph.h"

#include <cmath>
#include <numbers>

#include "dpost/common/error.h"

namespace dpost::engine {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

// y = g ⊙ x / rms(x), column-wise. Returns 1/rms per column in `r`.
MatrixXd rms_norm(const MatrixXd& x, const Eigen::Ref<const VectorXd>& gain, VectorXd& r) {
  const double d = static_cast<double>(x.rows());
  r.resize(x.cols());
  MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    r(t) = 1.0 / std::sqrt(x.col(t).squaredNorm() / d + kNormEps);
    y.col(t) = x.col(t).cwiseProduct(gain) * r(t);
  }
  return y;
}

// Backward of rms_norm; accumulates into dgain and returns dx.
MatrixXd rms_norm_backward(const MatrixXd& x, const Eigen::Ref<const VectorXd>& gain, const VectorXd& r,
                           const MatrixXd& dy, Eigen::Ref<VectorXd> dgain) {
  const double d = static_cast<double>(x.rows());
  MatrixXd dx(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    dgain += dy.col(t).cwiseProduct(x.col(t)) * r(t);
    VectorXd gdy = dy.col(t).cwiseProduct(gain);
    double dot = x.col(t).dot(gdy);
    dx.col(t) = gdy * r(t) - x.col(t) * (r(t) * r(t) * r(t) * dot / d);
  }
  return dx;
}

// tanh written through exp so that the matrix form vectorizes.
void gelu_forward(const MatrixXd& u, MatrixXd& th, MatrixXd& g) {
  Eigen::ArrayXXd inner = kGeluC * (u.array() + kGeluA * u.array().cube());
  th = (1.0 - 2.0 / ((2.0 * inner).exp() + 1.0)).matrix();
  g = (0.5 * u.array() * (1.0 + th.array())).matrix();
}

}  // namespace

double gelu(double x) {
  double t = 1.0 - 2.0 / (std::exp(2.0 * kGeluC * (x + kGeluA * x * x * x)) + 1.0);
  return 0.5 * x * (1.0 + t);
}

double gelu_grad(double x) {
  double t = 1.0 - 2.0 / (std::exp(2.0 * kGeluC * (x + kGeluA * x * x * x)) + 1.0);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

ForwardPass::ForwardPass(const ModelCheckpoint& model, std::span<const TokenId> tokens)
    : model_(model), tokens_(tokens.begin(), tokens.end()) {
  const ModelConfig& c = model.config();
  const ParamLayout& L = model.layout();
  const int T = length();
  if (T == 0) throw std::invalid_argument("forward pass over an empty sequence");
  if (T > c.context) {
    throw ContextOverflow("sequence of " + std::to_string(T) + " tokens exceeds context " + std::to_string(c.context));
  }
  const int hd = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  auto emb = model.view(L.tok_emb());
  auto pos = model.view(L.pos_emb());
  MatrixXd x(c.d_model, T);
  for (int t = 0; t < T; ++t) {
    TokenId id = tokens_[static_cast<size_t>(t)];
    if (id < 0 || id >= c.vocab_size) throw std::out_of_range("token id outside vocabulary");
    x.col(t) = emb.col(id) + pos.col(t);
  }

  layers_.resize(static_cast<size_t>(c.n_layers));
  for (int l = 0; l < c.n_layers; ++l) {
    const auto& B = L.block(l);
    LayerCache& lc = layers_[static_cast<size_t>(l)];
    lc.x_in = x;
    lc.a = rms_norm(x, model.view(B.norm1).col(0), lc.r1);
    lc.q.noalias() = model.view(B.wq) * lc.a;
    lc.k.noalias() = model.view(B.wk) * lc.a;
    lc.v.noalias() = model.view(B.wv) * lc.a;
    lc.attn.resize(c.d_model, T);
    lc.probs.resize(static_cast<size_t>(c.n_heads));
    for (int h = 0; h < c.n_heads; ++h) {
      MatrixXd& p = lc.probs[static_cast<size_t>(h)];
      p.noalias() = lc.k.middleRows(h * hd, hd).transpose() * lc.q.middleRows(h * hd, hd);
      for (int t = 0; t < T; ++t) {
        auto visible = p.col(t).head(t + 1);
        visible = ((visible.array() - visible.maxCoeff()) * scale).exp().matrix();
        visible /= visible.sum();
        p.col(t).tail(T - t - 1).setZero();
      }
      lc.attn.middleRows(h * hd, hd).noalias() = lc.v.middleRows(h * hd, hd) * p;
    }
    x.noalias() += model.view(B.wo) * lc.attn;
    lc.x_mid = x;
    lc.b = rms_norm(x, model.view(B.norm2).col(0), lc.r2);
    lc.u = model.view(B.w1) * lc.b;
    lc.u.colwise() += model.view(B.b1).col(0);
    gelu_forward(lc.u, lc.th, lc.g);
    x.noalias() += model.view(B.w2) * lc.g;
    x.colwise() += model.view(B.b2).col(0);
  }
  x_final_ = x;
  hf_ = rms_norm(x, model.view(L.norm_f()).col(0), r_final_);
  logp_ = model.view(L.head()) * hf_;
  logp_.colwise() += model.view(L.head_b()).col(0);
  for (int t = 0; t < T; ++t) {
    double m = logp_.col(t).maxCoeff();
    double lse = m + std::log((logp_.col(t).array() - m).exp().sum());
    logp_.col(t).array() -= lse;
  }
}

void ForwardPass::backward(std::span<const TargetWeight> targets, std::span<double> grad) const {
  const ModelConfig& c = model_.config();
  const ParamLayout& L = model_.layout();
  const int T = length();
  const int hd = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  if (grad.size() != model_.param_count()) throw std::invalid_argument("gradient buffer has the wrong length");
  auto G = [&](const TensorSpec& s) { return MatrixMap(grad.data() + s.offset, s.rows, s.cols); };

  // d/dlogits of Σ w log softmax: w (onehot - p) per target
  MatrixXd dlogits = MatrixXd::Zero(c.vocab_size, T);
  VectorXd weight_per_pos = VectorXd::Zero(T);
  for (const auto& tw : targets) {
    if (tw.position < 0 || tw.position >= T) throw std::out_of_range("target position outside sequence");
    dlogits(tw.token, tw.position) += tw.weight;
    weight_per_pos(tw.position) += tw.weight;
  }
  for (int t = 0; t < T; ++t) {
    if (weight_per_pos(t) != 0.0) dlogits.col(t) -= weight_per_pos(t) * logp_.col(t).array().exp().matrix();
  }

  G(L.head()).noalias() += dlogits * hf_.transpose();
  G(L.head_b()).col(0) += Eigen::VectorXd(dlogits.rowwise().sum());
  MatrixXd dhf = model_.view(L.head()).transpose() * dlogits;
  auto dgf = G(L.norm_f()).col(0);
  MatrixXd dx = rms_norm_backward(x_final_, model_.view(L.norm_f()).col(0), r_final_, dhf, dgf);

  for (int l = c.n_layers - 1; l >= 0; --l) {
    const auto& B = L.block(l);
    const LayerCache& lc = layers_[static_cast<size_t>(l)];

    // MLP
    G(B.b2).col(0) += Eigen::VectorXd(dx.rowwise().sum());
    G(B.w2).noalias() += dx * lc.g.transpose();
    MatrixXd du = model_.view(B.w2).transpose() * dx;
    du.array() *= 0.5 * (1.0 + lc.th.array()) + 0.5 * lc.u.array() * (1.0 - lc.th.array().square()) * kGeluC *
                                                   (1.0 + 3.0 * kGeluA * lc.u.array().square());
    G(B.b1).col(0) += Eigen::VectorXd(du.rowwise().sum());
    G(B.w1).noalias() += du * lc.b.transpose();
    MatrixXd db = model_.view(B.w1).transpose() * du;
    auto dg2 = G(B.norm2).col(0);
    dx += rms_norm_backward(lc.x_mid, model_.view(B.norm2).col(0), lc.r2, db, dg2);

    // attention
    G(B.wo).noalias() += dx * lc.attn.transpose();
    MatrixXd dattn = model_.view(B.wo).transpose() * dx;
    MatrixXd dq(c.d_model, T), dk(c.d_model, T), dv(c.d_model, T);
    for (int h = 0; h < c.n_heads; ++h) {
      const MatrixXd& p = lc.probs[static_cast<size_t>(h)];
      auto dO = dattn.middleRows(h * hd, hd);
      dv.middleRows(h * hd, hd).noalias() = dO * p.transpose();
      MatrixXd dp = lc.v.middleRows(h * hd, hd).transpose() * dO;
      Eigen::RowVectorXd inner = p.cwiseProduct(dp).colwise().sum();
      MatrixXd ds = p.cwiseProduct(dp.rowwise() - inner);
      ds *= scale;
      dq.middleRows(h * hd, hd).noalias() = lc.k.middleRows(h * hd, hd) * ds;
      dk.middleRows(h * hd, hd).noalias() = lc.q.middleRows(h * hd, hd) * ds.transpose();
    }
    G(B.wq).noalias() += dq * lc.a.transpose();
    G(B.wk).noalias() += dk * lc.a.transpose();
    G(B.wv).noalias() += dv * lc.a.transpose();
    MatrixXd da = model_.view(B.wq).transpose() * dq;
    da.noalias() += model_.view(B.wk).transpose() * dk;
    da.noalias() += model_.view(B.wv).transpose() * dv;
    auto dg1 = G(B.norm1).col(0);
    dx += rms_norm_backward(lc.x_in, model_.view(B.norm1).col(0), lc.r1, da, dg1);
  }

  auto demb = G(L.tok_emb());
  auto dpos = G(L.pos_emb());
  for (int t = 0; t < T; ++t) {
    demb.col(tokens_[static_cast<size_t>(t)]) += dx.col(t);
    dpos.col(t) += dx.col(t);
  }
}

Eigen::MatrixXd forward_logprobs(const ModelCheckpoint& model, std::span<const TokenId> tokens) {
  return ForwardPass(model, tokens).logprobs();
}

Tokens concat(std::span<const TokenId> prompt, std::span<const TokenId> completion) {
  Tokens out(prompt.begin(), prompt.end());
  out.insert(out.end(), completion.begin(), completion.end());
  return out;
}

std::vector<TargetWeight> completion_targets(std::span<const TokenId> prompt, std::span<const TokenId> completion,
                                             double weight) {
  if (prompt.empty()) throw std::invalid_argument("prompt must contain at least the BOS token");
  std::vector<TargetWeight> out;
  out.reserve(completion.size());
  for (size_t i = 0; i < completion.size(); ++i) {
    out.push_back({static_cast<int>(prompt.size() + i) - 1, completion[i], weight});
  }
  return out;
}

double sequence_logprob(const ModelCheckpoint& model, std::span<const TokenId> prompt,
                        std::span<const TokenId> completion) {
  if (completion.empty()) return 0.0;
  // The final completion token is never read, only predicted.
  Tokens seq = concat(prompt, completion.first(completion.size() - 1));
  ForwardPass pass(model, seq);
  double total = 0.0;
  for (const auto& t : completion_targets(prompt, completion, 1.0)) total += pass.logprob(t.position, t.token);
  return total;
}

}  // namespace dpost::engine
