#include <doctest.h>

#include <cmath>
#include <numeric>
#include <optional>

#include "dpost/common/error.h"
#include "dpost/common/rng.h"
#include "dpost/corpus/synthetic.h"
#include "dpost/engine/decoder.h"
#include "dpost/engine/graph.h"

using namespace dpost;
using namespace dpost::engine;

namespace {

ModelCheckpoint small_model(uint64_t seed, double init_std = 0.02, int d = 16, int layers = 2, int context = 64) {
  ModelConfig c;
  c.d_model = d;
  c.n_layers = layers;
  c.n_heads = 2;
  c.d_ff = 2 * d;
  c.context = context;
  c.init_std = init_std;
  return ModelCheckpoint::initialize(c, Tokenizer::build(), seed);
}

Tokens random_tokens(const ModelCheckpoint& m, int n, uint64_t seed) {
  RngStream rng(seed, 99);
  Tokens t{Tokenizer::kBos};
  for (int i = 1; i < n; ++i) t.push_back(static_cast<TokenId>(rng.uniform_int(4, m.config().vocab_size - 1)));
  return t;
}

}  // namespace

TEST_CASE("tokenizer round-trips synthetic problems and keeps delimiters atomic") {
  Tokenizer tok = Tokenizer::build();
  auto data = corpus::generate_synthetic(3, 50, {1, 3});
  for (const auto& p : data.items) {
    CHECK(tok.decode(tok.encode(p.question)) == p.question);
    const std::string& r = p.gold_rationale->text;
    Tokens ids = tok.encode(r);
    CHECK(tok.decode(ids) == r);
    for (TokenId id : ids) CHECK(id != Tokenizer::kUnk);
  }
  for (const char* s : {"<<", ">>", "####", "\n"}) CHECK(tok.encode(s).size() == 1);
  CHECK(tok.encode("12*52=<<12*52=624>>624").size() == 20);
}

TEST_CASE("forward rows are normalised, causal and deterministic") {
  auto m = small_model(1, 0.3);
  Tokens seq = random_tokens(m, 20, 1);
  auto lp = forward_logprobs(m, seq);
  for (int t = 0; t < lp.cols(); ++t) CHECK(std::abs(lp.col(t).array().exp().sum() - 1.0) < 1e-6);
  auto again = forward_logprobs(m, seq);
  CHECK((lp.array() == again.array()).all());

  Tokens changed = seq;
  for (size_t i = 12; i < changed.size(); ++i) changed[i] = 5 + static_cast<TokenId>(i % 7);
  auto lp2 = forward_logprobs(m, changed);
  CHECK((lp.leftCols(12).array() == lp2.leftCols(12).array()).all());
}

TEST_CASE("context overflow is rejected") {
  auto m = small_model(1, 0.02, 16, 1, 8);
  Tokens seq(9, 5);
  CHECK_THROWS_AS(forward_logprobs(m, seq), ContextOverflow);
}

TEST_CASE("sequence_logprob sums realised completion rows") {
  auto m = small_model(2, 0.3);
  Tokens prompt = random_tokens(m, 6, 2);
  Tokens completion = {7, 9, 11, 13, 15};
  CHECK(sequence_logprob(m, prompt, {}) == 0.0);

  auto lp = forward_logprobs(m, concat(prompt, completion));
  double one = sequence_logprob(m, prompt, std::span<const TokenId>(completion).first(1));
  CHECK(one == doctest::Approx(lp(completion[0], 5)).epsilon(1e-12));

  double oracle = 0.0;
  for (int i = 0; i < 5; ++i) oracle += lp(completion[static_cast<size_t>(i)], 5 + i);
  double got = sequence_logprob(m, prompt, completion);
  CHECK(got == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(got <= 0.0);
}

TEST_CASE("backward matches central finite differences") {
  for (uint64_t seed : {11u, 12u, 13u}) {
    ModelCheckpoint m = small_model(seed, 0.3, 8, 2, 16);
    REQUIRE(m.param_count() <= 10000);
    Tokens seq = random_tokens(m, 10, seed);
    std::vector<TargetWeight> targets;
    for (int t = 3; t < 9; ++t) targets.push_back({t, seq[static_cast<size_t>(t + 1)], -1.0 + 0.3 * t});
    auto objective = [&](const ModelCheckpoint& mm) {
      ForwardPass p(mm, seq);
      double s = 0.0;
      for (const auto& tw : targets) s += tw.weight * p.logprob(tw.position, tw.token);
      return s;
    };
    std::vector<double> grad(m.param_count(), 0.0);
    ForwardPass(m, seq).backward(targets, grad);

    const double eps = 1e-4;
    double diff2 = 0.0, norm2 = 0.0;
    auto params = m.mutable_params();
    for (size_t i = 0; i < params.size(); ++i) {
      double keep = params[i];
      params[i] = keep + eps;
      double up = objective(m);
      params[i] = keep - eps;
      double down = objective(m);
      params[i] = keep;
      double fd = (up - down) / (2 * eps);
      diff2 += (fd - grad[i]) * (fd - grad[i]);
      norm2 += std::max(fd * fd, grad[i] * grad[i]);
    }
    CHECK(std::sqrt(diff2 / norm2) < 1e-4);
  }
}

TEST_CASE("zero output layer blocks gradient below the head") {
  ModelCheckpoint m = small_model(5, 0.3, 8, 1, 16);
  m.mutable_view(m.layout().head()).setZero();
  Tokens seq = random_tokens(m, 8, 5);
  // Symmetric in tokens 10 and 11.
  std::vector<TargetWeight> targets = {{4, 10, 1.0}, {4, 11, 1.0}};
  std::vector<double> grad(m.param_count(), 0.0);
  ForwardPass(m, seq).backward(targets, grad);
  const auto& head = m.layout().head();
  for (size_t i = 0; i < head.offset; ++i) REQUIRE(grad[i] == 0.0);
  size_t hb = m.layout().head_b().offset;
  CHECK(grad[hb + 10] == grad[hb + 11]);
  CHECK(grad[hb + 10] != 0.0);
}

TEST_CASE("greedy decoding agrees with the forward pass and is batch invariant") {
  ModelCheckpoint m = small_model(7, 0.5, 16, 2, 64);
  std::vector<GenerationRequest> reqs;
  for (int i = 0; i < 32; ++i) reqs.push_back({random_tokens(m, 3 + i % 5, 100 + static_cast<uint64_t>(i)), 0});
  SamplingConfig cfg;
  cfg.temperature = 0.0;
  cfg.max_new_tokens = 20;
  Decoder dec(m);
  auto one = dec.generate(reqs, cfg, 1);
  for (int batch : {8, 32}) {
    auto many = dec.generate(reqs, cfg, batch);
    for (size_t i = 0; i < reqs.size(); ++i) CHECK(many[i].tokens == one[i].tokens);
  }
  for (size_t i = 0; i < 4; ++i) {
    Tokens seq = reqs[i].prompt;
    for (TokenId t : one[i].tokens) {
      auto lp = forward_logprobs(m, seq);
      Eigen::Index best;
      lp.col(lp.cols() - 1).maxCoeff(&best);
      CHECK(best == t);
      seq.push_back(t);
    }
  }
}

TEST_CASE("sampling is reproducible per stream and independent of batch") {
  ModelCheckpoint m = small_model(8, 0.5);
  std::vector<GenerationRequest> reqs;
  for (int i = 0; i < 8; ++i) reqs.push_back({random_tokens(m, 4, 200 + static_cast<uint64_t>(i)), stream_id({5, static_cast<uint64_t>(i)})});
  SamplingConfig cfg;
  cfg.temperature = 0.7;
  cfg.max_new_tokens = 15;
  cfg.seed = 42;
  Decoder dec(m);
  auto a = dec.generate(reqs, cfg, 1);
  auto b = dec.generate(reqs, cfg, 8);
  for (size_t i = 0; i < reqs.size(); ++i) CHECK(a[i].tokens == b[i].tokens);
}

TEST_CASE("copied and moved checkpoints decode like the original") {
  auto original = small_model(12, 0.3);
  Tokens prompt = random_tokens(original, 6, 4);
  SamplingConfig cfg;
  cfg.temperature = 1.0;
  cfg.max_new_tokens = 20;
  auto expected = Decoder(original).generate(std::vector<GenerationRequest>{{prompt, 1}}, cfg, 1)[0].tokens;
  std::optional<ModelCheckpoint> holder = original;
  ModelCheckpoint moved = std::move(*holder);
  holder.reset();
  std::vector<ModelCheckpoint> copies(3, moved);
  copies.push_back(small_model(1));
  for (int i = 0; i < 3; ++i) {
    CHECK(Decoder(copies[static_cast<size_t>(i)]).generate(std::vector<GenerationRequest>{{prompt, 1}}, cfg, 1)[0].tokens == expected);
    CHECK(ForwardPass(copies[static_cast<size_t>(i)], prompt).logprobs() == ForwardPass(original, prompt).logprobs());
  }
}

TEST_CASE("gradients do not depend on the alignment of the output buffer") {
  ModelCheckpoint m = small_model(14, 0.3, 16, 2, 32);
  Tokens seq = random_tokens(m, 20, 14);
  std::vector<TargetWeight> targets;
  for (int t = 5; t < 19; ++t) targets.push_back({t, seq[static_cast<size_t>(t + 1)], -1.0});
  ForwardPass pass(m, seq);
  std::vector<double> reference(m.param_count(), 0.0);
  pass.backward(targets, reference);
  for (size_t shift = 1; shift < 8; ++shift) {
    std::vector<double> buffer(m.param_count() + shift, 0.0);
    std::span<double> grad(buffer.data() + shift, m.param_count());
    pass.backward(targets, grad);
    REQUIRE(std::equal(grad.begin(), grad.end(), reference.begin()));
  }
}
