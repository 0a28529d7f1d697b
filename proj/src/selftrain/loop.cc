#include "dpost/selftrain/loop.h"

#include <set>
#include <stdexcept>

#include "dpost/calc/generate.h"
#include "dpost/common/error.h"
#include "dpost/common/rng.h"
#include "dpost/corpus/annotations.h"
#include "dpost/corpus/dedup.h"
#include "dpost/eval/metrics.h"

namespace dpost::selftrain {
namespace {

// Optimizer seeds per phase so shuffles differ between phases and iterations.
enum class Phase : uint64_t { kWarmup = 1, kDpo = 2, kRetrain = 3 };

uint64_t phase_seed(uint64_t seed, Phase phase, int iteration) {
  return stream_id({seed, static_cast<uint64_t>(phase), static_cast<uint64_t>(iteration)});
}

// `samples` rationales per question, each from stream (tag, iteration, q, s).
std::vector<calc::DecodedRationale> sample_rationales(const ModelCheckpoint& model, const corpus::Dataset& questions,
                                                      int samples, StreamTag stream_tag, const LoopConfig& cfg,
                                                      const StepContext& ctx, const std::string& phase) {
  std::vector<engine::GenerationRequest> reqs;
  reqs.reserve(questions.size() * static_cast<size_t>(samples));
  for (size_t q = 0; q < questions.size(); ++q) {
    engine::Tokens prompt = model.tokenizer().encode_prompt(questions.items[q].question);
    for (int s = 0; s < samples; ++s) {
      reqs.push_back({prompt, stream_id({tag(stream_tag), static_cast<uint64_t>(ctx.iteration), q,
                                         static_cast<uint64_t>(s)})});
    }
  }
  engine::SamplingConfig sc;
  sc.temperature = cfg.temperature;
  sc.max_new_tokens = cfg.max_new_tokens;
  sc.seed = ctx.seed;
  sc.calculator_enabled = cfg.calculator_enabled;
  calc::GenerateOptions go;
  go.max_batch = cfg.max_batch;
  engine::DecodeStats stats;
  auto out = calc::generate_rationales(model, reqs, sc, go, &stats);
  if (ctx.ledger) ctx.ledger->add_inference(phase, stats.processed_tokens);
  return out;
}

std::string provenance_of(const ModelCheckpoint& model) {
  return std::string(engine::to_string(model.role())) + ":" + model.param_hash();
}

training::BatchLossFn sft_loss_fn(const std::vector<training::SftExample>& examples) {
  return [&examples](const ModelCheckpoint& m, std::span<const size_t> idx, std::span<double> grad) {
    std::vector<training::SftExample> batch;
    training::BatchResult r;
    for (size_t i : idx) {
      batch.push_back(examples[i]);
      r.tokens += training::token_count(examples[i]);
    }
    r.loss = training::sft_loss(m, batch, grad);
    return r;
  };
}

TrainResult train_sft(const ModelCheckpoint& base, const corpus::Dataset& data, const TrainProfile& profile,
                      uint64_t seed, const StepContext& ctx, const std::string& phase) {
  if (data.empty()) throw std::invalid_argument("SFT training set is empty");
  auto examples = sft_examples(base.tokenizer(), data);
  TrainResult r = training::optimize(base, examples.size(), sft_loss_fn(examples), profile, seed);
  r.checkpoint.set_role(engine::Role::kSft);
  if (ctx.ledger) ctx.ledger->add_training(phase, r.tokens_processed);
  return r;
}

double mean_pair_loss(const ModelCheckpoint& policy, const std::vector<training::PairLogprobs>& ref,
                      const std::vector<training::PreferenceExample>& examples, double beta) {
  return training::dpo_loss(policy, ref, examples, beta);
}

}  // namespace

const char* to_string(LoopMode mode) { return mode == LoopMode::kSt ? "st" : "dpo-st"; }

LoopMode loop_mode_from_string(const std::string& name) {
  if (name == "st") return LoopMode::kSt;
  if (name == "dpo-st" || name == "dpo_st") return LoopMode::kDpoSt;
  throw std::invalid_argument("unknown loop mode '" + name + "' (expected st or dpo-st)");
}

void LoopConfig::validate() const {
  if (max_iterations < 0) throw std::invalid_argument("max_iterations must be non-negative");
  if (dpo_samples_per_question < 2) throw std::invalid_argument("dpo_samples_per_question must be at least 2");
  if (sft_samples_per_question < 1) throw std::invalid_argument("sft_samples_per_question must be at least 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("sampling temperature must be positive");
  if (!(dedup_threshold > 0.0 && dedup_threshold <= 1.0)) throw std::invalid_argument("dedup_threshold must be in (0, 1]");
  if (max_new_tokens < 1 || max_batch < 1) throw std::invalid_argument("max_new_tokens and max_batch must be positive");
  if (pass_k < 1 || pass_at_k_problems < 0) throw std::invalid_argument("invalid Pass@K settings");
}

bool pair_invariant_holds(const PreferencePair& pair) {
  return eval::is_correct(pair.winning, pair.gold_answer) && !eval::is_correct(pair.losing, pair.gold_answer);
}

std::vector<training::SftExample> sft_examples(const engine::Tokenizer& tokenizer, const corpus::Dataset& data) {
  std::vector<training::SftExample> out;
  out.reserve(data.size());
  for (const auto& p : data.items) {
    if (!p.gold_rationale) throw DataError("problem " + p.id + " has no rationale to train on");
    out.push_back({tokenizer.encode_prompt(p.question), tokenizer.encode_completion(p.gold_rationale->text)});
  }
  return out;
}

TrainResult warmup(const ModelCheckpoint& base, const corpus::Dataset& labeled, const TrainProfile& profile,
                   const StepContext& ctx) {
  if (labeled.empty()) throw std::invalid_argument("warm-up needs a non-empty labeled set");
  return train_sft(base, labeled, profile, phase_seed(ctx.seed, Phase::kWarmup, 0), ctx, "warmup");
}

std::vector<PreferencePair> pairs_from_samples(const corpus::Problem& problem,
                                               const std::vector<corpus::Rationale>& samples, double dedup_threshold) {
  std::vector<corpus::Rationale> correct, incorrect;
  for (const auto& s : samples) (eval::is_correct(s, problem.gold_answer) ? correct : incorrect).push_back(s);
  correct = corpus::deduplicate(correct, dedup_threshold);
  incorrect = corpus::deduplicate(incorrect, dedup_threshold);
  std::vector<PreferencePair> out;
  for (const auto& w : correct) {
    for (const auto& l : incorrect) out.push_back({problem.id, problem.question, problem.gold_answer, w, l});
  }
  return out;
}

std::vector<PreferencePair> build_preference_data(const ModelCheckpoint& sft, const corpus::Dataset& questions,
                                                  const LoopConfig& cfg, const StepContext& ctx) {
  cfg.validate();
  const int n = cfg.dpo_samples_per_question;
  auto samples = sample_rationales(sft, questions, n, StreamTag::kDpoSample, cfg, ctx, "dpo_sampling");
  std::vector<PreferencePair> pairs;
  for (size_t q = 0; q < questions.size(); ++q) {
    std::vector<corpus::Rationale> group;
    for (int s = 0; s < n; ++s) group.push_back(samples[q * static_cast<size_t>(n) + static_cast<size_t>(s)].rationale);
    auto qp = pairs_from_samples(questions.items[q], group, cfg.dedup_threshold);
    pairs.insert(pairs.end(), qp.begin(), qp.end());
  }
  return pairs;
}

std::vector<training::PreferenceExample> preference_examples(const engine::Tokenizer& tokenizer,
                                                             const std::vector<PreferencePair>& pairs) {
  std::vector<training::PreferenceExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({tokenizer.encode_prompt(p.question), tokenizer.encode_completion(p.winning.text),
                   tokenizer.encode_completion(p.losing.text)});
  }
  return out;
}

DpoStepResult dpo_step(const ModelCheckpoint& sft, const std::vector<PreferencePair>& pairs,
                       const TrainProfile& profile, double beta, const StepContext& ctx) {
  if (pairs.empty()) throw EmptyPreferenceData("no preference pairs to train on");
  if (!(beta > 0.0)) throw std::invalid_argument("DPO beta must be positive");
  ModelCheckpoint reference = sft;
  reference.set_role(engine::Role::kReference);
  DpoStepResult result{{sft, {}, 0, 0, {}}, reference.param_hash(), true, 0.0, 0.0};

  auto examples = preference_examples(sft.tokenizer(), pairs);
  std::vector<training::PairLogprobs> ref;
  ref.reserve(examples.size());
  long long ref_tokens = 0;
  for (const auto& ex : examples) {
    ref.push_back(training::pair_logprobs(reference, ex));
    ref_tokens += training::token_count(ex);
  }
  if (ctx.ledger) ctx.ledger->add_inference("dpo_reference", ref_tokens);

  training::BatchLossFn fn = [&](const ModelCheckpoint& m, std::span<const size_t> idx, std::span<double> grad) {
    std::vector<training::PreferenceExample> batch;
    std::vector<training::PairLogprobs> batch_ref;
    training::BatchResult r;
    for (size_t i : idx) {
      batch.push_back(examples[i]);
      batch_ref.push_back(ref[i]);
      r.tokens += training::token_count(examples[i]);
    }
    r.loss = training::dpo_loss(m, batch_ref, batch, beta, grad);
    return r;
  };
  result.train = training::optimize(sft, examples.size(), fn, profile, phase_seed(ctx.seed, Phase::kDpo, ctx.iteration));
  result.train.checkpoint.set_role(engine::Role::kDpo);
  if (ctx.ledger) ctx.ledger->add_training("dpo", result.train.tokens_processed);
  result.initial_loss = result.train.curve.empty() ? std::log(2.0) : result.train.curve.front().loss;
  result.final_loss = mean_pair_loss(result.train.checkpoint, ref, examples, beta);
  if (ctx.ledger) ctx.ledger->add_inference("dpo_eval", ref_tokens);
  result.reference_unchanged = reference.param_hash() == result.reference_hash;
  return result;
}

corpus::Dataset union_training_set(const corpus::Dataset& labeled, const corpus::Dataset& filtered) {
  corpus::Dataset out;
  out.kind = corpus::DatasetKind::kLabeled;
  std::set<std::pair<std::string, std::string>> seen;
  auto add = [&](const corpus::Problem& p) {
    std::string text = p.gold_rationale ? p.gold_rationale->text : std::string();
    if (seen.emplace(p.question, text).second) out.items.push_back(p);
  };
  for (const auto& p : labeled.items) add(p);
  for (const auto& p : filtered.items) add(p);
  return out;
}

SftStepResult sft_step(const ModelCheckpoint& generator, const corpus::Dataset& questions,
                       const corpus::Dataset& labeled, const LoopConfig& cfg, const StepContext& ctx) {
  cfg.validate();
  if (generator.role() != engine::Role::kSft && generator.role() != engine::Role::kDpo) {
    throw std::invalid_argument("SFT-step generator must be an sft or dpo checkpoint");
  }
  const int k = cfg.sft_samples_per_question;
  auto samples = sample_rationales(generator, questions, k, StreamTag::kSftSample, cfg, ctx, "sft_sampling");
  const std::string origin = provenance_of(generator);

  SftStepResult r;
  r.pseudo.kind = corpus::DatasetKind::kPseudo;
  r.filtered.kind = corpus::DatasetKind::kFiltered;
  for (size_t q = 0; q < questions.size(); ++q) {
    const corpus::Problem& question = questions.items[q];
    std::vector<corpus::Rationale> accepted;
    std::vector<size_t> accepted_item;
    for (int s = 0; s < k; ++s) {
      const calc::DecodedRationale& d = samples[q * static_cast<size_t>(k) + static_cast<size_t>(s)];
      corpus::Problem item = question;
      item.id = question.id + "-it" + std::to_string(ctx.iteration) + "-s" + std::to_string(s);
      item.gold_rationale = d.rationale;
      r.pseudo.items.push_back(item);
      r.pseudo.provenance.push_back(origin);

      if (!eval::is_correct(d.rationale, question.gold_answer)) continue;
      auto scan = corpus::parse_annotations(d.text);
      if (!scan.malformed.empty() || !corpus::annotations_consistent(scan.spans) || d.malformed_count() > 0) continue;
      accepted.push_back(d.rationale);
      accepted_item.push_back(r.pseudo.items.size() - 1);
    }
    std::vector<std::string> texts;
    for (const auto& a : accepted) texts.push_back(a.text);
    for (size_t i : corpus::deduplicate_indices(texts, cfg.dedup_threshold)) {
      r.filtered.items.push_back(r.pseudo.items[accepted_item[i]]);
      r.filtered.provenance.push_back(origin);
    }
  }
  r.training_set = union_training_set(labeled, r.filtered);
  return r;
}

namespace {

void evaluate_into(IterationReport& rep, const ModelCheckpoint& sft, const ModelCheckpoint* dpo,
                   const LoopData& data, const LoopConfig& cfg, uint64_t seed, eval::ComputeLedger& ledger) {
  eval::EvalOptions eo;
  eo.calculator_enabled = cfg.calculator_enabled;
  eo.max_new_tokens = cfg.max_new_tokens;
  eo.max_batch = cfg.max_batch;
  rep.accuracy = eval::evaluate_greedy(sft, data.test, eo, &ledger).rate;
  rep.dev_accuracy = data.dev.empty() ? rep.accuracy : eval::evaluate_greedy(sft, data.dev, eo, &ledger).rate;
  if (cfg.pass_at_k_problems > 0 && !data.test.empty()) {
    corpus::Dataset subset = data.test;
    if (subset.items.size() > static_cast<size_t>(cfg.pass_at_k_problems)) {
      subset.items.resize(static_cast<size_t>(cfg.pass_at_k_problems));
    }
    rep.pass_k = cfg.pass_k;
    auto pk = eval::pass_at_k(sft, subset, cfg.pass_k, cfg.temperature, seed, eo, &ledger);
    rep.pass_at_1 = pk.rates_by_k.front();
    rep.pass_at_k = pk.rate;
    if (dpo != nullptr) {
      auto dk = eval::pass_at_k(*dpo, subset, cfg.pass_k, cfg.temperature, seed, eo, &ledger);
      rep.dpo_pass_at_1 = dk.rates_by_k.front();
      rep.dpo_pass_at_k = dk.rate;
    }
  }
  rep.training_flops = ledger.training_flops();
  rep.inference_flops = ledger.inference_flops();
}

}  // namespace

LoopResult run_loop(const ModelCheckpoint& base, const LoopData& data, const LoopConfig& cfg,
                    const Profiles& profiles, uint64_t seed, ExperimentSink* sink, const ModelCheckpoint* warm_start,
                    const std::string& config_hash) {
  cfg.validate();
  profiles.sft.validate();
  profiles.dpo.validate();
  if (data.labeled.empty()) throw std::invalid_argument("labeled set L is empty");
  ExperimentSink quiet;
  ExperimentSink& out = sink ? *sink : quiet;

  eval::ComputeLedger ledger(static_cast<long long>(base.param_count()));
  const std::string base_hash = base.param_hash();
  StepContext ctx{seed, 0, &ledger};

  ModelCheckpoint current = base;
  IterationReport rep0;
  rep0.iteration = 0;
  rep0.mode = cfg.mode;
  rep0.base_hash = base_hash;
  rep0.init_hash = base_hash;
  rep0.training_size = data.labeled.size();
  rep0.config_hash = config_hash;
  if (warm_start != nullptr) {
    current = *warm_start;
    current.set_role(engine::Role::kSft);
    out.log("warm-up reused from a previous run");
  } else {
    out.phase(0, "warm-up");
    TrainResult w = warmup(base, data.labeled, profiles.sft, ctx);
    current = std::move(w.checkpoint);
    out.loss_curve(0, "sft", w.curve);
  }
  current.set_config_hash(config_hash);
  out.checkpoint(0, "sft", current);
  rep0.sft_hash = current.param_hash();
  rep0.generator_role = "sft";
  out.phase(0, "evaluation");
  evaluate_into(rep0, current, nullptr, data, cfg, seed, ledger);
  out.report(rep0);

  LoopResult result{{rep0}, current, ledger};
  size_t best = 0;
  corpus::Dataset training_set = data.labeled;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    ctx.iteration = it;
    IterationReport rep;
    rep.iteration = it;
    rep.mode = cfg.mode;
    rep.base_hash = base_hash;
    rep.config_hash = config_hash;

    ModelCheckpoint generator = current;
    std::optional<ModelCheckpoint> dpo_model;
    if (cfg.mode == LoopMode::kDpoSt) {
      out.phase(it, "dpo-sampling");
      auto pairs = build_preference_data(current, data.unlabeled, cfg, ctx);
      rep.pairs = pairs.size();
      out.pairs(it, pairs);
      try {
        out.phase(it, "dpo-training");
        DpoStepResult d = dpo_step(current, pairs, profiles.dpo, profiles.beta, ctx);
        if (!d.reference_unchanged) throw std::logic_error("DPO reference changed during training");
        rep.reference_hash = d.reference_hash;
        rep.dpo_initial_loss = d.initial_loss;
        rep.dpo_final_loss = d.final_loss;
        dpo_model = std::move(d.train.checkpoint);
        dpo_model->set_config_hash(config_hash);
        rep.dpo_hash = dpo_model->param_hash();
        out.loss_curve(it, "dpo", d.train.curve);
        out.checkpoint(it, "dpo", *dpo_model);
        generator = *dpo_model;
      } catch (const EmptyPreferenceData& e) {
        rep.dpo_skipped = true;
        out.log("iteration " + std::to_string(it) + ": " + e.what() + "; running the ST step only");
      }
    }
    rep.generator_role = engine::to_string(generator.role());

    out.phase(it, "sft-sampling");
    SftStepResult s = sft_step(generator, data.unlabeled, training_set, cfg, ctx);
    rep.pseudo_size = s.pseudo.size();
    rep.filtered_size = s.filtered.size();
    out.dataset(it, "pseudo", s.pseudo);
    out.dataset(it, "filtered", s.filtered);
    training_set = std::move(s.training_set);
    rep.training_size = training_set.size();

    out.phase(it, "retrain");
    TrainResult retrain = train_sft(base, training_set, profiles.sft, phase_seed(seed, Phase::kRetrain, it), ctx,
                                    "retrain");
    rep.init_hash = retrain.initial_hash;
    current = std::move(retrain.checkpoint);
    current.set_config_hash(config_hash);
    rep.sft_hash = current.param_hash();
    out.loss_curve(it, "sft", retrain.curve);
    out.checkpoint(it, "sft", current);

    out.phase(it, "evaluation");
    evaluate_into(rep, current, dpo_model ? &*dpo_model : nullptr, data, cfg, seed, ledger);
    const double previous_dev = result.reports.back().dev_accuracy;
    out.report(rep);
    result.reports.push_back(rep);
    if (rep.dev_accuracy > result.reports[best].dev_accuracy) {
      best = result.reports.size() - 1;
      result.final_checkpoint = current;
    }
    if (rep.dev_accuracy <= previous_dev + cfg.convergence_delta) {
      out.log("dev accuracy did not improve at iteration " + std::to_string(it) + "; stopping");
      break;
    }
  }
  result.reports[best].selected = true;
  result.ledger = ledger;
  return result;
}

}  // namespace dpost::selftrain
