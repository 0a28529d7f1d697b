#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dpost/corpus/problem.h"
#include "dpost/engine/model.h"
#include "dpost/eval/ledger.h"
#include "dpost/training/losses.h"
#include "dpost/training/optimizer.h"

namespace dpost::selftrain {

using engine::ModelCheckpoint;
using training::TrainProfile;
using training::TrainResult;

enum class LoopMode { kSt, kDpoSt };

const char* to_string(LoopMode mode);
// "st" or "dpo-st".
LoopMode loop_mode_from_string(const std::string& name);

struct LoopConfig {
  int max_iterations = 3;
  int dpo_samples_per_question = 5;
  int sft_samples_per_question = 3;
  double temperature = 0.7;
  double dedup_threshold = 0.7;
  LoopMode mode = LoopMode::kDpoSt;
  bool calculator_enabled = true;

  int max_new_tokens = 300;
  int max_batch = 32;
  // Stop once dev accuracy improves by no more than this (fraction, 0.1 points).
  double convergence_delta = 0.001;
  // Pass@K evaluated on the first `pass_at_k_problems` test problems; 0 skips it.
  int pass_k = 10;
  int pass_at_k_problems = 0;

  void validate() const;
};

struct Profiles {
  TrainProfile sft = training::toy_sft_profile();
  TrainProfile dpo = training::toy_dpo_profile();
  double beta = 0.1;
};

struct PreferencePair {
  std::string question_id;
  std::string question;
  double gold_answer = 0.0;
  corpus::Rationale winning;
  corpus::Rationale losing;
};

// Winning answer matches the gold answer; losing answer is missing or differs.
bool pair_invariant_holds(const PreferencePair& pair);

// Seed, iteration and compute ledger shared by the steps of one run.
struct StepContext {
  uint64_t seed = 0;
  int iteration = 0;
  eval::ComputeLedger* ledger = nullptr;
};

std::vector<training::SftExample> sft_examples(const engine::Tokenizer& tokenizer, const corpus::Dataset& data);

// Supervised fine-tuning of `base` on the gold rationales of `labeled`.
TrainResult warmup(const ModelCheckpoint& base, const corpus::Dataset& labeled, const TrainProfile& profile,
                   const StepContext& ctx);

// Splits one question's samples into correct and incorrect, deduplicates each
// class and returns every (correct, incorrect) combination.
std::vector<PreferencePair> pairs_from_samples(const corpus::Problem& problem,
                                               const std::vector<corpus::Rationale>& samples, double dedup_threshold);

std::vector<PreferencePair> build_preference_data(const ModelCheckpoint& sft, const corpus::Dataset& questions,
                                                  const LoopConfig& cfg, const StepContext& ctx);

std::vector<training::PreferenceExample> preference_examples(const engine::Tokenizer& tokenizer,
                                                             const std::vector<PreferencePair>& pairs);

struct DpoStepResult {
  TrainResult train;
  std::string reference_hash;  // of the frozen reference, before and after
  bool reference_unchanged = true;
  double initial_loss = 0.0;   // mean pair loss before any update
  double final_loss = 0.0;     // mean pair loss of the tuned policy
};

// DPO of a copy of `sft` against a frozen reference equal to `sft`. Throws
// EmptyPreferenceData when `pairs` is empty.
DpoStepResult dpo_step(const ModelCheckpoint& sft, const std::vector<PreferencePair>& pairs,
                       const TrainProfile& profile, double beta, const StepContext& ctx);

struct SftStepResult {
  corpus::Dataset pseudo;        // S: every sampled rationale
  corpus::Dataset filtered;      // S^α
  corpus::Dataset training_set;  // L ∪ S^α
};

// Samples K rationales per question from `generator`; S^α keeps those with a
// correct answer and consistent, well-formed annotations, deduplicated per
// question.
SftStepResult sft_step(const ModelCheckpoint& generator, const corpus::Dataset& questions,
                       const corpus::Dataset& labeled, const LoopConfig& cfg, const StepContext& ctx);

// L ∪ S: all of L, then new (question, rationale) pairs from S in order.
corpus::Dataset union_training_set(const corpus::Dataset& labeled, const corpus::Dataset& filtered);

struct IterationReport {
  int iteration = 0;
  LoopMode mode = LoopMode::kDpoSt;
  double accuracy = 0.0;       // test accuracy of this iteration's SFT model
  double dev_accuracy = 0.0;
  std::optional<double> pass_at_1;
  std::optional<double> pass_at_k;
  std::optional<double> dpo_pass_at_1;  // same metrics for the DPO model
  std::optional<double> dpo_pass_at_k;
  int pass_k = 0;
  size_t pairs = 0;
  bool dpo_skipped = false;
  size_t pseudo_size = 0;      // |S|
  size_t filtered_size = 0;    // |S^α|
  size_t training_size = 0;    // |L| used by this iteration's retrain
  std::string generator_role;
  std::string base_hash;
  std::string init_hash;       // parameters the retrain started from
  std::string sft_hash;
  std::string dpo_hash;
  std::string reference_hash;
  double dpo_initial_loss = 0.0;
  double dpo_final_loss = 0.0;
  double training_flops = 0.0;   // cumulative
  double inference_flops = 0.0;  // cumulative
  bool selected = false;         // best dev accuracy of the run
  std::string config_hash;
};

// Receives artifacts as the loop produces them; every method is optional.
class ExperimentSink {
 public:
  virtual ~ExperimentSink() = default;
  virtual void checkpoint(int /*iteration*/, const std::string& /*name*/, const ModelCheckpoint& /*model*/) {}
  virtual void dataset(int /*iteration*/, const std::string& /*name*/, const corpus::Dataset& /*data*/) {}
  virtual void pairs(int /*iteration*/, const std::vector<PreferencePair>& /*pairs*/) {}
  virtual void loss_curve(int /*iteration*/, const std::string& /*name*/,
                          const std::vector<training::LossPoint>& /*curve*/) {}
  virtual void report(const IterationReport& /*report*/) {}
  virtual void log(const std::string& /*message*/) {}
  // Called as each phase starts: warm-up, dpo-sampling, dpo-training,
  // sft-sampling, retrain, evaluation.
  virtual void phase(int /*iteration*/, const std::string& /*name*/) {}
};

struct LoopData {
  corpus::Dataset labeled;    // L
  corpus::Dataset unlabeled;  // U
  corpus::Dataset dev;
  corpus::Dataset test;
};

struct LoopResult {
  std::vector<IterationReport> reports;
  ModelCheckpoint final_checkpoint;
  eval::ComputeLedger ledger;
};

// Warm-up, then per iteration the DPO step (DPO_ST only) and the SFT step,
// retraining from `base` on the grown training set. Stops after
// max_iterations or when dev accuracy stops improving. `warm_start`, when
// given, must be the result of warm-up on the same base and data and skips
// that training.
LoopResult run_loop(const ModelCheckpoint& base, const LoopData& data, const LoopConfig& cfg,
                    const Profiles& profiles, uint64_t seed, ExperimentSink* sink = nullptr,
                    const ModelCheckpoint* warm_start = nullptr, const std::string& config_hash = "");

}  // namespace dpost::selftrain
