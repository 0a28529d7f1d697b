#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpost/corpus/synthetic.h"
#include "dpost/engine/model.h"
#include "dpost/selftrain/loop.h"

namespace dpost::cli {

inline constexpr int kSchemaVersion = 1;

struct CorpusSpec {
  int train = 2000;  // before the dev split is carved out
  int dev = 200;
  int test = 500;
  corpus::StepRange steps;
};

struct EvalSpec {
  bool calculator = true;
  int max_new_tokens = 300;
  int max_batch = 32;
  int pass_k = 10;
  double temperature = 0.7;
  int pass_at_k_problems = 0;
};

struct BenchSpec {
  std::vector<int> batch_sizes = {1, 2, 4, 8, 16, 32};
  std::string calculator = "both";  // on, off or both
  int prompts = 128;
  int runs = 3;
  int max_new_tokens = 64;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  uint64_t seed = 1;
  std::string output_dir = "experiment";
  CorpusSpec corpus;
  engine::ModelConfig model;
  selftrain::Profiles profiles;
  selftrain::LoopConfig loop;
  EvalSpec eval;
  BenchSpec bench;

  // Throws ConfigError naming the offending key.
  void validate() const;
  // Canonical form; the hash is taken over its serialization.
  nlohmann::json to_json() const;
  std::string hash() const;
  // Seed and corpus only: data written under one config can be read under
  // another that differs elsewhere.
  std::string data_hash() const;
};

// Unknown keys, wrong types and a missing or unsupported schema_version are
// ConfigErrors.
ExperimentConfig parse_config(const std::string& toml_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_toml(const ExperimentConfig& config);

std::vector<int> parse_int_list(const std::string& text);

}  // namespace dpost::cli
