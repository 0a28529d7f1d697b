#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "dpost/cli/config.h"
#include "dpost/common/error.h"
#include "dpost/selftrain/loop.h"

namespace dpost::cli {

// $DPOST_HOME when set, otherwise ./dpost-runs.
std::filesystem::path output_root();

struct ExperimentPaths {
  std::filesystem::path root;  // <output root>/<output_dir>
  std::filesystem::path data() const { return root / "data"; }
  std::filesystem::path run(selftrain::LoopMode mode) const { return root / selftrain::to_string(mode); }
  std::filesystem::path bench() const { return root / "bench"; }
  std::filesystem::path eval() const { return root / "eval"; }
  std::filesystem::path report() const { return root / "report"; }
};

ExperimentPaths experiment_paths(const ExperimentConfig& config);

// Exclusive advisory lock on <dir>/.lock, released on destruction or process
// exit. Throws LockError when another process holds it.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

class LockError : public Error {
 public:
  using Error::Error;
};

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

// Creates `dir` with a manifest recording `config_hash`, or accepts it when
// the existing manifest carries the same hash. A different hash is a
// ConfigError.
void claim_directory(const std::filesystem::path& dir, const ExperimentConfig& config, const std::string& command);

nlohmann::json report_json(const selftrain::IterationReport& report);
selftrain::IterationReport report_from_json(const nlohmann::json& j);

// Writes every loop artifact under `dir`:
//   iter_<i>/{sft,dpo}.ckpt, {sft,dpo}_loss.csv, pairs.jsonl, pseudo.jsonl,
//   filtered.jsonl, report.json and a run log.
class ArtifactWriter : public selftrain::ExperimentSink {
 public:
  ArtifactWriter(std::filesystem::path dir, std::string config_hash, bool verbose);

  void checkpoint(int iteration, const std::string& name, const engine::ModelCheckpoint& model) override;
  void dataset(int iteration, const std::string& name, const corpus::Dataset& data) override;
  void pairs(int iteration, const std::vector<selftrain::PreferencePair>& pairs) override;
  void loss_curve(int iteration, const std::string& name, const std::vector<training::LossPoint>& curve) override;
  void report(const selftrain::IterationReport& report) override;
  void log(const std::string& message) override;
  void phase(int iteration, const std::string& name) override;

  // "<phase> (iteration <i>)" of the phase in progress.
  const std::string& current_phase() const { return phase_; }

 private:
  std::filesystem::path iteration_dir(int iteration) const;

  std::filesystem::path dir_;
  std::string hash_;
  bool verbose_;
  std::string phase_ = "setup";
};

}  // namespace dpost::cli
