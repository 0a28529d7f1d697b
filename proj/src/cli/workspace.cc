#include "dpost/cli/workspace.h"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dpost/corpus/jsonl.h"
#include "dpost/training/optimizer.h"

namespace dpost::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path output_root() {
  const char* home = std::getenv("DPOST_HOME");
  if (home && *home) return fs::path(home);
  return fs::path("dpost-runs");
}

ExperimentPaths experiment_paths(const ExperimentConfig& config) {
  fs::path dir(config.output_dir);
  return {dir.is_absolute() ? dir : output_root() / dir};
}

DirectoryLock::DirectoryLock(const fs::path& dir) {
  fs::create_directories(dir);
  fs::path path = dir / ".lock";
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw LockError("cannot open lock file " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw LockError("another dpost command is using " + dir.string());
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << value.dump(2) << "\n";
}

void claim_directory(const fs::path& dir, const ExperimentConfig& config, const std::string& command) {
  const fs::path manifest = dir / "manifest.json";
  const std::string hash = config.hash();
  if (fs::exists(manifest)) {
    json existing = read_json(manifest);
    std::string theirs = existing.value("config_hash", "");
    if (theirs != hash) {
      throw ConfigError(dir.string() + " holds artifacts of config " + theirs + ", not " + hash +
                        "; refusing to mix them (use another output_dir or remove the directory)");
    }
  }
  fs::create_directories(dir);
  write_json(manifest, {{"command", command},
                        {"config_hash", hash},
                        {"data_hash", config.data_hash()},
                        {"seed", config.seed},
                        {"config", config.to_json()}});
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

json report_json(const selftrain::IterationReport& r) {
  return {{"iteration", r.iteration},
          {"mode", selftrain::to_string(r.mode)},
          {"accuracy", r.accuracy},
          {"dev_accuracy", r.dev_accuracy},
          {"pass_at_1", optional_json(r.pass_at_1)},
          {"pass_at_k", optional_json(r.pass_at_k)},
          {"dpo_pass_at_1", optional_json(r.dpo_pass_at_1)},
          {"dpo_pass_at_k", optional_json(r.dpo_pass_at_k)},
          {"pass_k", r.pass_k},
          {"pairs", r.pairs},
          {"dpo_skipped", r.dpo_skipped},
          {"pseudo_size", r.pseudo_size},
          {"filtered_size", r.filtered_size},
          {"training_size", r.training_size},
          {"generator_role", r.generator_role},
          {"base_hash", r.base_hash},
          {"init_hash", r.init_hash},
          {"sft_hash", r.sft_hash},
          {"dpo_hash", r.dpo_hash},
          {"reference_hash", r.reference_hash},
          {"dpo_initial_loss", r.dpo_initial_loss},
          {"dpo_final_loss", r.dpo_final_loss},
          {"training_flops", r.training_flops},
          {"inference_flops", r.inference_flops},
          {"selected", r.selected},
          {"config_hash", r.config_hash}};
}

selftrain::IterationReport report_from_json(const json& j) {
  try {
    selftrain::IterationReport r;
    r.iteration = j.at("iteration").get<int>();
    r.mode = selftrain::loop_mode_from_string(j.at("mode").get<std::string>());
    r.accuracy = j.at("accuracy").get<double>();
    r.dev_accuracy = j.at("dev_accuracy").get<double>();
    r.pass_at_1 = optional_from(j, "pass_at_1");
    r.pass_at_k = optional_from(j, "pass_at_k");
    r.dpo_pass_at_1 = optional_from(j, "dpo_pass_at_1");
    r.dpo_pass_at_k = optional_from(j, "dpo_pass_at_k");
    r.pass_k = j.value("pass_k", 0);
    r.pairs = j.value("pairs", size_t{0});
    r.dpo_skipped = j.value("dpo_skipped", false);
    r.pseudo_size = j.value("pseudo_size", size_t{0});
    r.filtered_size = j.value("filtered_size", size_t{0});
    r.training_size = j.value("training_size", size_t{0});
    r.generator_role = j.value("generator_role", "");
    r.base_hash = j.value("base_hash", "");
    r.init_hash = j.value("init_hash", "");
    r.sft_hash = j.value("sft_hash", "");
    r.dpo_hash = j.value("dpo_hash", "");
    r.reference_hash = j.value("reference_hash", "");
    r.dpo_initial_loss = j.value("dpo_initial_loss", 0.0);
    r.dpo_final_loss = j.value("dpo_final_loss", 0.0);
    r.training_flops = j.value("training_flops", 0.0);
    r.inference_flops = j.value("inference_flops", 0.0);
    r.selected = j.value("selected", false);
    r.config_hash = j.value("config_hash", "");
    return r;
  } catch (const std::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

ArtifactWriter::ArtifactWriter(fs::path dir, std::string config_hash, bool verbose)
    : dir_(std::move(dir)), hash_(std::move(config_hash)), verbose_(verbose) {
  fs::create_directories(dir_);
  std::ofstream(dir_ / "run.log", std::ios::trunc);
}

fs::path ArtifactWriter::iteration_dir(int iteration) const {
  fs::path d = dir_ / ("iter_" + std::to_string(iteration));
  fs::create_directories(d);
  return d;
}

void ArtifactWriter::checkpoint(int iteration, const std::string& name, const engine::ModelCheckpoint& model) {
  engine::ModelCheckpoint copy = model;
  copy.set_config_hash(hash_);
  copy.save(iteration_dir(iteration) / (name + ".ckpt"));
}

void ArtifactWriter::dataset(int iteration, const std::string& name, const corpus::Dataset& data) {
  corpus::write_jsonl(iteration_dir(iteration) / (name + ".jsonl"), data, hash_);
}

void ArtifactWriter::pairs(int iteration, const std::vector<selftrain::PreferencePair>& pairs) {
  std::ofstream out(iteration_dir(iteration) / "pairs.jsonl", std::ios::binary);
  for (const auto& p : pairs) {
    out << json{{"question_id", p.question_id},
                {"question", p.question},
                {"answer", p.gold_answer},
                {"winning", p.winning.text},
                {"losing", p.losing.text},
                {"config_hash", hash_}}
               .dump()
        << "\n";
  }
  if (!out) throw DataError("cannot write preference pairs under " + dir_.string());
}

void ArtifactWriter::loss_curve(int iteration, const std::string& name, const std::vector<training::LossPoint>& curve) {
  training::write_loss_curve(iteration_dir(iteration) / (name + "_loss.csv"), curve, hash_);
}

void ArtifactWriter::report(const selftrain::IterationReport& report) {
  write_json(iteration_dir(report.iteration) / "report.json", report_json(report));
  std::ostringstream line;
  line << "iteration " << report.iteration << ": accuracy " << report.accuracy << ", dev " << report.dev_accuracy;
  if (report.iteration > 0) line << ", |S| " << report.pseudo_size << ", |S^a| " << report.filtered_size;
  if (report.pairs > 0) line << ", pairs " << report.pairs;
  log(line.str());
}

void ArtifactWriter::log(const std::string& message) {
  std::ofstream(dir_ / "run.log", std::ios::app) << message << "\n";
  if (verbose_) std::cerr << message << std::endl;
}

void ArtifactWriter::phase(int iteration, const std::string& name) {
  phase_ = name + " (iteration " + std::to_string(iteration) + ")";
  log("start " + phase_);
}

}  // namespace dpost::cli
