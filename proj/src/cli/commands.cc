#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "dpost/calc/bench.h"
#include "dpost/cli/app.h"
#include "dpost/cli/config.h"
#include "dpost/cli/workspace.h"
#include "dpost/common/error.h"
#include "dpost/common/rng.h"
#include "dpost/common/runtime.h"
#include "dpost/corpus/jsonl.h"
#include "dpost/eval/metrics.h"
#include "dpost/eval/plots.h"

namespace dpost::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> output_dir;
  bool quiet = false;
};

struct RunFlags {
  std::optional<std::string> mode;
  std::optional<int> iters;
  std::optional<int> k;
};

struct EvalFlags {
  std::string checkpoint;
  std::string split = "test";
  std::optional<int> pass_k;
  std::optional<int> problems;
  std::optional<std::string> calculator;
};

struct BenchFlags {
  std::string checkpoint;
  std::optional<std::string> batch_sizes;
  std::optional<std::string> calculator;
  std::optional<int> prompts;
  std::optional<int> runs;
};

ExperimentConfig resolve_config(const CommonFlags& common, const RunFlags& run) {
  ExperimentConfig c = common.config_path.empty() ? ExperimentConfig{} : load_config(common.config_path);
  if (common.seed) c.seed = *common.seed;
  if (common.output_dir) c.output_dir = *common.output_dir;
  if (run.mode) {
    try {
      c.loop.mode = selftrain::loop_mode_from_string(*run.mode);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (run.iters) c.loop.max_iterations = *run.iters;
  if (run.k) c.loop.sft_samples_per_question = *run.k;
  c.validate();
  return c;
}

std::string with_hash(std::string svg, const std::string& hash) {
  size_t open = svg.find("<svg");
  size_t end = open == std::string::npos ? std::string::npos : svg.find('>', open);
  std::string note = "\n<!-- config_hash=" + hash + " -->";
  if (end == std::string::npos) return note + "\n" + svg;
  svg.insert(end + 1, note);
  return svg;
}

struct Splits {
  corpus::Dataset train, dev, test;
};

Splits read_splits(const ExperimentPaths& paths, const ExperimentConfig& config) {
  const fs::path dir = paths.data();
  if (!fs::exists(dir / "manifest.json")) {
    throw DataError("no data under " + dir.string() + "; run `dpost gen-data` first");
  }
  json manifest = read_json(dir / "manifest.json");
  if (manifest.value("data_hash", "") != config.data_hash()) {
    throw DataError("data under " + dir.string() + " was generated from a different seed or corpus section");
  }
  Splits s;
  s.train = corpus::read_jsonl(dir / "train.jsonl", corpus::DatasetKind::kLabeled);
  s.dev = corpus::read_jsonl(dir / "dev.jsonl", corpus::DatasetKind::kLabeled);
  s.test = corpus::read_jsonl(dir / "test.jsonl", corpus::DatasetKind::kLabeled);
  if (s.train.empty() || s.test.empty()) throw DataError("train and test splits must not be empty");
  return s;
}

engine::ModelCheckpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) {
    throw DataError("no checkpoint at " + path.string() + "; run `dpost run` first or pass --checkpoint");
  }
  return engine::ModelCheckpoint::load(path);
}

fs::path default_checkpoint(const ExperimentPaths& paths, const ExperimentConfig& c, const std::string& flag) {
  return flag.empty() ? paths.run(c.loop.mode) / "final.ckpt" : fs::path(flag);
}

bool on_off(const std::string& value, const char* flag) {
  if (value == "on") return true;
  if (value == "off") return false;
  throw ConfigError(std::string(flag) + " must be on or off");
}

int cmd_gen_data(const ExperimentConfig& c) {
  ExperimentPaths paths = experiment_paths(c);
  DirectoryLock lock(paths.root);
  const fs::path dir = paths.data();
  const std::string hash = c.data_hash();
  if (fs::exists(dir / "manifest.json") && read_json(dir / "manifest.json").value("data_hash", "") != hash) {
    throw ConfigError(dir.string() + " holds data of another seed or corpus section; refusing to mix them");
  }
  fs::create_directories(dir);
  corpus::Dataset all = corpus::generate_synthetic(c.seed, c.corpus.train + c.corpus.test, c.corpus.steps);
  const auto begin = all.items.begin();
  const int train_only = c.corpus.train - c.corpus.dev;
  corpus::Dataset train, dev, test;
  train.items.assign(begin, begin + train_only);
  dev.items.assign(begin + train_only, begin + c.corpus.train);
  test.items.assign(begin + c.corpus.train, all.items.end());
  corpus::write_jsonl(dir / "train.jsonl", train, hash);
  corpus::write_jsonl(dir / "dev.jsonl", dev, hash);
  corpus::write_jsonl(dir / "test.jsonl", test, hash);
  write_json(dir / "manifest.json", {{"command", "gen-data"},
                                     {"config_hash", hash},
                                     {"data_hash", hash},
                                     {"seed", c.seed},
                                     {"corpus", c.to_json()["corpus"]},
                                     {"sizes", {{"train", train.size()}, {"dev", dev.size()}, {"test", test.size()}}}});
  std::cout << "wrote " << train.size() << " train, " << dev.size() << " dev, " << test.size() << " test problems to "
            << dir.string() << "\n";
  return kExitOk;
}

int cmd_run(const ExperimentConfig& c, bool quiet, std::string& phase) {
  ExperimentPaths paths = experiment_paths(c);
  DirectoryLock lock(paths.root);
  phase = "loading data";
  Splits splits = read_splits(paths, c);
  phase.clear();
  const fs::path dir = paths.run(c.loop.mode);
  const std::string hash = c.hash();
  claim_directory(dir, c, "run");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("iter_", 0) == 0) fs::remove_all(entry.path());
  }
  std::ofstream(dir / "config.toml") << to_toml(c);

  selftrain::LoopData data;
  data.labeled = splits.train;
  data.unlabeled = splits.train.unlabeled();
  data.dev = splits.dev;
  data.test = splits.test;

  engine::ModelCheckpoint base = engine::ModelCheckpoint::initialize(c.model, engine::Tokenizer::build(), c.seed);
  base.set_config_hash(hash);
  base.save(dir / "base.ckpt");

  ArtifactWriter writer(dir, hash, !quiet);
  try {
    selftrain::LoopResult result = run_loop(base, data, c.loop, c.profiles, c.seed, &writer, nullptr, hash);
    phase = "writing results";
    json reports = json::array();
    int selected = 0;
    for (const auto& r : result.reports) {
      reports.push_back(report_json(r));
      if (r.selected) selected = r.iteration;
    }
    write_json(dir / "reports.json", {{"config_hash", hash},
                                      {"mode", selftrain::to_string(c.loop.mode)},
                                      {"selected_iteration", selected},
                                      {"reports", reports}});
    json phases = json::object();
    for (const auto& [name, p] : result.ledger.phases()) {
      phases[name] = {{"inference_tokens", p.inference_tokens}, {"training_tokens", p.training_tokens}};
    }
    write_json(dir / "ledger.json", {{"config_hash", hash},
                                     {"param_count", result.ledger.param_count()},
                                     {"inference_flops", result.ledger.inference_flops()},
                                     {"training_flops", result.ledger.training_flops()},
                                     {"phases", phases}});
    engine::ModelCheckpoint final_model = result.final_checkpoint;
    final_model.set_config_hash(hash);
    final_model.save(dir / "final.ckpt");

    std::cout << "iter  accuracy  dev       |S|     |S^a|   pairs\n";
    for (const auto& r : result.reports) {
      std::cout << std::left << std::setw(6) << r.iteration << std::setw(10) << r.accuracy << std::setw(10)
                << r.dev_accuracy << std::setw(8) << r.pseudo_size << std::setw(8) << r.filtered_size << r.pairs
                << (r.selected ? "  (selected)" : "") << "\n";
    }
    std::cout << "artifacts in " << dir.string() << "\n";
  } catch (...) {
    phase = writer.current_phase();
    throw;
  }
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& c, const EvalFlags& f) {
  ExperimentPaths paths = experiment_paths(c);
  DirectoryLock lock(paths.root);
  Splits splits = read_splits(paths, c);
  const corpus::Dataset* data = nullptr;
  if (f.split == "test") {
    data = &splits.test;
  } else if (f.split == "dev") {
    data = &splits.dev;
  } else {
    throw ConfigError("--split must be test or dev");
  }
  const fs::path ckpt = default_checkpoint(paths, c, f.checkpoint);
  engine::ModelCheckpoint model = load_checkpoint(ckpt);

  eval::EvalOptions eo;
  eo.calculator_enabled = f.calculator ? on_off(*f.calculator, "--calculator") : c.eval.calculator;
  eo.max_new_tokens = c.eval.max_new_tokens;
  eo.max_batch = c.eval.max_batch;
  const int k = f.pass_k.value_or(c.eval.pass_k);
  const int problems = f.problems.value_or(c.eval.pass_at_k_problems);
  if (k < 1 || problems < 0) throw ConfigError("--pass-k must be positive and --problems non-negative");

  eval::AccuracyReport acc = eval::evaluate_greedy(model, *data, eo);
  const std::string hash = c.hash();
  json out{{"config_hash", hash},
           {"checkpoint", ckpt.string()},
           {"checkpoint_hash", model.param_hash()},
           {"role", engine::to_string(model.role())},
           {"split", f.split},
           {"problems", data->size()},
           {"calculator", eo.calculator_enabled},
           {"accuracy", acc.rate}};
  std::cout << "accuracy " << acc.rate << " on " << data->size() << " " << f.split << " problems\n";
  if (problems > 0) {
    corpus::Dataset subset = *data;
    if (subset.items.size() > static_cast<size_t>(problems)) subset.items.resize(static_cast<size_t>(problems));
    eval::PassAtKReport pk = eval::pass_at_k(model, subset, k, c.eval.temperature, c.seed, eo);
    out["pass_at_k"] = {{"k", k}, {"temperature", c.eval.temperature}, {"problems", subset.size()},
                        {"rates_by_k", pk.rates_by_k}};
    std::cout << "Pass@1 " << pk.rates_by_k.front() << ", Pass@" << k << " " << pk.rate << " on " << subset.size()
              << " problems\n";
  }
  fs::create_directories(paths.eval());
  std::string name = ckpt.parent_path().filename().string() + "_" + ckpt.stem().string() + "_" + f.split + ".json";
  write_json(paths.eval() / name, out);
  return kExitOk;
}

int cmd_bench(ExperimentConfig c, const BenchFlags& f) {
  if (f.batch_sizes) c.bench.batch_sizes = parse_int_list(*f.batch_sizes);
  if (f.calculator) c.bench.calculator = *f.calculator;
  if (f.prompts) c.bench.prompts = *f.prompts;
  if (f.runs) c.bench.runs = *f.runs;
  c.validate();
  ExperimentPaths paths = experiment_paths(c);
  DirectoryLock lock(paths.root);
  engine::ModelCheckpoint model = load_checkpoint(default_checkpoint(paths, c, f.checkpoint));

  corpus::Dataset questions;
  if (fs::exists(paths.data() / "test.jsonl")) questions = read_splits(paths, c).test;
  if (questions.size() < static_cast<size_t>(c.bench.prompts)) {
    questions = corpus::generate_synthetic(c.seed, c.bench.prompts, c.corpus.steps, "bench-");
  }
  std::vector<engine::GenerationRequest> prompts;
  for (int i = 0; i < c.bench.prompts; ++i) {
    prompts.push_back({model.tokenizer().encode_prompt(questions.items[static_cast<size_t>(i)].question),
                       stream_id({0xbe7c4ULL, static_cast<uint64_t>(i)})});
  }

  calc::BenchConfig bc;
  bc.batch_sizes = c.bench.batch_sizes;
  if (c.bench.calculator == "on") {
    bc.calculator_settings = {true};
  } else if (c.bench.calculator == "off") {
    bc.calculator_settings = {false};
  } else {
    bc.calculator_settings = {false, true};
  }
  bc.runs = c.bench.runs;
  bc.sampling.temperature = 0.0;
  bc.sampling.max_new_tokens = c.bench.max_new_tokens;
  bc.sampling.seed = c.seed;
  try {
    bc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[bench] ") + e.what());
  }
  if (prompts.size() < calc::kMinBenchPrompts) {
    throw ConfigError("[bench] prompts must be at least " + std::to_string(calc::kMinBenchPrompts));
  }
  std::vector<calc::BenchRow> rows = calc::throughput_bench(model, prompts, bc);

  const std::string hash = c.hash();
  fs::create_directories(paths.bench());
  calc::write_bench_csv(paths.bench() / "throughput.csv", rows, hash);
  std::vector<eval::Series> series;
  for (bool calc_on : bc.calculator_settings) {
    eval::Series s{calc_on ? "calculator on" : "calculator off", {}};
    for (const auto& r : rows) {
      if (r.calculator == calc_on) s.points.emplace_back(r.batch_size, r.tokens_per_sec);
    }
    series.push_back(std::move(s));
  }
  eval::write_text(paths.bench() / "throughput.svg",
                   with_hash(eval::line_chart_svg({"Decoding throughput", "batch size", "tokens / s", true}, series),
                             hash));
  std::cout << "batch  calculator  tokens/s\n";
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(7) << r.batch_size << std::setw(12) << (r.calculator ? "on" : "off")
              << std::fixed << std::setprecision(1) << r.tokens_per_sec << "\n";
  }
  std::cout << "wrote " << (paths.bench() / "throughput.csv").string() << "\n";
  return kExitOk;
}

int cmd_report(const ExperimentConfig& c) {
  ExperimentPaths paths = experiment_paths(c);
  DirectoryLock lock(paths.root);
  std::map<std::string, std::vector<selftrain::IterationReport>> runs;
  for (auto mode : {selftrain::LoopMode::kSt, selftrain::LoopMode::kDpoSt}) {
    fs::path file = paths.run(mode) / "reports.json";
    if (!fs::exists(file)) continue;
    json j = read_json(file);
    auto& list = runs[selftrain::to_string(mode)];
    for (const auto& r : j.at("reports")) list.push_back(report_from_json(r));
  }
  if (runs.empty()) throw DataError("no reports under " + paths.root.string() + "; run `dpost run` first");

  const std::string hash = c.hash();
  fs::create_directories(paths.report());
  std::vector<eval::Series> by_iteration, by_flops, filtered;
  std::vector<std::string> bar_series;
  std::vector<eval::BarGroup> bars;
  json summary{{"config_hash", hash}, {"runs", json::object()}};
  for (const auto& [mode, reports] : runs) {
    eval::Series acc{mode, {}}, flops{mode, {}}, sa{mode, {}};
    json rows = json::array();
    for (const auto& r : reports) {
      acc.points.emplace_back(r.iteration, 100.0 * r.accuracy);
      flops.points.emplace_back(r.training_flops + r.inference_flops, 100.0 * r.accuracy);
      if (r.iteration > 0) sa.points.emplace_back(r.iteration, static_cast<double>(r.filtered_size));
      rows.push_back(report_json(r));
      if (r.pass_at_1 && r.pass_at_k) {
        bars.push_back({mode + " it" + std::to_string(r.iteration) + " sft",
                        {100.0 * *r.pass_at_1, 100.0 * *r.pass_at_k}});
      }
      if (r.dpo_pass_at_1 && r.dpo_pass_at_k) {
        bars.push_back({mode + " it" + std::to_string(r.iteration) + " dpo",
                        {100.0 * *r.dpo_pass_at_1, 100.0 * *r.dpo_pass_at_k}});
      }
      if (bar_series.empty() && r.pass_k > 0) bar_series = {"Pass@1", "Pass@" + std::to_string(r.pass_k)};
    }
    summary["runs"][mode] = rows;
    by_iteration.push_back(std::move(acc));
    by_flops.push_back(std::move(flops));
    filtered.push_back(std::move(sa));
  }
  eval::write_text(paths.report() / "accuracy_vs_iteration.svg",
                   with_hash(eval::line_chart_svg({"Test accuracy per iteration", "iteration", "accuracy (%)", false},
                                                  by_iteration),
                             hash));
  eval::write_text(paths.report() / "accuracy_vs_flops.svg",
                   with_hash(eval::scatter_svg({"Accuracy against compute", "FLOPs", "accuracy (%)", true}, by_flops),
                             hash));
  eval::write_text(paths.report() / "pseudo_labels.svg",
                   with_hash(eval::line_chart_svg({"Accepted pseudo-labels |S^a|", "iteration", "count", false},
                                                  filtered),
                             hash));
  if (!bars.empty()) {
    eval::write_text(paths.report() / "pass_at_k.svg",
                     with_hash(eval::bar_chart_svg({"Pass@K on the test subset", "", "rate (%)", false}, bar_series,
                                                   bars),
                               hash));
  }
  write_json(paths.report() / "summary.json", summary);

  std::cout << "mode    iter  accuracy  |S^a|   FLOPs\n";
  for (const auto& [mode, reports] : runs) {
    for (const auto& r : reports) {
      std::cout << std::left << std::setw(8) << mode << std::setw(6) << r.iteration << std::setw(10) << r.accuracy
                << std::setw(8) << r.filtered_size << std::scientific << std::setprecision(3)
                << r.training_flops + r.inference_flops << std::defaultfloat << std::setprecision(6) << "\n";
    }
  }
  std::cout << "wrote plots to " << paths.report().string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"DPO-augmented self-training on synthetic math word problems", "dpost"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dpost schema " + std::to_string(kSchemaVersion));

  CommonFlags common;
  RunFlags run;
  EvalFlags ev;
  BenchFlags bench;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "TOML experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Override the config seed");
    sub->add_option("--output-dir", common.output_dir, "Override output_dir (relative to $DPOST_HOME)");
    sub->add_flag("-q,--quiet", common.quiet, "Only print the summary");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "Write train, dev and test splits as JSONL");
  add_common(gen);

  CLI::App* runc = app.add_subcommand("run", "Warm-up followed by ST or DPO-ST iterations");
  add_common(runc);
  runc->add_option("--mode", run.mode, "st or dpo-st")->check(CLI::IsMember({"st", "dpo-st"}));
  runc->add_option("--iters", run.iters, "Iterations after warm-up; 0 trains the warm-up model only");
  runc->add_option("--k", run.k, "Rationales sampled per question in the SFT step");

  CLI::App* evalc = app.add_subcommand("eval", "Greedy accuracy and optional Pass@K of a checkpoint");
  add_common(evalc);
  evalc->add_option("--mode", run.mode, "Run whose final checkpoint to evaluate")->check(
      CLI::IsMember({"st", "dpo-st"}));
  evalc->add_option("--checkpoint", ev.checkpoint, "Checkpoint file instead of the run's final model");
  evalc->add_option("--split", ev.split, "test or dev")->check(CLI::IsMember({"test", "dev"}));
  evalc->add_option("--pass-k", ev.pass_k, "K for Pass@K");
  evalc->add_option("--problems", ev.problems, "Problems used for Pass@K; 0 skips it");
  evalc->add_option("--calculator", ev.calculator, "on or off")->check(CLI::IsMember({"on", "off"}));

  CLI::App* benchc = app.add_subcommand("bench", "Decoding throughput against batch size");
  add_common(benchc);
  benchc->add_option("--mode", run.mode, "Run whose final checkpoint to benchmark")->check(
      CLI::IsMember({"st", "dpo-st"}));
  benchc->add_option("--checkpoint", bench.checkpoint, "Checkpoint file instead of the run's final model");
  benchc->add_option("--batch-sizes", bench.batch_sizes, "Comma-separated batch sizes");
  benchc->add_option("--calculator", bench.calculator, "on, off or both")->check(CLI::IsMember({"on", "off", "both"}));
  benchc->add_option("--prompts", bench.prompts, "Prompts decoded per timed run");
  benchc->add_option("--runs", bench.runs, "Timed runs per setting");

  CLI::App* reportc = app.add_subcommand("report", "Plots and a summary from the runs of an experiment");
  add_common(reportc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  std::string phase;
  try {
    ExperimentConfig c = resolve_config(common, run);
    if (sub == gen) return cmd_gen_data(c);
    if (sub == runc) return cmd_run(c, common.quiet, phase);
    if (sub == evalc) return cmd_eval(c, ev);
    if (sub == benchc) return cmd_bench(c, bench);
    return cmd_report(c);
  } catch (const std::exception& e) {
    std::cerr << "dpost " << name << ": ";
    if (!phase.empty()) std::cerr << "failed during " << phase << ": ";
    std::cerr << e.what() << "\n";
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const CheckpointError*>(&e) ||
        dynamic_cast<const EmptyPreferenceData*>(&e)) {
      return kExitData;
    }
    if (dynamic_cast<const DivergenceDetected*>(&e) || dynamic_cast<const NonFiniteLoss*>(&e)) {
      return kExitDivergence;
    }
    return kExitFailure;
  }
}

}  // namespace dpost::cli
