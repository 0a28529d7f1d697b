#include "dpost/cli/config.h"

#include <fstream>
#include <limits>
#include <utility>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "dpost/common/error.h"
#include "dpost/common/hash.h"

namespace dpost::cli {
namespace {

using nlohmann::json;

class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      auto v = node->value_exact<bool>();
      if (!v) fail(key, "a boolean");
      out = *v;
    } else if constexpr (std::is_same_v<T, std::string>) {
      auto v = node->value_exact<std::string>();
      if (!v) fail(key, "a string");
      out = *v;
    } else if constexpr (std::is_same_v<T, double>) {
      if (!node->is_number()) fail(key, "a number");
      out = *node->value<double>();
    } else if constexpr (std::is_integral_v<T>) {
      auto v = node->value_exact<int64_t>();
      if (!v) fail(key, "an integer");
      if (!std::in_range<T>(*v)) fail(key, "in range");
      out = static_cast<T>(*v);
    } else if constexpr (std::is_same_v<T, std::optional<int>>) {
      auto v = node->value_exact<int64_t>();
      if (!v) fail(key, "an integer");
      out = static_cast<int>(*v);
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      const toml::array* arr = node->as_array();
      if (!arr) fail(key, "an array of integers");
      out.clear();
      for (const auto& el : *arr) {
        auto v = el.value_exact<int64_t>();
        if (!v) fail(key, "an array of integers");
        out.push_back(static_cast<int>(*v));
      }
    }
  }

  bool has(const std::string& key) const { return table_ && table_->get(key) != nullptr; }

  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      std::string key(k.str());
      if (!seen_.count(key) && !(name_.empty() && v.is_table())) {
        throw ConfigError("unknown key '" + qualified(key) + "'");
      }
    }
  }

 private:
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("'" + qualified(key) + "' must be " + what);
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_profile(Section& s, training::TrainProfile& p) {
  // A file that sets one of epochs and max_steps replaces the other.
  if (s.has("epochs") || s.has("max_steps")) {
    p.epochs.reset();
    p.max_steps.reset();
  }
  s.get("epochs", p.epochs);
  s.get("max_steps", p.max_steps);
  s.get("batch_size", p.batch_size);
  s.get("learning_rate", p.learning_rate);
  s.get("warmup_ratio", p.warmup_ratio);
  s.get("weight_decay", p.weight_decay);
  s.get("grad_clip", p.grad_clip);
  s.get("schedule", p.schedule);
}

json profile_json(const training::TrainProfile& p) {
  json j{{"batch_size", p.batch_size},     {"learning_rate", p.learning_rate}, {"warmup_ratio", p.warmup_ratio},
         {"weight_decay", p.weight_decay}, {"grad_clip", p.grad_clip},         {"schedule", p.schedule}};
  if (p.epochs) j["epochs"] = *p.epochs;
  if (p.max_steps) j["max_steps"] = *p.max_steps;
  return j;
}

template <typename F>
void checked(const std::string& section, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("[" + section + "] " + e.what());
  }
}

toml::table to_table(const json& j) {
  toml::table t;
  for (const auto& [k, v] : j.items()) {
    if (v.is_object()) {
      t.insert(k, to_table(v));
    } else if (v.is_array()) {
      toml::array a;
      for (const auto& e : v) a.push_back(e.get<int64_t>());
      t.insert(k, std::move(a));
    } else if (v.is_boolean()) {
      t.insert(k, v.get<bool>());
    } else if (v.is_number_integer()) {
      t.insert(k, v.get<int64_t>());
    } else if (v.is_number_float()) {
      t.insert(k, v.get<double>());
    } else {
      t.insert(k, v.get<std::string>());
    }
  }
  return t;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schema_version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(schema_version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (corpus.train < 1 || corpus.dev < 0 || corpus.test < 1) throw ConfigError("[corpus] sizes must be positive");
  if (corpus.dev >= corpus.train) throw ConfigError("[corpus] dev must be smaller than train");
  if (corpus.steps.min < 1 || corpus.steps.max < corpus.steps.min) {
    throw ConfigError("[corpus] need 1 <= min_steps <= max_steps");
  }
  checked("model", [&] {
    engine::ModelConfig m = model;
    m.vocab_size = 1;
    m.validate();
    if (!(m.init_std > 0.0)) throw std::invalid_argument("init_std must be positive");
  });
  checked("sft", [&] { profiles.sft.validate(); });
  checked("dpo", [&] {
    profiles.dpo.validate();
    if (!(profiles.beta > 0.0)) throw std::invalid_argument("beta must be positive");
  });
  checked("loop", [&] { loop.validate(); });
  if (eval.max_new_tokens < 1 || eval.max_batch < 1 || eval.pass_k < 1 || eval.pass_at_k_problems < 0 ||
      !(eval.temperature >= 0.0)) {
    throw ConfigError("[eval] invalid settings");
  }
  if (bench.batch_sizes.empty()) throw ConfigError("[bench] batch_sizes must not be empty");
  for (int b : bench.batch_sizes) {
    if (b < 1) throw ConfigError("[bench] batch sizes must be positive");
  }
  if (bench.calculator != "on" && bench.calculator != "off" && bench.calculator != "both") {
    throw ConfigError("[bench] calculator must be on, off or both");
  }
  if (bench.prompts < 1 || bench.runs < 1 || bench.max_new_tokens < 1) {
    throw ConfigError("[bench] prompts, runs and max_new_tokens must be positive");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["corpus"] = {{"train", corpus.train},
                 {"dev", corpus.dev},
                 {"test", corpus.test},
                 {"min_steps", corpus.steps.min},
                 {"max_steps", corpus.steps.max}};
  j["model"] = {{"d_model", model.d_model}, {"n_layers", model.n_layers}, {"n_heads", model.n_heads},
                {"d_ff", model.d_ff},       {"context", model.context},   {"init_std", model.init_std}};
  j["sft"] = profile_json(profiles.sft);
  j["dpo"] = profile_json(profiles.dpo);
  j["dpo"]["beta"] = profiles.beta;
  j["loop"] = {{"mode", selftrain::to_string(loop.mode)},
               {"iterations", loop.max_iterations},
               {"dpo_samples", loop.dpo_samples_per_question},
               {"k", loop.sft_samples_per_question},
               {"temperature", loop.temperature},
               {"dedup_threshold", loop.dedup_threshold},
               {"calculator", loop.calculator_enabled},
               {"max_new_tokens", loop.max_new_tokens},
               {"max_batch", loop.max_batch},
               {"convergence_delta", loop.convergence_delta},
               {"pass_k", loop.pass_k},
               {"pass_at_k_problems", loop.pass_at_k_problems}};
  j["eval"] = {{"calculator", eval.calculator},   {"max_new_tokens", eval.max_new_tokens},
               {"max_batch", eval.max_batch},     {"pass_k", eval.pass_k},
               {"temperature", eval.temperature}, {"pass_at_k_problems", eval.pass_at_k_problems}};
  j["bench"] = {{"batch_sizes", bench.batch_sizes},
                {"calculator", bench.calculator},
                {"prompts", bench.prompts},
                {"runs", bench.runs},
                {"max_new_tokens", bench.max_new_tokens}};
  return j;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(to_json().dump()); }

std::string ExperimentConfig::data_hash() const {
  json j = to_json();
  return fnv1a_hex(json{{"seed", j["seed"]}, {"corpus", j["corpus"]}}.dump());
}

ExperimentConfig parse_config(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "invalid TOML at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  ExperimentConfig c;
  Section top(&root, "");
  if (!root.contains("schema_version")) throw ConfigError("missing schema_version");
  top.get("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion) c.validate();
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  for (const auto& [k, v] : root) {
    static const std::set<std::string> sections{"corpus", "model", "sft", "dpo", "loop", "eval", "bench"};
    if (v.is_table() && !sections.count(std::string(k.str()))) {
      throw ConfigError("unknown section [" + std::string(k.str()) + "]");
    }
  }
  top.finish();

  Section corpus(root["corpus"].as_table(), "corpus");
  corpus.get("train", c.corpus.train);
  corpus.get("dev", c.corpus.dev);
  corpus.get("test", c.corpus.test);
  corpus.get("min_steps", c.corpus.steps.min);
  corpus.get("max_steps", c.corpus.steps.max);
  corpus.finish();

  Section model(root["model"].as_table(), "model");
  model.get("d_model", c.model.d_model);
  model.get("n_layers", c.model.n_layers);
  model.get("n_heads", c.model.n_heads);
  model.get("d_ff", c.model.d_ff);
  model.get("context", c.model.context);
  model.get("init_std", c.model.init_std);
  model.finish();

  Section sft(root["sft"].as_table(), "sft");
  read_profile(sft, c.profiles.sft);
  sft.finish();

  Section dpo(root["dpo"].as_table(), "dpo");
  read_profile(dpo, c.profiles.dpo);
  dpo.get("beta", c.profiles.beta);
  dpo.finish();

  Section loop(root["loop"].as_table(), "loop");
  std::string mode = selftrain::to_string(c.loop.mode);
  loop.get("mode", mode);
  checked("loop", [&] { c.loop.mode = selftrain::loop_mode_from_string(mode); });
  loop.get("iterations", c.loop.max_iterations);
  loop.get("dpo_samples", c.loop.dpo_samples_per_question);
  loop.get("k", c.loop.sft_samples_per_question);
  loop.get("temperature", c.loop.temperature);
  loop.get("dedup_threshold", c.loop.dedup_threshold);
  loop.get("calculator", c.loop.calculator_enabled);
  loop.get("max_new_tokens", c.loop.max_new_tokens);
  loop.get("max_batch", c.loop.max_batch);
  loop.get("convergence_delta", c.loop.convergence_delta);
  loop.get("pass_k", c.loop.pass_k);
  loop.get("pass_at_k_problems", c.loop.pass_at_k_problems);
  loop.finish();

  Section ev(root["eval"].as_table(), "eval");
  ev.get("calculator", c.eval.calculator);
  ev.get("max_new_tokens", c.eval.max_new_tokens);
  ev.get("max_batch", c.eval.max_batch);
  ev.get("pass_k", c.eval.pass_k);
  ev.get("temperature", c.eval.temperature);
  ev.get("pass_at_k_problems", c.eval.pass_at_k_problems);
  ev.finish();

  Section bench(root["bench"].as_table(), "bench");
  bench.get("batch_sizes", c.bench.batch_sizes);
  bench.get("calculator", c.bench.calculator);
  bench.get("prompts", c.bench.prompts);
  bench.get("runs", c.bench.runs);
  bench.get("max_new_tokens", c.bench.max_new_tokens);
  bench.finish();

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string to_toml(const ExperimentConfig& config) {
  std::ostringstream out;
  out << to_table(config.to_json()) << "\n";
  return out.str();
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("'" + item + "' is not an integer");
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

}  // namespace dpost::cli
