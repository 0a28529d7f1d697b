#include "dpost/engine/model.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "dpost/common/error.h"
#include "dpost/common/hash.h"
#include "dpost/common/rng.h"

namespace dpost::engine {
namespace {

constexpr char kMagic[8] = {'D', 'P', 'S', 'T', 'C', 'K', 'P', 'T'};
constexpr uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian hosts");

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw std::invalid_argument("vocab_size must be positive");
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || context <= 1) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw std::invalid_argument("d_model must be divisible by n_heads");
}

const char* to_string(Role role) {
  switch (role) {
    case Role::kBase: return "base";
    case Role::kSft: return "sft";
    case Role::kDpo: return "dpo";
    case Role::kReference: return "reference";
  }
  return "base";
}

Role role_from_string(const std::string& name) {
  if (name == "base") return Role::kBase;
  if (name == "sft") return Role::kSft;
  if (name == "dpo") return Role::kDpo;
  if (name == "reference") return Role::kReference;
  throw CheckpointError("unknown role '" + name + "'");
}

ParamLayout::ParamLayout(const ModelConfig& c) {
  auto add = [&](std::string name, int rows, int cols) {
    TensorSpec spec{std::move(name), rows, cols, total_};
    total_ += spec.size();
    tensors_.push_back(std::move(spec));
  };
  add("tok_emb", c.d_model, c.vocab_size);
  add("pos_emb", c.d_model, c.context);
  for (int l = 0; l < c.n_layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    add(p + "norm1", c.d_model, 1);
    add(p + "wq", c.d_model, c.d_model);
    add(p + "wk", c.d_model, c.d_model);
    add(p + "wv", c.d_model, c.d_model);
    add(p + "wo", c.d_model, c.d_model);
    add(p + "norm2", c.d_model, 1);
    add(p + "w1", c.d_ff, c.d_model);
    add(p + "b1", c.d_ff, 1);
    add(p + "w2", c.d_model, c.d_ff);
    add(p + "b2", c.d_model, 1);
  }
  add("norm_f", c.d_model, 1);
  add("head", c.vocab_size, c.d_model);
  add("head_b", c.vocab_size, 1);
  for (int l = 0; l < c.n_layers; ++l) {
    auto t = tensors_.begin() + 2 + l * 10;
    blocks_.push_back({t[0], t[1], t[2], t[3], t[4], t[5], t[6], t[7], t[8], t[9]});
  }
}

const TensorSpec& ParamLayout::operator[](const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw std::out_of_range("no tensor named " + name);
}

ModelCheckpoint::ModelCheckpoint(ModelConfig config, Tokenizer tokenizer, Role role, std::vector<double> params)
    : config_(config), tokenizer_(std::move(tokenizer)), layout_(config), role_(role), params_(std::move(params)) {
  config_.validate();
  if (static_cast<size_t>(config_.vocab_size) != tokenizer_.size()) {
    throw CheckpointError("vocab_size does not match tokenizer");
  }
  if (params_.size() != layout_.total()) throw CheckpointError("parameter vector has the wrong length");
}

ModelCheckpoint ModelCheckpoint::initialize(const ModelConfig& config_in, Tokenizer tokenizer, uint64_t seed) {
  ModelConfig config = config_in;
  config.vocab_size = static_cast<int>(tokenizer.size());
  ParamLayout layout(config);
  std::vector<double> params(layout.total(), 0.0);
  RngStream rng(seed, stream_id({tag(StreamTag::kInit)}));
  double residual_std = config.init_std / std::sqrt(2.0 * config.n_layers);
  for (const auto& t : layout.tensors()) {
    bool is_norm = t.name.ends_with("norm1") || t.name.ends_with("norm2") || t.name == "norm_f";
    bool is_bias = t.name.ends_with(".b1") || t.name.ends_with(".b2") || t.name == "head_b";
    bool is_residual_out = t.name.ends_with(".wo") || t.name.ends_with(".w2");
    for (size_t i = 0; i < t.size(); ++i) {
      double& p = params[t.offset + i];
      if (is_norm) {
        p = 1.0;
      } else if (is_bias) {
        p = 0.0;
      } else {
        p = rng.normal() * (is_residual_out ? residual_std : config.init_std);
      }
    }
  }
  return ModelCheckpoint(config, std::move(tokenizer), Role::kBase, std::move(params));
}

ConstMatrixMap ModelCheckpoint::view(const TensorSpec& spec) const {
  return ConstMatrixMap(params_.data() + spec.offset, spec.rows, spec.cols);
}

MatrixMap ModelCheckpoint::mutable_view(const TensorSpec& spec) {
  return MatrixMap(params_.data() + spec.offset, spec.rows, spec.cols);
}

std::string ModelCheckpoint::param_hash() const {
  Fnv1a h;
  h.update(std::as_bytes(std::span<const double>(params_)));
  return h.hex();
}

void ModelCheckpoint::check_finite() const {
  for (double p : params_) {
    if (!std::isfinite(p)) throw CheckpointError("non-finite parameter");
  }
}

void ModelCheckpoint::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["role"] = to_string(role_);
  header["config_hash"] = config_hash_;
  header["config"] = {{"vocab_size", config_.vocab_size}, {"d_model", config_.d_model},
                      {"n_layers", config_.n_layers},     {"n_heads", config_.n_heads},
                      {"d_ff", config_.d_ff},             {"context", config_.context},
                      {"init_std", config_.init_std}};
  header["vocabulary"] = tokenizer_.pieces();
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : layout_.tensors()) tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}});
  header["tensors"] = tensors;
  header["param_count"] = params_.size();
  header["param_hash"] = param_hash();
  std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  uint64_t header_len = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&kFormatVersion), sizeof(kFormatVersion));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(params_.data()), static_cast<std::streamsize>(params_.size() * sizeof(double)));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

ModelCheckpoint ModelCheckpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  char magic[8];
  uint32_t version = 0;
  uint64_t header_len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError(path.string() + " is not a checkpoint");
  if (version != kFormatVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  if (header_len > (1u << 26)) throw CheckpointError("checkpoint header too large");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  const auto& c = header.at("config");
  ModelConfig config;
  config.vocab_size = c.at("vocab_size");
  config.d_model = c.at("d_model");
  config.n_layers = c.at("n_layers");
  config.n_heads = c.at("n_heads");
  config.d_ff = c.at("d_ff");
  config.context = c.at("context");
  config.init_std = c.at("init_std");
  Tokenizer tokenizer(header.at("vocabulary").get<std::vector<std::string>>());
  size_t count = header.at("param_count");
  std::vector<double> params(count);
  in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw CheckpointError("truncated checkpoint " + path.string());
  ModelCheckpoint ckpt(config, std::move(tokenizer), role_from_string(header.at("role")), std::move(params));
  ckpt.set_config_hash(header.value("config_hash", ""));
  if (ckpt.param_hash() != header.at("param_hash").get<std::string>()) {
    throw CheckpointError("parameter hash mismatch in " + path.string());
  }
  return ckpt;
}

}  // namespace dpost::engine
