#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dpost/engine/tokenizer.h"

namespace dpost::engine {

// Decoder-only transformer: learned token and position embeddings, pre-norm
// (RMSNorm) blocks of causal multi-head attention and a GELU MLP, a final
// norm and an untied output head.
struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int context = 512;
  double init_std = 0.02;

  int head_dim() const { return d_model / n_heads; }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr double kNormEps = 1e-5;

enum class Role { kBase, kSft, kDpo, kReference };
const char* to_string(Role role);
Role role_from_string(const std::string& name);

struct TensorSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  size_t offset = 0;
  size_t size() const { return static_cast<size_t>(rows) * static_cast<size_t>(cols); }
};

// Names, shapes and offsets of every tensor in the flat parameter vector.
// Matrices are column-major; a [out x in] weight maps inputs to outputs.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config);

  const TensorSpec& operator[](const std::string& name) const;
  const std::vector<TensorSpec>& tensors() const { return tensors_; }
  size_t total() const { return total_; }

  struct Block {
    TensorSpec norm1, wq, wk, wv, wo, norm2, w1, b1, w2, b2;
  };
  const TensorSpec& tok_emb() const { return tensors_[0]; }
  const TensorSpec& pos_emb() const { return tensors_[1]; }
  const Block& block(int layer) const { return blocks_.at(static_cast<size_t>(layer)); }
  const TensorSpec& norm_f() const { return tensors_[tensors_.size() - 3]; }
  const TensorSpec& head() const { return tensors_[tensors_.size() - 2]; }
  const TensorSpec& head_b() const { return tensors_[tensors_.size() - 1]; }

 private:
  std::vector<TensorSpec> tensors_;
  std::vector<Block> blocks_;
  size_t total_ = 0;
};

using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using MatrixMap = Eigen::Map<Eigen::MatrixXd>;

// Full model state: configuration, vocabulary, role and parameters.
class ModelCheckpoint {
 public:
  // Fresh base model with seeded Gaussian initialisation.
  static ModelCheckpoint initialize(const ModelConfig& config, Tokenizer tokenizer, uint64_t seed);

  ModelCheckpoint(ModelConfig config, Tokenizer tokenizer, Role role, std::vector<double> params);

  const ModelConfig& config() const { return config_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  const ParamLayout& layout() const { return layout_; }
  Role role() const { return role_; }
  void set_role(Role role) { role_ = role; }
  const std::string& config_hash() const { return config_hash_; }
  void set_config_hash(std::string hash) { config_hash_ = std::move(hash); }

  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }
  size_t param_count() const { return params_.size(); }

  ConstMatrixMap view(const TensorSpec& spec) const;
  MatrixMap mutable_view(const TensorSpec& spec);

  // FNV-1a over the raw parameter bytes.
  std::string param_hash() const;
  // Throws CheckpointError if any parameter is NaN or infinite.
  void check_finite() const;

  // Versioned binary container: magic, JSON header (config, vocabulary, role,
  // config hash, tensor table, parameter hash), then little-endian doubles.
  void save(const std::filesystem::path& path) const;
  static ModelCheckpoint load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  Tokenizer tokenizer_;
  ParamLayout layout_;
  Role role_ = Role::kBase;
  std::string config_hash_;
  std::vector<double> params_;
};

}  // namespace dpost::engine
