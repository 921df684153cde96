#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgax/error.hpp"

namespace kgax {

enum class AttentionMode { Learned, Uniform };

/// Hyperparameters and switches for one model. Every field has a flat
/// `key=value` spelling; see config_keys().
struct ModelConfig {
  std::size_t dim = 64;
  std::vector<std::size_t> layer_dims{32, 16};
  std::size_t neighbor_cap = 20;
  double lr = 1e-3;
  double l2 = 1e-5;
  double dropout = 0.1;
  std::size_t batch_size = 1024;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  double leaky_slope = 0.2;
  AttentionMode attention = AttentionMode::Learned;
  bool fusion = true;
  std::string fusion_op = "hadamard";
  bool pretrain_kg = true;
  std::size_t kg_warmup_epochs = 5;
  double kg_margin = 0.0;
  bool inverse_relations = true;
  bool alternate_kg = true;
  std::uint64_t seed = 2024;
  int precision = 32;
  std::size_t eval_threads = 1;
  bool log_elapsed = true;

  std::size_t depth() const noexcept { return layer_dims.size(); }
};

struct ConfigKey {
  std::string_view name;
  std::string_view legal;  // human-readable legal range
  std::string_view help;
  bool recorded = true;  // false for execution-only keys
};

/// All ModelConfig keys in canonical order.
std::span<const ConfigKey> config_keys();

bool is_model_config_key(std::string_view key);

/// Sets one key. Throws ConfigError naming the key and its legal range.
void set_config_value(ModelConfig& config, std::string_view key, std::string_view value);

/// Canonical value text for a key.
std::string get_config_value(const ModelConfig& config, std::string_view key);

/// Throws ConfigError when a field is out of range.
void validate(const ModelConfig& config);

/// key=value lines in canonical order; parse_model_config(to_text(c)) == c.
std::string to_text(const ModelConfig& config);
ModelConfig parse_model_config(std::string_view text);

/// to_text without execution-only keys (eval_threads). Written next to results
/// and into model files.
std::string recorded_text(const ModelConfig& config);

bool operator==(const ModelConfig& a, const ModelConfig& b);

/// Shortest round-trip decimal text for a double.
std::string format_real(double v);

/// Splits "key=value" lines, skipping blanks and '#' comments. Throws ConfigError on a
/// line without '='.
std::vector<std::pair<std::string, std::string>> split_key_values(std::string_view text,
                                                                  std::string_view source);

}  // namespace kgax
