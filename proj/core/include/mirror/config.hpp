#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mirror/baselines.hpp"
#include "mirror/corruption.hpp"
#include "mirror/inference.hpp"
#include "mirror/model.hpp"
#include "mirror/objectives.hpp"

namespace mirror {

/// Everything needed to train and evaluate one model.
struct TrainConfig {
  ModelConfig model;
  /// When set, a baseline is trained instead of the Mirror U-Net version.
  std::optional<BaselineKind> baseline;
  LossWeights weights;
  double lr = 1e-3;
  double weight_decay = 1e-6;
  int64_t batch_size = 4;
  int64_t epochs = 400;
  /// Stops after this many optimizer steps when positive.
  int64_t max_steps = 0;
  CorruptionParams corruption;
  double p_fg = 2.0 / 3.0;
  /// Seeds model initialisation, sampling and corruption.
  uint64_t seed = 0;
  /// Validation cadence in epochs; 0 keeps the final weights.
  int64_t val_every = 1;
  /// Storage-level tying audit cadence in steps; 0 disables it.
  int64_t tying_check_every = 10;
  double overlap = 0.5;
  double tau = 0.5;
  int connectivity = 26;
  LateFusion late_fusion = LateFusion::logit_sum;
  std::string train_manifest;
  std::string val_manifest;
  std::string test_manifest;
  std::string output_dir = "runs/default";

  /// Throws ConfigError on invalid combinations.
  void validate() const;
  [[nodiscard]] WindowSpec window() const { return {model.in_patch, overlap}; }
  /// "v3" or the baseline kind.
  [[nodiscard]] std::string model_name() const;
};

/// Flat key/value schema shared by config files and --key=value overrides.
struct ConfigKey {
  std::string key;
  std::string help;
};
const std::vector<ConfigKey>& config_keys();

/// Sets one key from text. Throws ConfigError for unknown keys or values
/// that do not parse.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const TrainConfig& cfg, const std::string& key);

/// Parses the TOML-style subset: `[section]` headers, `key = value` lines,
/// '#' comments, optional quotes and bracketed lists. Keys are prefixed
/// with the current section.
std::map<std::string, std::string> parse_config_text(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
/// Applies key/value pairs in order on top of `cfg`.
void apply_config(TrainConfig& cfg, const std::map<std::string, std::string>& values);

/// Round-trippable `[section]` / `key = value` rendering of every key.
std::string to_config_text(const TrainConfig& cfg);

/// Acceptance-scale defaults: 32^3 patches, halved widths, 30 epochs.
TrainConfig desk_preset();

/// Resolves a relative output path against $MIRROR_OUTPUT_ROOT when set.
std::filesystem::path resolve_output_path(const std::filesystem::path& path);

}  // namespace mirror
