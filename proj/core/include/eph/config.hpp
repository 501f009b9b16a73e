#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace eph {

struct EnvConfig {
  int world_size = 16;
  int field_size = 8;
  int trials = 6;
  int step_cap = 120;
  int object_count = 100;
  int train_objects = 80;
  double reward_correct = 1.0;
  double reward_wrong = -1.0;
  double reward_fixation = 0.2;
  // Re-draw which side the rewarding object appears on every trial.
  bool shuffle_sides = true;
  // Objects render as fixed random feature vectors of this width; with
  // one_hot_objects each object gets its own indicator instead.
  bool one_hot_objects = false;
  int object_code_dim = 100;
  std::uint64_t object_code_seed = 7;

  int center_index() const { return field_size / 2; }
  int left_slot() const { return center_index() - 2; }
  int right_slot() const { return center_index() + 2; }
  int symbol_count() const { return object_count + 2; }
  /// Encoded width of one cell: empty flag, fixation flag, object code.
  int cell_width() const { return 2 + (one_hot_objects ? object_count : object_code_dim); }

  bool operator==(const EnvConfig&) const = default;
};

struct ModelConfig {
  int encoder_hidden = 64;
  int encoder_out = 128;
  int hidden = 256;
  int context_dim = 32;

  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  int episodes_train = 25000;
  int episodes_test = 1000;
  double gamma = 0.9;
  double lr = 7e-4;
  double rmsprop_alpha = 0.99;
  double rmsprop_eps = 1e-5;
  double value_coef = 0.5;
  double entropy_coef_start = 0.05;
  double entropy_coef_end = 0.005;
  double grad_clip_norm = 40.0;
  std::uint64_t seed = 0;
  int filter_episodes = 100;
  int filter_keep = 30;

  bool operator==(const TrainConfig&) const = default;
};

struct AnalysisConfig {
  int r_star_window = 1000;
  int convergence_stride = 100;
  double sparse_threshold = 0.1;
  int ablation_episodes = 1000;
  std::uint64_t eval_seed = 20201;

  bool operator==(const AnalysisConfig&) const = default;
};

/// Every tunable of a run. Defaults are the reference experiment.
struct ExperimentConfig {
  EnvConfig env;
  ModelConfig model;
  TrainConfig train;
  AnalysisConfig analysis;

  bool operator==(const ExperimentConfig&) const = default;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  /// Flat `key = value` pairs, keys such as `train.gamma`.
  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;

  /// Sets one key; throws ConfigError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);

  /// Applies `EPH_<KEY>` variables, where KEY is the dotted key upper-cased
  /// with dots replaced by underscores (EPH_TRAIN_GAMMA).
  void apply_environment();

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  static std::vector<std::string> keys();
};

std::string env_variable_for(const std::string& key);

}  // namespace eph
