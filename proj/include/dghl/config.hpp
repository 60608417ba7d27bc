#pragma once

// Run configuration: one flat `key = value` text file. Defaults are the
// published hyperparameters; a file overrides defaults and command-line flags
// override the file.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dghl/detector.hpp"
#include "dghl/generator.hpp"
#include "dghl/hierarchy.hpp"
#include "dghl/robustness.hpp"
#include "dghl/trainer.hpp"
#include "dghl/windowing.hpp"

namespace dghl {

struct RunConfig {
  // Generator architecture and windowing.
  std::size_t sub_window_len = 64;
  std::vector<std::size_t> hierarchy = {1, 4};
  std::size_t window_step = 256;
  std::size_t filter_multiplier = 32;
  std::size_t max_filters = 256;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  // Latent space and Langevin dynamics.
  std::vector<std::size_t> latent_dims = {20, 5};
  std::size_t langevin_train_steps = 25;
  std::size_t langevin_eval_steps = 500;
  double langevin_step_size = 0.001;
  double sigma_z = 0.025;

  // Optimisation.
  double learning_rate = 1e-3;
  std::size_t train_steps = 1000;
  std::size_t batch_size = 4;
  double lr_decay = 0.8;
  std::size_t n_decays = 3;
  bool masks_enabled = true;
  std::size_t checkpoint_every = 0;

  // Occlusion experiments.
  std::size_t occlusion_r = 5;
  double occlusion_p = 0.0;
  bool occlude_train = true;
  bool occlude_test = false;

  // Detection / evaluation / data.
  std::vector<std::size_t> channels;  // empty = all features
  std::size_t downsample = 1;
  std::size_t knn_k = 5;
  bool per_feature_scores = false;
  bool timing = true;
  std::size_t workers = 1;
  std::uint64_t seed = 1;

  // Paths.
  std::string train_data;
  std::string test_data;
  std::string model_dir;
  std::string output;

  /// Throws ValidationError (unknown key or malformed value).
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();
  static std::string help(const std::string& key);

  /// Checks every module invariant the configuration feeds.
  void validate() const;

  HierarchySpec hierarchy_spec() const;
  WindowingSpec windowing() const;
  GeneratorArch generator_arch(std::size_t n_features) const;
  TrainConfig train_config() const;
  DetectConfig detect_config() const;
  OcclusionSpec occlusion_spec() const;
  LangevinConfig eval_langevin() const;

  /// Every key in canonical order, one `key = value` per line.
  std::string to_text() const;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config_file(const std::string& path);
/// Applies `key = value` lines on top of `base`.
void apply_config(RunConfig& base, std::istream& in, const std::string& source);

}  // namespace dghl
