#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace bdtrack {

/// Backbone and exit-module geometry. Defaults are the desk-scale model.
struct ViTConfig {
  std::size_t depth = 8;  // L, number of transformer blocks
  std::size_t dim = 64;   // token width d
  std::size_t heads = 4;
  std::size_t patch = 8;  // P
  std::size_t channels = 3;
  std::size_t template_side = 32;
  std::size_t search_side = 64;
  std::size_t mlp_ratio = 4;
  double ln_eps = 1e-5;

  std::size_t n_enf = 3;  // blocks always executed before any exit test
  double lambda = 1.0;    // exit-score weight
  double epsilon = 0.01;  // exit threshold slack: exit once q >= 1 - epsilon
  double tau = 0.5;       // block sparsity constant
  bool deem_enabled = true;
  bool share_exit_layers = false;

  std::size_t template_grid() const { return template_side / patch; }
  std::size_t search_grid() const { return search_side / patch; }
  std::size_t template_tokens() const { return template_grid() * template_grid(); }
  std::size_t search_tokens() const { return search_grid() * search_grid(); }
  std::size_t total_tokens() const { return template_tokens() + search_tokens(); }
  std::size_t patch_values() const { return patch * patch * channels; }

  /// Throws ConfigError on any violated constraint.
  void validate() const;
};

/// Weights of the combined objective.
struct LossWeights {
  double eta_iou = 2.0;
  double eta_l1 = 5.0;
  double rho = 1e-4;
  double gamma = 1e3;

  void validate() const;
};

struct TrainConfig {
  std::size_t steps = 600;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // global-norm clip, 0 disables
  std::size_t warmup_full_depth_steps = 200;
  std::uint64_t seed = 1;

  bool mbrv = true;         // forward the blurred pair and add the blur-robustness term
  double blur_prob = 1.0;   // chance a sample's template gets a non-trivial kernel
  std::vector<std::size_t> blur_lengths{3, 5, 7};
  bool br_mean_reduction = false;

  double template_context = 2.0;
  double search_context = 4.0;
  double jitter_center = 0.25;  // fraction of the search crop side
  double jitter_scale = 0.15;   // log-uniform half width of the crop scale jitter
  std::size_t max_frame_gap = 8;  // |search frame - template frame| when sampling pairs

  void validate() const;
};

struct TrackerConfig {
  /// Penalized map is p * ((1 - w) + w * hann). 1 is a purely multiplicative penalty.
  double window_blend = 1.0;
  double min_box_side = 4.0;  // pixels
};

/// Everything a run needs, loadable from a flat `key = value` file.
struct RunConfig {
  ViTConfig model;
  LossWeights loss;
  TrainConfig train;
  TrackerConfig track;

  void validate() const;
};

/// Parses `key = value` lines; '#' starts a comment. Throws ParseError with
/// the offending line number on malformed lines or duplicate keys.
std::map<std::string, std::string> parse_key_values(std::istream& is);

/// Applies key/value overrides onto `cfg`. Unknown keys raise ConfigError.
void apply_key_values(RunConfig& cfg, const std::map<std::string, std::string>& kv);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);
std::string to_key_values(const RunConfig& cfg);

}  // namespace bdtrack
