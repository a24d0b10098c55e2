#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "labelmend/gat.hpp"
#include "labelmend/graph.hpp"

namespace labelmend {

// Every tunable the pipeline stages expose, with the project defaults.
// File values override these; command-line flags override file values.
struct PipelineConfig {
  float bg_thresh = 0.05f;
  std::optional<float> fg_thresh;       // unset: no unlabeled band
  std::optional<double> theta;          // unset: pick from ground truth
  double target_precision = 0.97;
  double grid_min = 1e-5, grid_max = 1e-1;
  int grid_size = 40;
  std::uint32_t superpixel_count = 1000;
  float compactness = 10.f;
  int slic_iters = 10;
  EdgeSymmetrize edge_symmetrize = EdgeSymmetrize::kOr;
  std::uint32_t gat_heads = 8, gat_hidden = 8, gat_att = 8;
  double gat_lr = 5e-3, gat_weight_decay = 5e-4;
  int gat_epochs = 300, gat_patience = 50;
  double gat_init_scale = 1.0;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: logical CPU count
  bool trust_gat_everywhere = false;
  bool save_models = false;  // write per-image LMW1 checkpoints

  static PipelineConfig from_file(const std::filesystem::path& path);
  // Applies one dotted key; throws ConfigError on unknown keys or bad values.
  void apply(const std::string& key, const std::string& value);

  TrainConfig train_config(std::uint64_t image_seed) const {
    TrainConfig t;
    t.learning_rate = gat_lr;
    t.epochs = gat_epochs;
    t.weight_decay = gat_weight_decay;
    t.seed = image_seed;
    t.patience = gat_patience;
    t.init_scale = gat_init_scale;
    return t;
  }

  std::vector<double> theta_grid() const;
};

// Flat key=value reader with [section] headers and '#' comments; returns
// dotted keys in file order.
std::vector<std::pair<std::string, std::string>> read_kv_file(
    const std::filesystem::path& path);

std::uint32_t parse_u32(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_f64(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

}  // namespace labelmend
