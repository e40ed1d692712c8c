#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace symmpc {

// Architecture knobs. Channel widths derive from enc_channels: fusion paths
// run at 2x, the refinement trunk at 4x.
struct ModelConfig {
  std::size_t n_k = 512;          // key points kept after downsampling
  std::size_t enc_channels = 128; // base feature width
  std::size_t channels = 512;     // transform-head width
  std::size_t heads = 4;
  std::size_t knn_k = 16;
  std::vector<std::size_t> ratios = {4, 4};  // one upsampling stage per entry
  bool use_f_k = true;  // partial-feature guidance path
  bool use_f_m = true;  // mirror-feature guidance path
  std::size_t seed = 1;

  void validate() const;
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  double lr = 2e-4;
  double weight_decay = 0.01;
  std::size_t partial_points = 512;
  std::size_t gt_points = 2048;
  double val_fraction = 0.2;
  std::size_t seed = 1;

  void validate() const;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

ModelConfig paper_default();
ModelConfig toy_benchmark();
ModelConfig tiny_gradcheck();

// Flat "key = value" file with [model], [train], [guidance] sections.
// Unknown keys are rejected.
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

} // namespace symmpc
