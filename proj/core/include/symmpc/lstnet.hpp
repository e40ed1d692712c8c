#pragma once

#include "symmpc/config.hpp"
#include "symmpc/layers.hpp"

namespace symmpc {

// Farthest-point-sampled skeleton of the partial input plus its features.
struct KeyGeometry {
  std::vector<std::uint32_t> indices;  // selected rows of the input cloud
  diff::TensorPtr p_k;      // [n_k, 3]
  diff::TensorPtr f_local;  // [n_k, e] post-attention features, kept for refinement guidance
  diff::TensorPtr f_k;      // [n_k, C] expanded features
  diff::TensorPtr g;        // [1, C] channel-wise max
};

// One 3x3 matrix (row-major) and one translation per key point.
struct SymmetryTransform {
  diff::TensorPtr mats;   // [n_k, 9]
  diff::TensorPtr trans;  // [n_k, 3]
};

struct PartialMissingPair {
  diff::TensorPtr p_k;     // [n_k, 3]
  diff::TensorPtr p_m;     // [n_k, 3] transformed keys
  diff::TensorPtr f_k;     // [n_k, e]
  diff::TensorPtr f_m;     // [n_k, e]
  diff::TensorPtr p_init;  // [2*n_k, 3], exactly [p_k; p_m]
};

// Downsamples the partial input to key geometries and predicts a point-wise
// affine + translation map carrying them into the missing region.
class LSTNet {
public:
  LSTNet(diff::ParamRegistry& reg, const ModelConfig& cfg, Rng& rng);

  KeyGeometry downsample(const PointCloud& input) const;
  SymmetryTransform predict_transform(const KeyGeometry& key) const;
  // p_m[i] = p_k[i] * a[i] + t[i], row-vector convention
  diff::TensorPtr apply_transform(const KeyGeometry& key, const SymmetryTransform& st) const;

private:
  std::size_t n_k_, knn_k_;
  diff::Mlp sa_mlp_;                // per-neighbor relative coords -> e
  diff::PointTransformerBlock pt_;  // refine at e channels
  diff::Mlp expand_;                // e -> C/2 -> C
  diff::Mlp affine_head_;           // 2C -> C -> C/2 -> 9
  diff::Mlp translation_head_;      // 2C -> C -> C/2 -> 3
};

} // namespace symmpc
