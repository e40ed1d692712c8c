#pragma once

#include "symmpc/config.hpp"
#include "symmpc/layers.hpp"

namespace symmpc {

// Per-point feature extractor: shared MLP, channel-wise max pooled global
// context concatenated back onto every point, fuse MLP, then one vector
// attention block over the k-NN graph.
class PointEncoder {
public:
  PointEncoder(diff::ParamRegistry& reg, const std::string& name, std::size_t channels,
               std::size_t knn_k, Rng& rng);

  // pts [n,3] -> features [n, channels]; pts may carry gradients
  diff::TensorPtr operator()(const diff::TensorPtr& pts) const;

private:
  diff::Mlp point_mlp_;  // 3 -> c -> 2c
  diff::Mlp fuse_mlp_;   // 4c -> 2c -> c
  diff::PointTransformerBlock pt_;
};

} // namespace symmpc
