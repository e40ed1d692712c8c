#include "symmpc/encoder.hpp"

namespace symmpc {

using diff::TensorPtr;

PointEncoder::PointEncoder(diff::ParamRegistry& reg, const std::string& name, std::size_t channels,
                           std::size_t knn_k, Rng& rng)
    : point_mlp_(reg, name + ".point", {3, channels, 2 * channels}, rng),
      fuse_mlp_(reg, name + ".fuse", {4 * channels, 2 * channels, channels}, rng),
      pt_(reg, name + ".pt", channels, knn_k, rng) {}

TensorPtr PointEncoder::operator()(const TensorPtr& pts) const {
  const std::size_t n = pts->rows();
  TensorPtr h = point_mlp_(pts);
  TensorPtr g = diff::repeat_interleave_rows(diff::maxpool_rows(h), n);
  TensorPtr f = fuse_mlp_(diff::concat_cols({h, g}));
  return pt_(f, pts);
}

} // namespace symmpc
