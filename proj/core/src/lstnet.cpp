#include "symmpc/lstnet.hpp"

namespace symmpc {

using diff::TensorPtr;

LSTNet::LSTNet(diff::ParamRegistry& reg, const ModelConfig& cfg, Rng& rng)
    : n_k_(cfg.n_k),
      knn_k_(cfg.knn_k),
      sa_mlp_(reg, "lstnet.sa", {3, cfg.enc_channels / 2, cfg.enc_channels}, rng),
      pt_(reg, "lstnet.pt", cfg.enc_channels, cfg.knn_k, rng),
      expand_(reg, "lstnet.expand", {cfg.enc_channels, cfg.channels / 2, cfg.channels}, rng),
      affine_head_(reg, "lstnet.affine_head",
                   {2 * cfg.channels, cfg.channels, cfg.channels / 2, 9}, rng),
      translation_head_(reg, "lstnet.translation_head",
                        {2 * cfg.channels, cfg.channels, cfg.channels / 2, 3}, rng) {
  // start as a genuine mirror about the y-z plane with zero translation
  affine_head_.last().zero_init();
  affine_head_.last().bias->data = {-1, 0, 0, 0, 1, 0, 0, 0, 1};
  translation_head_.last().zero_init();
}

KeyGeometry LSTNet::downsample(const PointCloud& input) const {
  input.validate("downsample input");
  if (input.count() < n_k_)
    throw SizeError("downsample: input has " + std::to_string(input.count()) +
                    " points, need at least " + std::to_string(n_k_));

  // seed on the lexicographically smallest point so the key set survives
  // any reordering of the input
  std::uint32_t seed = 0;
  for (std::uint32_t i = 1; i < input.count(); ++i)
    if (input.points[i] < input.points[seed]) seed = i;

  KeyGeometry key;
  key.indices = fps(input, n_k_, seed);

  PointCloud keys;
  keys.points.reserve(n_k_);
  for (std::uint32_t idx : key.indices) keys.points.push_back(input.points[idx]);
  key.p_k = diff::cloud_tensor(keys);

  // set abstraction: shared MLP over each key's neighborhood in the full
  // input (relative coordinates), max-pooled per key
  const std::size_t k = std::min(knn_k_, input.count());
  const auto rings = knn(keys, input, k);
  std::vector<std::uint32_t> flat(n_k_ * k);
  for (std::size_t i = 0; i < n_k_; ++i)
    std::copy(rings[i].begin(), rings[i].end(), flat.begin() + static_cast<long>(i * k));

  TensorPtr input_t = diff::cloud_tensor(input);
  TensorPtr rel = diff::sub(diff::gather_rows(input_t, flat),
                            diff::repeat_interleave_rows(key.p_k, k));
  TensorPtr local = diff::group_maxpool(sa_mlp_(rel), k);

  key.f_local = pt_(local, key.p_k);
  key.f_k = expand_(key.f_local);
  key.g = diff::maxpool_rows(key.f_k);
  return key;
}

SymmetryTransform LSTNet::predict_transform(const KeyGeometry& key) const {
  TensorPtr g_rows = diff::repeat_interleave_rows(key.g, key.f_k->rows());
  TensorPtr joint = diff::concat_cols({key.f_k, g_rows});
  return {affine_head_(joint), translation_head_(joint)};
}

TensorPtr LSTNet::apply_transform(const KeyGeometry& key, const SymmetryTransform& st) const {
  return diff::add(diff::bmv33(key.p_k, st.mats), st.trans);
}

} // namespace symmpc
