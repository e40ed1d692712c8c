#include "symmpc/sgformer.hpp"

namespace symmpc {

using diff::TensorPtr;

UpsampleStage::UpsampleStage(diff::ParamRegistry& reg, const std::string& name,
                             const ModelConfig& cfg, std::size_t ratio, Rng& rng)
    : enc_(reg, name + ".encoder", cfg.enc_channels, cfg.knn_k, rng),
      lift_k_(reg, name + ".lift_k", {cfg.enc_channels, 2 * cfg.enc_channels, 2 * cfg.enc_channels},
              rng),
      lift_m_(reg, name + ".lift_m", {cfg.enc_channels, 2 * cfg.enc_channels, 2 * cfg.enc_channels},
              rng),
      cross_k_(reg, name + ".cross_k", 2 * cfg.enc_channels, cfg.enc_channels, cfg.heads, rng),
      self_k_(reg, name + ".self_k", 2 * cfg.enc_channels, 2 * cfg.enc_channels, cfg.heads, rng),
      cross_m_(reg, name + ".cross_m", 2 * cfg.enc_channels, cfg.enc_channels, cfg.heads, rng),
      self_m_(reg, name + ".self_m", 2 * cfg.enc_channels, 2 * cfg.enc_channels, cfg.heads, rng),
      refine1_(reg, name + ".refine1", 4 * cfg.enc_channels, 4 * cfg.enc_channels, cfg.heads, rng),
      refine2_(reg, name + ".refine2", 4 * cfg.enc_channels, 4 * cfg.enc_channels, cfg.heads, rng),
      shuffle_(reg, name + ".shuffle", {4 * cfg.enc_channels, 2 * cfg.enc_channels, 3 * ratio},
               rng),
      ratio_(ratio) {
  shuffle_.last().zero_init();  // offsets start at zero: refinement begins at its input
}

TensorPtr UpsampleStage::fuse(const TensorPtr& f_init, const TensorPtr& f_k,
                              const TensorPtr& f_m, bool use_f_k, bool use_f_m) const {
  TensorPtr xk = lift_k_(f_init);
  if (use_f_k) xk = cross_k_(xk, f_k);
  xk = self_k_(xk);

  TensorPtr xm = lift_m_(f_init);
  if (use_f_m) xm = cross_m_(xm, f_m);
  xm = self_m_(xm);

  return diff::concat_cols({xk, xm});
}

TensorPtr UpsampleStage::operator()(const TensorPtr& pts, const TensorPtr& f_k,
                                    const TensorPtr& f_m, bool use_f_k, bool use_f_m) const {
  TensorPtr fused = fuse(enc_(pts), f_k, f_m, use_f_k, use_f_m);
  TensorPtr trunk = refine2_(refine1_(fused));
  TensorPtr offsets = diff::reshape(shuffle_(trunk), {pts->rows() * ratio_, std::size_t{3}});
  return diff::add(diff::repeat_interleave_rows(pts, ratio_), offsets);
}

CompletionModel::CompletionModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  lstnet_ = std::make_unique<LSTNet>(reg_, cfg_, rng);
  stages_.reserve(cfg_.ratios.size());
  for (std::size_t s = 0; s < cfg_.ratios.size(); ++s)
    stages_.emplace_back(reg_, "sgformer.stage" + std::to_string(s + 1), cfg_, cfg_.ratios[s],
                         rng);
}

PartialMissingPair CompletionModel::make_pair(const PointCloud& partial) const {
  KeyGeometry key = lstnet_->downsample(partial);
  SymmetryTransform st = lstnet_->predict_transform(key);
  PartialMissingPair pair;
  pair.p_k = key.p_k;
  pair.f_k = key.f_local;
  pair.p_m = lstnet_->apply_transform(key, st);
  pair.f_m = stages_.front().encoder()(pair.p_m);
  pair.p_init = diff::concat_rows({pair.p_k, pair.p_m});
  return pair;
}

CompletionResult CompletionModel::complete(const PointCloud& partial) const {
  PartialMissingPair pair = make_pair(partial);
  CompletionResult res;
  res.p_m = pair.p_m;
  res.p_init = pair.p_init;
  TensorPtr pts = pair.p_init;
  for (const UpsampleStage& stage : stages_) {
    pts = stage(pts, pair.f_k, pair.f_m, cfg_.use_f_k, cfg_.use_f_m);
    res.fines.push_back(pts);
  }
  return res;
}

std::size_t count_params(const ModelConfig& cfg) {
  CompletionModel model(cfg);
  return model.params().total_size();
}

} // namespace symmpc
