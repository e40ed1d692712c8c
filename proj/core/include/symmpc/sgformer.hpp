#pragma once

#include "symmpc/encoder.hpp"
#include "symmpc/lstnet.hpp"

namespace symmpc {

struct CompletionResult {
  diff::TensorPtr p_m;                  // [n_k, 3] mirrored keys
  diff::TensorPtr p_init;               // [2*n_k, 3]
  std::vector<diff::TensorPtr> fines;   // one per stage, growing by its ratio
};

// One refinement stage: encode the incoming cloud, perceive the partial and
// mirror guidance features through two attention paths, fuse, and upsample
// by predicting r offsets per point.
class UpsampleStage {
public:
  UpsampleStage(diff::ParamRegistry& reg, const std::string& name, const ModelConfig& cfg,
                std::size_t ratio, Rng& rng);

  const PointEncoder& encoder() const { return enc_; }
  std::size_t ratio() const { return ratio_; }

  // f_init [n,e] from the encoder, guidance f_k/f_m [n_k,e]; a disabled path
  // keeps its lifted features in place of the cross-attention output
  diff::TensorPtr fuse(const diff::TensorPtr& f_init, const diff::TensorPtr& f_k,
                       const diff::TensorPtr& f_m, bool use_f_k, bool use_f_m) const;

  // full stage: pts [n,3] -> [n*ratio, 3]
  diff::TensorPtr operator()(const diff::TensorPtr& pts, const diff::TensorPtr& f_k,
                             const diff::TensorPtr& f_m, bool use_f_k, bool use_f_m) const;

private:
  PointEncoder enc_;
  diff::Mlp lift_k_, lift_m_;                      // e -> 2e -> 2e
  diff::AttentionBlock cross_k_, self_k_;          // path at 2e, guidance kv at e
  diff::AttentionBlock cross_m_, self_m_;
  diff::AttentionBlock refine1_, refine2_;         // fused trunk at 4e
  diff::Mlp shuffle_;                              // 4e -> 2e -> 3*ratio, starts at zero
  std::size_t ratio_;
};

// LSTNet plus the cascaded refinement stages.
class CompletionModel {
public:
  explicit CompletionModel(const ModelConfig& cfg);

  CompletionResult complete(const PointCloud& partial) const;
  PartialMissingPair make_pair(const PointCloud& partial) const;

  const ModelConfig& config() const { return cfg_; }
  diff::ParamRegistry& params() { return reg_; }
  const diff::ParamRegistry& params() const { return reg_; }
  LSTNet& lstnet() { return *lstnet_; }
  const std::vector<UpsampleStage>& stages() const { return stages_; }

private:
  ModelConfig cfg_;
  diff::ParamRegistry reg_;
  std::unique_ptr<LSTNet> lstnet_;
  std::vector<UpsampleStage> stages_;
};

std::size_t count_params(const ModelConfig& cfg);

} // namespace symmpc
