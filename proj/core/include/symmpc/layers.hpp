#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "symmpc/ops.hpp"
#include "symmpc/rng.hpp"
#include "symmpc/tensor.hpp"

namespace symmpc::diff {

// Ordered name -> parameter map. Construction order defines checkpoint and
// optimizer order, so module constructors must be deterministic.
class ParamRegistry {
public:
  TensorPtr add(const std::string& name, TensorPtr t);
  TensorPtr find(const std::string& name) const;  // nullptr when absent
  const std::vector<std::pair<std::string, TensorPtr>>& entries() const { return entries_; }
  std::vector<TensorPtr> tensors() const;
  std::size_t total_size() const;

private:
  std::vector<std::pair<std::string, TensorPtr>> entries_;
};

// Xavier-uniform weight, zero bias.
class Linear {
public:
  Linear(ParamRegistry& reg, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  TensorPtr operator()(const TensorPtr& x) const { return linear(x, weight, bias); }
  void zero_init();  // heads that must start as the identity mapping

  TensorPtr weight, bias;
};

// Linear chain with relu between layers, none after the last.
class Mlp {
public:
  Mlp(ParamRegistry& reg, const std::string& name, const std::vector<std::size_t>& widths,
      Rng& rng);
  TensorPtr operator()(const TensorPtr& x) const;
  Linear& last() { return layers_.back(); }

private:
  std::vector<Linear> layers_;
};

// Attention + residual, then a two-layer feed-forward + residual; no
// normalization anywhere. Queries come from x [n,c], keys/values from
// y [m,y_width]. Call with y == x for self-attention.
class AttentionBlock {
public:
  AttentionBlock(ParamRegistry& reg, const std::string& name, std::size_t c, std::size_t y_width,
                 std::size_t heads, Rng& rng);
  TensorPtr operator()(const TensorPtr& x, const TensorPtr& y) const;
  TensorPtr operator()(const TensorPtr& x) const { return (*this)(x, x); }

private:
  Linear wq_, wk_, wv_, wo_, ff1_, ff2_;
  std::size_t heads_;
};

// Vector attention over a kNN graph with relative-position encoding;
// residual in and out, channel width preserved.
class PointTransformerBlock {
public:
  PointTransformerBlock(ParamRegistry& reg, const std::string& name, std::size_t c,
                        std::size_t knn_k, Rng& rng);
  // f: [n,c] features, pts: [n,3] positions (may carry gradients)
  TensorPtr operator()(const TensorPtr& f, const TensorPtr& pts) const;

private:
  Linear fc1_, to_q_, to_k_, to_v_, fc2_;
  Mlp pos_mlp_, att_mlp_;
  std::size_t knn_k_;
};

// Flattened [n,3] tensor view of a cloud and back.
TensorPtr cloud_tensor(const PointCloud& cloud);
PointCloud tensor_cloud(const Tensor& t);

} // namespace symmpc::diff
