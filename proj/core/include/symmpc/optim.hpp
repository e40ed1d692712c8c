#pragma once

#include <vector>

#include "symmpc/tensor.hpp"

namespace symmpc::diff {

struct AdamWConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay, bias-corrected moments. A zero-gradient step with
// zero decay leaves parameters untouched.
class AdamW {
public:
  AdamW(std::vector<TensorPtr> params, AdamWConfig cfg = {});
  void zero_grad();
  void step();
  std::size_t steps_taken() const { return t_; }

private:
  std::vector<TensorPtr> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

} // namespace symmpc::diff
