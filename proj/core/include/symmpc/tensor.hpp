#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "symmpc/errors.hpp"

namespace symmpc::diff {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense f64 tensor, rank 1 or 2, row-major. Nodes built while gradients are
// enabled remember their parents and a closure that scatters the incoming
// gradient back onto them.
class Tensor {
public:
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until touched by backward()

  std::vector<TensorPtr> parents;
  std::function<void(Tensor&)> backward_fn;

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }

  // Reverse sweep from this node; requires a single-element tensor.
  void backward();

  // Drops the recorded graph below this node (parents and closures).
  void detach() {
    parents.clear();
    backward_fn = nullptr;
  }
};

std::string shape_str(const std::vector<std::size_t>& shape);

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b);

TensorPtr tensor(std::vector<std::size_t> shape);
TensorPtr tensor(std::vector<std::size_t> shape, std::vector<double> data);
TensorPtr param(std::vector<std::size_t> shape, std::vector<double> data);

// Gradient recording is on by default; NoGrad suspends it for the current
// thread so inference never builds a tape.
bool grad_enabled();

class NoGrad {
public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;
};

} // namespace symmpc::diff
