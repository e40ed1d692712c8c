#include "symmpc/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace symmpc::diff {

namespace {
thread_local int nograd_depth = 0;
}

bool grad_enabled() { return nograd_depth == 0; }
NoGrad::NoGrad() { ++nograd_depth; }
NoGrad::~NoGrad() { --nograd_depth; }

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

static std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

TensorPtr tensor(std::vector<std::size_t> shape) {
  if (shape.empty() || shape.size() > 2) throw ShapeError("tensor rank must be 1 or 2, got " + shape_str(shape));
  auto t = std::make_shared<Tensor>();
  t->data.assign(shape_size(shape), 0.0);
  t->shape = std::move(shape);
  return t;
}

TensorPtr tensor(std::vector<std::size_t> shape, std::vector<double> data) {
  if (shape.empty() || shape.size() > 2) throw ShapeError("tensor rank must be 1 or 2, got " + shape_str(shape));
  if (shape_size(shape) != data.size())
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not fill " +
                     shape_str(shape));
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->data = std::move(data);
  return t;
}

TensorPtr param(std::vector<std::size_t> shape, std::vector<double> data) {
  TensorPtr t = tensor(std::move(shape), std::move(data));
  t->requires_grad = true;
  return t;
}

void Tensor::backward() {
  if (size() != 1) throw ShapeError("backward needs a scalar, got " + shape_str(shape));

  // reverse-postorder DFS; iterative to survive deep tapes
  std::vector<Tensor*> order;
  std::unordered_set<Tensor*> seen;
  std::vector<std::pair<Tensor*, std::size_t>> stack{{this, 0}};
  seen.insert(this);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Tensor* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // interior grads are per-pass scratch; only leaves accumulate across calls
  for (Tensor* node : order)
    if (node->backward_fn) std::fill(node->grad.begin(), node->grad.end(), 0.0);

  ensure_grad();
  grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

} // namespace symmpc::diff
