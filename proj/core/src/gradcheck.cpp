#include "symmpc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "symmpc/errors.hpp"

namespace symmpc::diff {

double max_grad_rel_err(const std::vector<TensorPtr>& inputs,
                        const std::function<TensorPtr()>& forward, double eps) {
  for (const TensorPtr& t : inputs) {
    t->requires_grad = true;
    t->grad.clear();
  }
  TensorPtr loss = forward();
  if (loss->size() != 1) throw ShapeError("gradcheck: forward must return a scalar");
  loss->backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const TensorPtr& t : inputs)
    analytic.push_back(t->grad.empty() ? std::vector<double>(t->size(), 0.0) : t->grad);

  double worst = 0.0;
  NoGrad ng;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor& t = *inputs[i];
    for (std::size_t j = 0; j < t.size(); ++j) {
      const double keep = t.data[j];
      t.data[j] = keep + eps;
      const double fp = forward()->data[0];
      t.data[j] = keep - eps;
      const double fm = forward()->data[0];
      t.data[j] = keep;
      const double fd = (fp - fm) / (2.0 * eps);
      const double ad = analytic[i][j];
      const double err = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

} // namespace symmpc::diff
