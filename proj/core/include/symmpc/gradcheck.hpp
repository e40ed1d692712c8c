#pragma once

#include <functional>
#include <vector>

#include "symmpc/tensor.hpp"

namespace symmpc::diff {

// Worst discrepancy between the tape gradient and a central difference over
// every coordinate of every input: |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
// `forward` must rebuild the graph from the inputs' current data and return a
// scalar. Inputs the tape never reaches count as analytic zero.
double max_grad_rel_err(const std::vector<TensorPtr>& inputs,
                        const std::function<TensorPtr()>& forward, double eps = 1e-5);

} // namespace symmpc::diff
