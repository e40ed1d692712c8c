#pragma once

#include <cstdint>
#include <vector>

#include "symmpc/geometry.hpp"
#include "symmpc/tensor.hpp"

namespace symmpc::diff {

TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double s);

// y = x * W + b with b broadcast across rows; W is [in, out], b is [out].
TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
// a * b^T for b stored row-major as [n, k].
TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);

TensorPtr relu(const TensorPtr& a);
TensorPtr softmax_rows(const TensorPtr& a);
// softmax across each group of k consecutive rows, independently per column
TensorPtr group_softmax(const TensorPtr& a, std::size_t k);

TensorPtr maxpool_rows(const TensorPtr& a);                    // [m,c] -> [1,c]
TensorPtr group_maxpool(const TensorPtr& a, std::size_t k);    // [n*k,c] -> [n,c]
TensorPtr group_sum(const TensorPtr& a, std::size_t k);        // [n*k,c] -> [n,c]

TensorPtr concat_rows(const std::vector<TensorPtr>& parts);
TensorPtr concat_cols(const std::vector<TensorPtr>& parts);
TensorPtr slice_rows(const TensorPtr& a, std::size_t r0, std::size_t r1);
TensorPtr slice_cols(const TensorPtr& a, std::size_t c0, std::size_t c1);
TensorPtr reshape(const TensorPtr& a, std::vector<std::size_t> shape);
TensorPtr repeat_interleave_rows(const TensorPtr& a, std::size_t r);
// out row i = a row indices[i]; gradient scatter-adds back (indices may repeat)
TensorPtr gather_rows(const TensorPtr& a, std::vector<std::uint32_t> indices);

TensorPtr sum_all(const TensorPtr& a);
TensorPtr mean_all(const TensorPtr& a);

// Per-row 3x3 transform: points [n,3] as row vectors, mats [n,9] row-major;
// out_i = p_i * M_i.
TensorPtr bmv33(const TensorPtr& points, const TensorPtr& mats);

// Symmetric chamfer (mean Euclidean both ways, halved) against a fixed
// target cloud; subgradient is zero for exactly coincident pairs.
TensorPtr chamfer_l1_diff(const TensorPtr& pred, const PointCloud& target);

// Standard multi-head scaled-dot-product attention built from the ops above.
// q: [nq,c], k/v: [nk,c], heads divides c. Returns [nq,c].
TensorPtr scaled_mha(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                     std::size_t heads);

} // namespace symmpc::diff
