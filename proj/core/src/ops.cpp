#include "symmpc/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace symmpc::diff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;

CMap mat(const Tensor& t) {
  return CMap(t.data.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}
Map gmat(Tensor& t) {
  t.ensure_grad();
  return Map(t.grad.data(), static_cast<Eigen::Index>(t.rows()),
             static_cast<Eigen::Index>(t.cols()));
}
CMap gcmat(const Tensor& t) {
  return CMap(t.grad.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

bool wants_grad(std::initializer_list<const TensorPtr*> ins) {
  if (!grad_enabled()) return false;
  for (const TensorPtr* t : ins)
    if ((*t)->requires_grad) return true;
  return false;
}

void record(const TensorPtr& out, std::vector<TensorPtr> parents,
            std::function<void(Tensor&)> fn) {
  out->requires_grad = true;
  out->parents = std::move(parents);
  out->backward_fn = std::move(fn);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) shape_mismatch(op, a, b);
}

void require_groups(const char* op, const Tensor& a, std::size_t k) {
  if (k < 1 || a.rows() % k != 0)
    throw ShapeError(std::string(op) + ": rows of " + shape_str(a.shape) +
                     " not divisible by group size " + std::to_string(k));
}

TensorPtr elementwise(const char* op, const TensorPtr& a, const TensorPtr& b,
                      double (*fwd)(double, double), double da, double db) {
  require_same_shape(op, *a, *b);
  TensorPtr out = tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = fwd(a->data[i], b->data[i]);
  if (wants_grad({&a, &b})) {
    record(out, {a, b}, [a, b, da, db](Tensor& self) {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += da * self.grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) b->grad[i] += db * self.grad[i];
      }
    });
  }
  return out;
}

} // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  return elementwise(
      "add", a, b, [](double x, double y) { return x + y; }, 1.0, 1.0);
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  return elementwise(
      "sub", a, b, [](double x, double y) { return x - y; }, 1.0, -1.0);
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape("mul", *a, *b);
  TensorPtr out = tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] * b->data[i];
  if (wants_grad({&a, &b})) {
    record(out, {a, b}, [a, b](Tensor& self) {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += b->data[i] * self.grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) b->grad[i] += a->data[i] * self.grad[i];
      }
    });
  }
  return out;
}

TensorPtr scale(const TensorPtr& a, double s) {
  TensorPtr out = tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = s * a->data[i];
  if (wants_grad({&a})) {
    record(out, {a}, [a, s](Tensor& self) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += s * self.grad[i];
    });
  }
  return out;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->cols() != b->rows()) shape_mismatch("matmul", *a, *b);
  TensorPtr out = tensor({a->rows(), b->cols()});
  Map(out->data.data(), static_cast<Eigen::Index>(a->rows()),
      static_cast<Eigen::Index>(b->cols())) = mat(*a) * mat(*b);
  if (wants_grad({&a, &b})) {
    record(out, {a, b}, [a, b](Tensor& self) {
      if (a->requires_grad) gmat(*a) += gcmat(self) * mat(*b).transpose();
      if (b->requires_grad) gmat(*b) += mat(*a).transpose() * gcmat(self);
    });
  }
  return out;
}

TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b) {
  if (a->cols() != b->cols()) shape_mismatch("matmul_nt", *a, *b);
  TensorPtr out = tensor({a->rows(), b->rows()});
  Map(out->data.data(), static_cast<Eigen::Index>(a->rows()),
      static_cast<Eigen::Index>(b->rows())) = mat(*a) * mat(*b).transpose();
  if (wants_grad({&a, &b})) {
    record(out, {a, b}, [a, b](Tensor& self) {
      if (a->requires_grad) gmat(*a) += gcmat(self) * mat(*b);
      if (b->requires_grad) gmat(*b) += gcmat(self).transpose() * mat(*a);
    });
  }
  return out;
}

TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  if (x->cols() != w->rows()) shape_mismatch("linear", *x, *w);
  if (b->size() != w->cols()) shape_mismatch("linear bias", *w, *b);
  TensorPtr out = tensor({x->rows(), w->cols()});
  Map o(out->data.data(), static_cast<Eigen::Index>(x->rows()),
        static_cast<Eigen::Index>(w->cols()));
  o = mat(*x) * mat(*w);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b->data.data(),
                                                      static_cast<Eigen::Index>(b->size()));
  if (wants_grad({&x, &w, &b})) {
    record(out, {x, w, b}, [x, w, b](Tensor& self) {
      if (x->requires_grad) gmat(*x) += gcmat(self) * mat(*w).transpose();
      if (w->requires_grad) gmat(*w) += mat(*x).transpose() * gcmat(self);
      if (b->requires_grad) {
        b->ensure_grad();
        Eigen::Map<Eigen::RowVectorXd>(b->grad.data(), static_cast<Eigen::Index>(b->size())) +=
            gcmat(self).colwise().sum();
      }
    });
  }
  return out;
}

TensorPtr relu(const TensorPtr& a) {
  TensorPtr out = tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
  if (wants_grad({&a})) {
    record(out, {a}, [a](Tensor& self) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        if (a->data[i] > 0.0) a->grad[i] += self.grad[i];
    });
  }
  return out;
}

namespace {

// softmax over contiguous strided slices; covers row-wise and grouped cases
void softmax_slices(const Tensor& in, Tensor& out, std::size_t nslices, std::size_t len,
                    std::size_t stride, std::size_t base_of_slice(std::size_t, std::size_t),
                    std::size_t ctx) {
  for (std::size_t s = 0; s < nslices; ++s) {
    const std::size_t base = base_of_slice(s, ctx);
    double mx = in.data[base];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, in.data[base + i * stride]);
    double sum = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = std::exp(in.data[base + i * stride] - mx);
      out.data[base + i * stride] = e;
      sum += e;
    }
    for (std::size_t i = 0; i < len; ++i) out.data[base + i * stride] /= sum;
  }
}

void softmax_backward_slices(const Tensor& out, const Tensor& self, Tensor& parent,
                             std::size_t nslices, std::size_t len, std::size_t stride,
                             std::size_t base_of_slice(std::size_t, std::size_t),
                             std::size_t ctx) {
  for (std::size_t s = 0; s < nslices; ++s) {
    const std::size_t base = base_of_slice(s, ctx);
    double dot = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t at = base + i * stride;
      dot += self.grad[at] * out.data[at];
    }
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t at = base + i * stride;
      parent.grad[at] += out.data[at] * (self.grad[at] - dot);
    }
  }
}

std::size_t row_base(std::size_t s, std::size_t cols) { return s * cols; }

} // namespace

TensorPtr softmax_rows(const TensorPtr& a) {
  if (a->rank() != 2) throw ShapeError("softmax_rows needs rank 2, got " + shape_str(a->shape));
  TensorPtr out = tensor(a->shape);
  softmax_slices(*a, *out, a->rows(), a->cols(), 1, row_base, a->cols());
  if (wants_grad({&a})) {
    record(out, {a}, [a](Tensor& self) {
      a->ensure_grad();
      softmax_backward_slices(self, self, *a, self.rows(), self.cols(), 1, row_base, self.cols());
    });
  }
  return out;
}

TensorPtr group_softmax(const TensorPtr& a, std::size_t k) {
  require_groups("group_softmax", *a, k);
  const std::size_t groups = a->rows() / k;
  const std::size_t c = a->cols();
  TensorPtr out = tensor(a->shape);
  // slice (g, col): elements a[g*k + i, col], i in [0, k)
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t col = 0; col < c; ++col) {
      const std::size_t base = g * k * c + col;
      double mx = a->data[base];
      for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, a->data[base + i * c]);
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        const double e = std::exp(a->data[base + i * c] - mx);
        out->data[base + i * c] = e;
        sum += e;
      }
      for (std::size_t i = 0; i < k; ++i) out->data[base + i * c] /= sum;
    }
  }
  if (wants_grad({&a})) {
    record(out, {a}, [a, k, groups, c](Tensor& self) {
      a->ensure_grad();
      for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t col = 0; col < c; ++col) {
          const std::size_t base = g * k * c + col;
          double dot = 0.0;
          for (std::size_t i = 0; i < k; ++i)
            dot += self.grad[base + i * c] * self.data[base + i * c];
          for (std::size_t i = 0; i < k; ++i)
            a->grad[base + i * c] += self.data[base + i * c] * (self.grad[base + i * c] - dot);
        }
      }
    });
  }
  return out;
}

TensorPtr maxpool_rows(const TensorPtr& a) {
  if (a->rank() != 2 || a->rows() == 0)
    throw ShapeError("maxpool_rows needs non-empty rank 2, got " + shape_str(a->shape));
  const std::size_t c = a->cols();
  TensorPtr out = tensor({std::size_t{1}, c});
  std::vector<std::uint32_t> arg(c, 0);
  for (std::size_t j = 0; j < c; ++j) {
    double best = a->at(0, j);
    for (std::size_t r = 1; r < a->rows(); ++r) {
      if (a->at(r, j) > best) {  // ties keep the lowest row
        best = a->at(r, j);
        arg[j] = static_cast<std::uint32_t>(r);
      }
    }
    out->data[j] = best;
  }
  if (wants_grad({&a})) {
    record(out, {a}, [a, arg = std::move(arg), c](Tensor& self) {
      a->ensure_grad();
      for (std::size_t j = 0; j < c; ++j) a->grad[arg[j] * c + j] += self.grad[j];
    });
  }
  return out;
}

TensorPtr group_maxpool(const TensorPtr& a, std::size_t k) {
  require_groups("group_maxpool", *a, k);
  const std::size_t groups = a->rows() / k, c = a->cols();
  TensorPtr out = tensor({groups, c});
  std::vector<std::uint32_t> arg(groups * c);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t best_r = g * k;
      double best = a->at(best_r, j);
      for (std::size_t i = 1; i < k; ++i) {
        const std::size_t r = g * k + i;
        if (a->at(r, j) > best) {
          best = a->at(r, j);
          best_r = r;
        }
      }
      out->at(g, j) = best;
      arg[g * c + j] = static_cast<std::uint32_t>(best_r);
    }
  }
  if (wants_grad({&a})) {
    record(out, {a}, [a, arg = std::move(arg), c](Tensor& self) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) a->grad[arg[i] * c + i % c] += self.grad[i];
    });
  }
  return out;
}

TensorPtr group_sum(const TensorPtr& a, std::size_t k) {
  require_groups("group_sum", *a, k);
  const std::size_t groups = a->rows() / k, c = a->cols();
  TensorPtr out = tensor({groups, c});
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < c; ++j) out->at(g, j) += a->at(g * k + i, j);
  if (wants_grad({&a})) {
    record(out, {a}, [a, k, groups, c](Tensor& self) {
      a->ensure_grad();
      for (std::size_t g = 0; g < groups; ++g)
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < c; ++j)
            a->grad[(g * k + i) * c + j] += self.grad[g * c + j];
    });
  }
  return out;
}

TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0]->cols();
  std::size_t total = 0;
  for (const TensorPtr& p : parts) {
    if (p->rank() != 2 || p->cols() != c) shape_mismatch("concat_rows", *parts[0], *p);
    total += p->rows();
  }
  TensorPtr out = tensor({total, c});
  std::size_t row = 0;
  for (const TensorPtr& p : parts) {
    std::copy(p->data.begin(), p->data.end(), out->data.begin() + static_cast<long>(row * c));
    row += p->rows();
  }
  bool any = false;
  for (const TensorPtr& p : parts) any = any || p->requires_grad;
  if (grad_enabled() && any) {
    record(out, parts, [parts, c](Tensor& self) {
      std::size_t row = 0;
      for (const TensorPtr& p : parts) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += self.grad[row * c + i];
        }
        row += p->rows();
      }
    });
  }
  return out;
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0]->rows();
  std::size_t total = 0;
  for (const TensorPtr& p : parts) {
    if (p->rank() != 2 || p->rows() != n) shape_mismatch("concat_cols", *parts[0], *p);
    total += p->cols();
  }
  TensorPtr out = tensor({n, total});
  std::size_t col = 0;
  for (const TensorPtr& p : parts) {
    for (std::size_t r = 0; r < n; ++r)
      std::copy(p->data.begin() + static_cast<long>(r * p->cols()),
                p->data.begin() + static_cast<long>((r + 1) * p->cols()),
                out->data.begin() + static_cast<long>(r * total + col));
    col += p->cols();
  }
  bool any = false;
  for (const TensorPtr& p : parts) any = any || p->requires_grad;
  if (grad_enabled() && any) {
    record(out, parts, [parts, n, total](Tensor& self) {
      std::size_t col = 0;
      for (const TensorPtr& p : parts) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t j = 0; j < p->cols(); ++j)
              p->grad[r * p->cols() + j] += self.grad[r * total + col + j];
        }
        col += p->cols();
      }
    });
  }
  return out;
}

TensorPtr slice_rows(const TensorPtr& a, std::size_t r0, std::size_t r1) {
  if (a->rank() != 2 || r0 >= r1 || r1 > a->rows())
    throw ShapeError("slice_rows [" + std::to_string(r0) + ", " + std::to_string(r1) + ") of " +
                     shape_str(a->shape));
  const std::size_t c = a->cols();
  TensorPtr out = tensor({r1 - r0, c});
  std::copy(a->data.begin() + static_cast<long>(r0 * c), a->data.begin() + static_cast<long>(r1 * c),
            out->data.begin());
  if (wants_grad({&a})) {
    record(out, {a}, [a, r0, c](Tensor& self) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) a->grad[r0 * c + i] += self.grad[i];
    });
  }
  return out;
}

TensorPtr slice_cols(const TensorPtr& a, std::size_t c0, std::size_t c1) {
  if (a->rank() != 2 || c0 >= c1 || c1 > a->cols())
    throw ShapeError("slice_cols [" + std::to_string(c0) + ", " + std::to_string(c1) + ") of " +
                     shape_str(a->shape));
  const std::size_t n = a->rows(), c = a->cols(), w = c1 - c0;
  TensorPtr out = tensor({n, w});
  for (std::size_t r = 0; r < n; ++r)
    std::copy(a->data.begin() + static_cast<long>(r * c + c0),
              a->data.begin() + static_cast<long>(r * c + c1),
              out->data.begin() + static_cast<long>(r * w));
  if (wants_grad({&a})) {
    record(out, {a}, [a, c0, c, w](Tensor& self) {
      a->ensure_grad();
      for (std::size_t r = 0; r < self.rows(); ++r)
        for (std::size_t j = 0; j < w; ++j) a->grad[r * c + c0 + j] += self.grad[r * w + j];
    });
  }
  return out;
}

TensorPtr reshape(const TensorPtr& a, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (shape.empty() || shape.size() > 2 || n != a->size())
    throw ShapeError("reshape " + shape_str(a->shape) + " to " + shape_str(shape));
  TensorPtr out = tensor(std::move(shape), a->data);
  if (wants_grad({&a})) {
    record(out, {a}, [a](Tensor& self) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i) a->grad[i] += self.grad[i];
    });
  }
  return out;
}

TensorPtr repeat_interleave_rows(const TensorPtr& a, std::size_t r) {
  if (a->rank() != 2 || r < 1)
    throw ShapeError("repeat_interleave_rows x" + std::to_string(r) + " of " +
                     shape_str(a->shape));
  const std::size_t n = a->rows(), c = a->cols();
  TensorPtr out = tensor({n * r, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t rep = 0; rep < r; ++rep)
      std::copy(a->data.begin() + static_cast<long>(i * c),
                a->data.begin() + static_cast<long>((i + 1) * c),
                out->data.begin() + static_cast<long>((i * r + rep) * c));
  if (wants_grad({&a})) {
    record(out, {a}, [a, r, n, c](Tensor& self) {
      a->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t rep = 0; rep < r; ++rep)
          for (std::size_t j = 0; j < c; ++j)
            a->grad[i * c + j] += self.grad[(i * r + rep) * c + j];
    });
  }
  return out;
}

TensorPtr gather_rows(const TensorPtr& a, std::vector<std::uint32_t> indices) {
  if (a->rank() != 2) throw ShapeError("gather_rows needs rank 2, got " + shape_str(a->shape));
  const std::size_t c = a->cols();
  for (std::uint32_t idx : indices)
    if (idx >= a->rows())
      throw SizeError("gather_rows: index " + std::to_string(idx) + " out of " +
                      std::to_string(a->rows()));
  TensorPtr out = tensor({indices.size(), c});
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy(a->data.begin() + static_cast<long>(indices[i] * c),
              a->data.begin() + static_cast<long>((indices[i] + 1) * c),
              out->data.begin() + static_cast<long>(i * c));
  if (wants_grad({&a})) {
    record(out, {a}, [a, indices = std::move(indices), c](Tensor& self) {
      a->ensure_grad();
      for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t j = 0; j < c; ++j)
          a->grad[indices[i] * c + j] += self.grad[i * c + j];
    });
  }
  return out;
}

TensorPtr sum_all(const TensorPtr& a) {
  TensorPtr out = tensor({std::size_t{1}});
  double s = 0.0;
  for (double v : a->data) s += v;
  out->data[0] = s;
  if (wants_grad({&a})) {
    record(out, {a}, [a](Tensor& self) {
      a->ensure_grad();
      for (double& g : a->grad) g += self.grad[0];
    });
  }
  return out;
}

TensorPtr mean_all(const TensorPtr& a) {
  if (a->size() == 0) throw ShapeError("mean_all of empty tensor");
  TensorPtr out = scale(sum_all(a), 1.0 / static_cast<double>(a->size()));
  return out;
}

TensorPtr bmv33(const TensorPtr& points, const TensorPtr& mats) {
  if (points->rank() != 2 || points->cols() != 3)
    throw ShapeError("bmv33 points must be [n, 3], got " + shape_str(points->shape));
  if (mats->rank() != 2 || mats->cols() != 9 || mats->rows() != points->rows())
    shape_mismatch("bmv33", *points, *mats);
  const std::size_t n = points->rows();
  // row-vector convention: out_i = p_i * M_i, so out[c] = sum_r p[r] * M[r][c]
  TensorPtr out = tensor({n, std::size_t{3}});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < 3; ++r) s += points->at(i, r) * mats->at(i, 3 * r + c);
      out->at(i, c) = s;
    }
  if (wants_grad({&points, &mats})) {
    record(out, {points, mats}, [points, mats, n](Tensor& self) {
      if (points->requires_grad) points->ensure_grad();
      if (mats->requires_grad) mats->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 3; ++c) {
          const double g = self.grad[i * 3 + c];
          for (std::size_t r = 0; r < 3; ++r) {
            if (mats->requires_grad) mats->grad[i * 9 + 3 * r + c] += g * points->at(i, r);
            if (points->requires_grad) points->grad[i * 3 + r] += g * mats->at(i, 3 * r + c);
          }
        }
    });
  }
  return out;
}

TensorPtr chamfer_l1_diff(const TensorPtr& pred, const PointCloud& target) {
  if (pred->rank() != 2 || pred->cols() != 3 || pred->rows() == 0)
    throw ShapeError("chamfer_l1_diff pred must be [n, 3], got " + shape_str(pred->shape));
  target.validate("chamfer_l1_diff target");

  PointCloud pc;
  pc.points.resize(pred->rows());
  for (std::size_t i = 0; i < pred->rows(); ++i)
    pc.points[i] = {pred->at(i, 0), pred->at(i, 1), pred->at(i, 2)};

  const std::vector<std::uint32_t> p2t = nearest_neighbor(pc, target);
  const std::vector<std::uint32_t> t2p = nearest_neighbor(target, pc);

  const double wp = 0.5 / static_cast<double>(pc.count());
  const double wt = 0.5 / static_cast<double>(target.count());
  double loss = 0.0;
  for (std::size_t i = 0; i < pc.count(); ++i)
    loss += wp * std::sqrt(squared_distance(pc.points[i], target.points[p2t[i]]));
  for (std::size_t j = 0; j < target.count(); ++j)
    loss += wt * std::sqrt(squared_distance(target.points[j], pc.points[t2p[j]]));

  TensorPtr out = tensor({std::size_t{1}}, {loss});
  if (wants_grad({&pred})) {
    record(out, {pred},
           [pred, target, pc = std::move(pc), p2t, t2p, wp, wt](Tensor& self) {
             pred->ensure_grad();
             const double g = self.grad[0];
             auto push = [&](std::size_t pi, const Vec3& q, double w) {
               const Vec3 d = pc.points[pi] - q;
               const double dist = std::sqrt(dot(d, d));
               if (dist == 0.0) return;  // subgradient at coincidence
               const double f = g * w / dist;
               for (int a = 0; a < 3; ++a) pred->grad[pi * 3 + static_cast<std::size_t>(a)] += f * d[a];
             };
             for (std::size_t i = 0; i < pc.count(); ++i) push(i, target.points[p2t[i]], wp);
             for (std::size_t j = 0; j < target.count(); ++j)
               push(t2p[j], target.points[j], wt);
           });
  }
  return out;
}

TensorPtr scaled_mha(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                     std::size_t heads) {
  if (q->cols() != k->cols() || k->shape != v->shape) shape_mismatch("scaled_mha", *q, *k);
  if (heads < 1 || q->cols() % heads != 0)
    throw ShapeError("scaled_mha: " + std::to_string(heads) + " heads do not divide " +
                     shape_str(q->shape));
  const std::size_t dh = q->cols() / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<TensorPtr> per_head;
  per_head.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    TensorPtr qh = slice_cols(q, h * dh, (h + 1) * dh);
    TensorPtr kh = slice_cols(k, h * dh, (h + 1) * dh);
    TensorPtr vh = slice_cols(v, h * dh, (h + 1) * dh);
    TensorPtr att = softmax_rows(scale(matmul_nt(qh, kh), inv));
    per_head.push_back(matmul(att, vh));
  }
  return heads == 1 ? per_head[0] : concat_cols(per_head);
}

} // namespace symmpc::diff
