#include "symmpc/layers.hpp"

#include <algorithm>
#include <cmath>

namespace symmpc::diff {

TensorPtr ParamRegistry::add(const std::string& name, TensorPtr t) {
  if (find(name)) throw DomainError("duplicate parameter name: " + name);
  entries_.emplace_back(name, t);
  return t;
}

TensorPtr ParamRegistry::find(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  return nullptr;
}

std::vector<TensorPtr> ParamRegistry::tensors() const {
  std::vector<TensorPtr> out;
  out.reserve(entries_.size());
  for (const auto& [n, t] : entries_) out.push_back(t);
  return out;
}

std::size_t ParamRegistry::total_size() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t->size();
  return n;
}

Linear::Linear(ParamRegistry& reg, const std::string& name, std::size_t in, std::size_t out,
               Rng& rng) {
  if (in == 0 || out == 0) throw SizeError("linear " + name + " with zero width");
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (double& v : w) v = rng.uniform(-bound, bound);
  weight = reg.add(name + ".weight", param({in, out}, std::move(w)));
  bias = reg.add(name + ".bias", param({out}, std::vector<double>(out, 0.0)));
}

void Linear::zero_init() {
  std::fill(weight->data.begin(), weight->data.end(), 0.0);
  std::fill(bias->data.begin(), bias->data.end(), 0.0);
}

Mlp::Mlp(ParamRegistry& reg, const std::string& name, const std::vector<std::size_t>& widths,
         Rng& rng) {
  if (widths.size() < 2) throw SizeError("mlp " + name + " needs at least two widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers_.emplace_back(reg, name + ".layer" + std::to_string(i), widths[i], widths[i + 1], rng);
}

TensorPtr Mlp::operator()(const TensorPtr& x) const {
  TensorPtr h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = relu(h);
  }
  return h;
}

AttentionBlock::AttentionBlock(ParamRegistry& reg, const std::string& name, std::size_t c,
                               std::size_t y_width, std::size_t heads, Rng& rng)
    : wq_(reg, name + ".wq", c, c, rng),
      wk_(reg, name + ".wk", y_width, c, rng),
      wv_(reg, name + ".wv", y_width, c, rng),
      wo_(reg, name + ".wo", c, c, rng),
      ff1_(reg, name + ".ff1", c, 2 * c, rng),
      ff2_(reg, name + ".ff2", 2 * c, c, rng),
      heads_(heads) {
  if (heads == 0 || c % heads != 0)
    throw SizeError("attention " + name + ": heads must divide channels");
}

TensorPtr AttentionBlock::operator()(const TensorPtr& x, const TensorPtr& y) const {
  TensorPtr att = scaled_mha(wq_(x), wk_(y), wv_(y), heads_);
  TensorPtr h = add(x, wo_(att));
  return add(h, ff2_(relu(ff1_(h))));
}

PointTransformerBlock::PointTransformerBlock(ParamRegistry& reg, const std::string& name,
                                             std::size_t c, std::size_t knn_k, Rng& rng)
    : fc1_(reg, name + ".fc1", c, c, rng),
      to_q_(reg, name + ".to_q", c, c, rng),
      to_k_(reg, name + ".to_k", c, c, rng),
      to_v_(reg, name + ".to_v", c, c, rng),
      fc2_(reg, name + ".fc2", c, c, rng),
      pos_mlp_(reg, name + ".pos", {3, c, c}, rng),
      att_mlp_(reg, name + ".att", {c, c, c}, rng),
      knn_k_(knn_k) {
  if (knn_k == 0) throw SizeError("point transformer " + name + ": knn_k must be positive");
}

TensorPtr PointTransformerBlock::operator()(const TensorPtr& f, const TensorPtr& pts) const {
  if (f->rows() != pts->rows() || pts->cols() != 3)
    shape_mismatch("point transformer input", *f, *pts);
  const std::size_t n = f->rows();
  const std::size_t k = std::min(knn_k_, n);

  const PointCloud cloud = tensor_cloud(*pts);
  const auto rings = knn(cloud, cloud, k);
  std::vector<std::uint32_t> flat(n * k);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(rings[i].begin(), rings[i].end(), flat.begin() + static_cast<long>(i * k));

  TensorPtr h = fc1_(f);
  TensorPtr qi = repeat_interleave_rows(to_q_(h), k);
  TensorPtr kj = gather_rows(to_k_(h), flat);
  TensorPtr vj = gather_rows(to_v_(h), flat);

  TensorPtr rel = sub(repeat_interleave_rows(pts, k), gather_rows(pts, flat));
  TensorPtr delta = pos_mlp_(rel);

  TensorPtr w = group_softmax(att_mlp_(add(sub(qi, kj), delta)), k);
  TensorPtr pooled = group_sum(mul(w, add(vj, delta)), k);
  return add(f, fc2_(pooled));
}

TensorPtr cloud_tensor(const PointCloud& cloud) {
  std::vector<double> flat(cloud.count() * 3);
  for (std::size_t i = 0; i < cloud.count(); ++i)
    for (int a = 0; a < 3; ++a) flat[i * 3 + static_cast<std::size_t>(a)] = cloud.points[i][a];
  return tensor({cloud.count(), std::size_t{3}}, std::move(flat));
}

PointCloud tensor_cloud(const Tensor& t) {
  if (t.rank() != 2 || t.cols() != 3)
    throw ShapeError("tensor_cloud needs [n, 3], got " + shape_str(t.shape));
  PointCloud cloud;
  cloud.points.resize(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i)
    cloud.points[i] = {t.at(i, 0), t.at(i, 1), t.at(i, 2)};
  return cloud;
}

} // namespace symmpc::diff
