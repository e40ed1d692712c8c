#include "symmpc/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "symmpc/gradcheck.hpp"
#include "symmpc/ops.hpp"
#include "symmpc/optim.hpp"
#include "symmpc/rng.hpp"
#include "symmpc/sgformer.hpp"

namespace symmpc {

namespace {

using diff::TensorPtr;

TensorPtr rnd(Rng& rng, std::vector<std::size_t> shape, double lo = -2.0, double hi = 2.0) {
  TensorPtr t = diff::tensor(std::move(shape));
  for (double& v : t->data) v = rng.uniform(lo, hi);
  return t;
}

PointCloud rnd_cloud(Rng& rng, std::size_t n) {
  PointCloud c;
  c.points.resize(n);
  for (Vec3& p : c.points)
    p = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return c;
}

} // namespace

std::vector<std::pair<std::string, double>> op_gradient_errors(std::uint64_t seed) {
  using namespace diff;
  std::vector<std::pair<std::string, double>> report;
  Rng root(seed);

  auto run = [&](const std::string& name, const std::vector<TensorPtr>& inputs,
                 const std::function<TensorPtr()>& fwd) {
    report.emplace_back(name, max_grad_rel_err(inputs, fwd));
  };
  // fixed random cotangent so the check exercises more than a ones-vector
  auto wsum = [](const TensorPtr& y, const TensorPtr& c) { return sum_all(mul(y, c)); };

  {
    Rng r = root.fork(1);
    TensorPtr a = rnd(r, {3, 4}), b = rnd(r, {3, 4}), c = rnd(r, {3, 4});
    run("add", {a, b}, [&] { return wsum(add(a, b), c); });
    run("sub", {a, b}, [&] { return wsum(sub(a, b), c); });
    run("mul", {a, b}, [&] { return wsum(mul(a, b), c); });
    run("scale", {a}, [&] { return wsum(scale(a, -1.7), c); });
  }
  {
    Rng r = root.fork(2);
    TensorPtr x = rnd(r, {4, 3}), w = rnd(r, {3, 5}), b = rnd(r, {5}), c = rnd(r, {4, 5});
    run("linear", {x, w, b}, [&] { return wsum(linear(x, w, b), c); });
  }
  {
    Rng r = root.fork(3);
    TensorPtr a = rnd(r, {3, 4}), b = rnd(r, {4, 2}), c = rnd(r, {3, 2});
    run("matmul", {a, b}, [&] { return wsum(matmul(a, b), c); });
    TensorPtr bt = rnd(r, {5, 4}), ct = rnd(r, {3, 5});
    run("matmul_nt", {a, bt}, [&] { return wsum(matmul_nt(a, bt), ct); });
  }
  {
    Rng r = root.fork(4);
    TensorPtr a = rnd(r, {3, 4}), c = rnd(r, {3, 4});
    for (double& v : a->data) v += (v < 0.0 ? -0.1 : 0.1);  // keep clear of the relu kink
    run("relu", {a}, [&] { return wsum(relu(a), c); });
  }
  {
    Rng r = root.fork(5);
    TensorPtr a = rnd(r, {3, 5}), c = rnd(r, {3, 5});
    run("softmax_rows", {a}, [&] { return wsum(softmax_rows(a), c); });
    TensorPtr g = rnd(r, {6, 3}), cg = rnd(r, {6, 3});
    run("group_softmax", {g}, [&] { return wsum(group_softmax(g, 3), cg); });
  }
  {
    Rng r = root.fork(6);
    TensorPtr a = rnd(r, {5, 4}), c = rnd(r, {1, 4});
    for (std::size_t i = 0; i < a->size(); ++i) a->data[i] += 1e-3 * static_cast<double>(i);
    run("maxpool_rows", {a}, [&] { return wsum(maxpool_rows(a), c); });
    TensorPtr g = rnd(r, {6, 4}), cg = rnd(r, {3, 4});
    for (std::size_t i = 0; i < g->size(); ++i) g->data[i] += 1e-3 * static_cast<double>(i);
    run("group_maxpool", {g}, [&] { return wsum(group_maxpool(g, 2), cg); });
    TensorPtr s = rnd(r, {6, 4}), cs = rnd(r, {2, 4});
    run("group_sum", {s}, [&] { return wsum(group_sum(s, 3), cs); });
  }
  {
    Rng r = root.fork(7);
    TensorPtr a = rnd(r, {2, 3}), b = rnd(r, {3, 3}), c = rnd(r, {5, 3});
    run("concat_rows", {a, b}, [&] { return wsum(concat_rows({a, b}), c); });
    TensorPtr ac = rnd(r, {3, 2}), bc = rnd(r, {3, 4}), cc = rnd(r, {3, 6});
    run("concat_cols", {ac, bc}, [&] { return wsum(concat_cols({ac, bc}), cc); });
  }
  {
    Rng r = root.fork(8);
    TensorPtr a = rnd(r, {5, 3}), c = rnd(r, {3, 3});
    run("slice_rows", {a}, [&] { return wsum(slice_rows(a, 1, 4), c); });
    TensorPtr ac = rnd(r, {3, 6}), cc = rnd(r, {3, 3});
    run("slice_cols", {ac}, [&] { return wsum(slice_cols(ac, 2, 5), cc); });
    TensorPtr rr = rnd(r, {3, 4}), cr = rnd(r, {2, 6});
    run("reshape", {rr}, [&] { return wsum(reshape(rr, {2, 6}), cr); });
  }
  {
    Rng r = root.fork(9);
    TensorPtr a = rnd(r, {3, 4}), c = rnd(r, {9, 4});
    run("repeat_interleave_rows", {a}, [&] { return wsum(repeat_interleave_rows(a, 3), c); });
    TensorPtr g = rnd(r, {4, 3}), cg = rnd(r, {5, 3});
    std::vector<std::uint32_t> idx = {2, 0, 2, 3, 1};  // repeats exercise scatter-add
    run("gather_rows", {g}, [&] { return wsum(gather_rows(g, idx), cg); });
  }
  {
    Rng r = root.fork(10);
    TensorPtr a = rnd(r, {3, 4});
    run("sum_all", {a}, [&] { return sum_all(a); });
    run("mean_all", {a}, [&] { return mean_all(a); });
  }
  {
    Rng r = root.fork(11);
    TensorPtr pts = rnd(r, {4, 3}), mats = rnd(r, {4, 9}), c = rnd(r, {4, 3});
    run("bmv33", {pts, mats}, [&] { return wsum(bmv33(pts, mats), c); });
  }
  {
    Rng r = root.fork(12);
    TensorPtr pred = rnd(r, {6, 3}, -1.0, 1.0);
    const PointCloud target = rnd_cloud(r, 5);
    run("chamfer_l1_diff", {pred}, [&] { return chamfer_l1_diff(pred, target); });
  }
  {
    Rng r = root.fork(13);
    TensorPtr q = rnd(r, {4, 8}), k = rnd(r, {6, 8}), v = rnd(r, {6, 8}), c = rnd(r, {4, 8});
    run("scaled_mha", {q, k, v}, [&] { return wsum(scaled_mha(q, k, v, 2), c); });
  }
  return report;
}

bool selftest(std::ostream& out) {
  using namespace diff;
  bool all = true;
  auto check = [&](const std::string& name, bool ok) {
    out << (ok ? "ok:   " : "FAIL: ") << name << '\n';
    all = all && ok;
  };
  auto near = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };

  {
    PointCloud corners;
    corners.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    const auto picked = fps(corners, 2, 0);
    check("fps picks the far corner", picked == std::vector<std::uint32_t>({0, 3}));
  }
  {
    PointCloud q, ref;
    q.points = {{0, 0, 0}};
    ref.points = {{3, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    check("knn orders by distance", knn(q, ref, 2)[0] == std::vector<std::uint32_t>({1, 2}));
  }
  {
    PointCloud p, q, pair_a, pair_b;
    p.points = {{0, 0, 0}, {2, 0, 0}};
    q.points = {{1, 0, 0}};
    check("chamfer_l1 frozen pair", near(chamfer_l1(p, q), 1.0, 1e-15));
    pair_a.points = {{1, 0, 0}};
    pair_b.points = {{0, 0, 0}};
    check("chamfer_l2 frozen pair", near(chamfer_l2(pair_a, pair_b), 2.0, 1e-15));
    PointCloud half_hit, anchor;
    half_hit.points = {{0, 0, 0}, {1, 0, 0}};
    anchor.points = {{0, 0, 0}};
    check("f1 frozen pair", near(f1_score(half_hit, anchor, 0.01), 2.0 / 3.0, 1e-12));
  }
  {
    PointCloud p;
    p.points = {{1, 2, 3}};
    const PointCloud r = reflect_about_plane(p, {1, 0, 0});
    check("reflection through x-plane",
          near(r.points[0][0], -1.0, 0.0) && near(r.points[0][1], 2.0, 0.0) &&
              near(r.points[0][2], 3.0, 0.0));
  }
  {
    // accelerated kNN against a from-scratch sort
    Rng r(41);
    const PointCloud ref = rnd_cloud(r, 300);
    const PointCloud q = rnd_cloud(r, 100);
    const auto fast = knn(q, ref, 8);
    bool same = true;
    for (std::size_t i = 0; i < q.count() && same; ++i) {
      std::vector<std::pair<double, std::uint32_t>> order;
      for (std::uint32_t j = 0; j < ref.count(); ++j) {
        const Vec3 d = {q.points[i][0] - ref.points[j][0], q.points[i][1] - ref.points[j][1],
                        q.points[i][2] - ref.points[j][2]};
        order.emplace_back(d[0] * d[0] + d[1] * d[1] + d[2] * d[2], j);
      }
      std::sort(order.begin(), order.end());
      for (std::size_t k = 0; k < 8; ++k) same = same && fast[i][k] == order[k].second;
    }
    check("grid knn matches exhaustive search", same);
  }
  {
    Rng r(42);
    const PointCloud q = rnd_cloud(r, 40);
    PointCloud sub;
    sub.points.assign(q.points.begin(), q.points.begin() + 10);
    const PointCloud other = rnd_cloud(r, 40);
    check("metrics vanish on identical clouds",
          chamfer_l1(q, q) == 0.0 && chamfer_l2(q, q) == 0.0 && f1_score(q, q, 0.01) == 1.0 &&
              fidelity_distance(sub, q) == 0.0 && mmd(q, {other, q}) == 0.0);
  }
  {
    TensorPtr z = tensor({std::size_t{1}, std::size_t{3}}, {0.0, 0.0, 0.0});
    TensorPtr s = softmax_rows(z);
    check("softmax of zeros is uniform", near(s->data[0], 1.0 / 3.0, 1e-12) &&
                                             near(s->data[1], 1.0 / 3.0, 1e-12) &&
                                             near(s->data[2], 1.0 / 3.0, 1e-12));
  }
  {
    TensorPtr x = param({std::size_t{2}}, {1.0, 2.0});
    sum_all(mul(x, x))->backward();
    check("backward of sum(x^2)", near(x->grad[0], 2.0, 1e-15) && near(x->grad[1], 4.0, 1e-15));
  }
  {
    Rng r(43);
    TensorPtr q = rnd(r, {3, 4}), k = rnd(r, {1, 4}), v = rnd(r, {1, 4});
    TensorPtr o = scaled_mha(q, k, v, 2);
    bool bcast = true;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) bcast = bcast && near(o->at(i, j), v->data[j], 1e-12);
    check("single-key attention broadcasts v", bcast);
  }
  {
    Rng r(44);
    TensorPtr x = rnd(r, {4, 3});
    TensorPtr w = tensor({std::size_t{3}, std::size_t{3}}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    TensorPtr b = tensor({std::size_t{3}}, {0.0, 0.0, 0.0});
    TensorPtr y = linear(x, w, b);
    bool same = true;
    for (std::size_t i = 0; i < x->size(); ++i) same = same && y->data[i] == x->data[i];
    check("identity linear is a no-op", same);
  }
  {
    // convex quadratic: loss must collapse by three orders of magnitude
    TensorPtr w = param({std::size_t{2}}, {2.0, -1.5});
    AdamWConfig cfg;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.0;
    AdamW opt({w}, cfg);
    auto loss = [&] { return (w->data[0] - 0.3) * (w->data[0] - 0.3) +
                             10.0 * (w->data[1] + 0.2) * (w->data[1] + 0.2); };
    const double initial = loss();
    for (int i = 0; i < 200; ++i) {
      opt.zero_grad();
      w->grad[0] = 2.0 * (w->data[0] - 0.3);
      w->grad[1] = 20.0 * (w->data[1] + 0.2);
      opt.step();
    }
    check("adamw collapses a 2-d quadratic", loss() < 1e-3 * initial);
  }
  {
    Rng r(45);
    const Vec3 n = normalized({r.normal(), r.normal(), r.normal()});
    const PointCloud pts = rnd_cloud(r, 5);
    TensorPtr mats = tensor({std::size_t{5}, std::size_t{9}});
    for (std::size_t i = 0; i < 5; ++i)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          mats->data[i * 9 + static_cast<std::size_t>(a * 3 + b)] =
              (a == b ? 1.0 : 0.0) - 2.0 * n[a] * n[b];
    TensorPtr got = bmv33(cloud_tensor(pts), mats);
    const PointCloud want = reflect_about_plane(pts, n);
    bool same = true;
    for (std::size_t i = 0; i < 5; ++i)
      for (int a = 0; a < 3; ++a)
        same = same && near(got->at(i, static_cast<std::size_t>(a)), want.points[i][a], 1e-12);
    check("householder matrices reproduce reflection", same);
  }
  {
    ModelConfig cfg = tiny_gradcheck();
    cfg.n_k = 8;
    CompletionModel model(cfg);
    Rng r(46);
    NoGrad ng;
    const CompletionResult res = model.complete(rnd_cloud(r, 32));
    check("toy cascade counts 16/32/64",
          res.p_init->rows() == 16 && res.fines[0]->rows() == 32 && res.fines[1]->rows() == 64);
  }
  {
    double worst = 0.0;
    std::string worst_name = "-";
    for (const auto& [name, err] : op_gradient_errors(47)) {
      if (err > worst) {
        worst = err;
        worst_name = name;
      }
    }
    std::ostringstream label;
    label << "op gradients match finite differences (worst " << worst << " at " << worst_name
          << ")";
    check(label.str(), worst < 1e-4);
  }

  out << (all ? "selftest passed\n" : "selftest FAILED\n");
  return all;
}

} // namespace symmpc
