#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "symmpc/gradcheck.hpp"
#include "symmpc/layers.hpp"
#include "symmpc/ops.hpp"
#include "symmpc/optim.hpp"
#include "symmpc/rng.hpp"
#include "symmpc/selftest.hpp"

using namespace symmpc;
using namespace symmpc::diff;

namespace {

TensorPtr rnd(Rng& rng, std::vector<std::size_t> shape, double lo = -2.0, double hi = 2.0) {
  TensorPtr t = tensor(std::move(shape));
  for (double& v : t->data) v = rng.uniform(lo, hi);
  return t;
}

} // namespace

TEST(Tensor, ShapeAccessors) {
  TensorPtr m = tensor({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m->rank(), 2u);
  EXPECT_EQ(m->rows(), 2u);
  EXPECT_EQ(m->cols(), 3u);
  EXPECT_EQ(m->at(1, 2), 6.0);
  TensorPtr v = tensor({4});
  EXPECT_EQ(v->cols(), 1u);
}

TEST(Tensor, ShapeErrorNamesBothShapes) {
  TensorPtr a = tensor({2, 3});
  TensorPtr b = tensor({3, 2});
  try {
    add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3, 2]"), std::string::npos) << msg;
  }
}

TEST(Backward, SumGivesOnes) {
  TensorPtr x = param({3}, {5.0, -1.0, 2.0});
  sum_all(x)->backward();
  EXPECT_EQ(x->grad, (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Backward, SumOfSquares) {
  TensorPtr x = param({2}, {1.0, 2.0});
  sum_all(mul(x, x))->backward();
  EXPECT_DOUBLE_EQ(x->grad[0], 2.0);
  EXPECT_DOUBLE_EQ(x->grad[1], 4.0);
}

TEST(Backward, RejectsNonScalarRoot) {
  TensorPtr x = param({2}, {1.0, 2.0});
  EXPECT_THROW(add(x, x)->backward(), ShapeError);
}

TEST(Backward, DiamondGraphAccumulates) {
  // y = x + x reuses the same node twice; grad must be 2
  TensorPtr x = param({1}, {3.0});
  sum_all(add(x, x))->backward();
  EXPECT_DOUBLE_EQ(x->grad[0], 2.0);
}

TEST(Backward, RepeatedBackwardAccumulates) {
  TensorPtr x = param({1}, {2.0});
  TensorPtr loss = sum_all(mul(x, x));
  loss->backward();
  loss->backward();
  EXPECT_DOUBLE_EQ(x->grad[0], 8.0);  // 4 + 4
}

TEST(Softmax, UniformOnZeros) {
  TensorPtr s = softmax_rows(tensor({1, 3}, {0, 0, 0}));
  for (double v : s->data) EXPECT_NEAR(v, 1.0 / 3.0, 1e-12);
}

TEST(Softmax, RowsSumToOneAndNonNegative) {
  Rng rng(51);
  TensorPtr a = rnd(rng, {7, 11}, -30.0, 30.0);
  TensorPtr s = softmax_rows(a);
  for (std::size_t r = 0; r < 7; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 11; ++c) {
      EXPECT_GE(s->at(r, c), 0.0);
      sum += s->at(r, c);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Attention, SingleKeyBroadcastsV) {
  Rng rng(52);
  TensorPtr q = rnd(rng, {5, 6}), k = rnd(rng, {1, 6}), v = rnd(rng, {1, 6});
  TensorPtr o = scaled_mha(q, k, v, 3);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(o->at(i, j), v->data[j], 1e-12);
}

TEST(Attention, KvPermutationInvariant) {
  Rng rng(53);
  TensorPtr q = rnd(rng, {4, 8}), k = rnd(rng, {9, 8}), v = rnd(rng, {9, 8});
  TensorPtr base = scaled_mha(q, k, v, 4);

  std::vector<std::uint32_t> perm(9);
  for (std::uint32_t i = 0; i < 9; ++i) perm[i] = i;
  Rng(54).shuffle(perm);
  TensorPtr kp = tensor({9, 8}), vp = tensor({9, 8});
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      kp->at(i, j) = k->at(perm[i], j);
      vp->at(i, j) = v->at(perm[i], j);
    }
  TensorPtr permuted = scaled_mha(q, kp, vp, 4);
  for (std::size_t i = 0; i < base->size(); ++i)
    EXPECT_NEAR(permuted->data[i], base->data[i], 1e-9);
}

TEST(Linear, IdentityIsNoOp) {
  Rng rng(55);
  TensorPtr x = rnd(rng, {4, 3});
  TensorPtr w = tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  TensorPtr b = tensor({3}, {0, 0, 0});
  TensorPtr y = linear(x, w, b);
  EXPECT_EQ(y->data, x->data);
}

TEST(Maxpool, TiesKeepLowestRow) {
  TensorPtr a = param({2, 1}, {1.0, 1.0});
  sum_all(maxpool_rows(a))->backward();
  EXPECT_DOUBLE_EQ(a->grad[0], 1.0);
  EXPECT_DOUBLE_EQ(a->grad[1], 0.0);
}

TEST(NoGrad, SuppressesTape) {
  TensorPtr x = param({2}, {1.0, 2.0});
  NoGrad ng;
  TensorPtr y = mul(x, x);
  EXPECT_TRUE(y->parents.empty());
  EXPECT_FALSE(y->backward_fn);
  EXPECT_FALSE(y->requires_grad);
}

TEST(GradCheck, EveryOpMatchesCentralDifferences) {
  for (const auto& [name, err] : op_gradient_errors(56))
    EXPECT_LT(err, 1e-4) << "op " << name;
}

TEST(GradCheck, CompositeGraph) {
  // two dense layers, attention, then chamfer against a fixed cloud
  Rng rng(57);
  TensorPtr x = rnd(rng, {6, 3}, -1.0, 1.0);
  TensorPtr w1 = rnd(rng, {3, 8}, -0.5, 0.5), b1 = rnd(rng, {8}, -0.1, 0.1);
  TensorPtr w2 = rnd(rng, {8, 3}, -0.5, 0.5), b2 = rnd(rng, {3}, -0.1, 0.1);
  PointCloud target;
  target.points = {{0.2, 0, 0}, {-0.3, 0.4, 0}, {0, 0, 1}, {0.5, 0.5, 0.5}};

  const double err = max_grad_rel_err({x, w1, b1, w2, b2}, [&] {
    TensorPtr h = relu(linear(x, w1, b1));
    TensorPtr att = scaled_mha(h, h, h, 2);
    TensorPtr out = linear(att, w2, b2);
    return chamfer_l1_diff(out, target);
  });
  EXPECT_LT(err, 1e-4);
}

TEST(AdamW, ZeroGradZeroDecayLeavesParams) {
  TensorPtr w = param({3}, {1.0, -2.0, 3.0});
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt({w}, cfg);
  const std::vector<double> before = w->data;
  for (int i = 0; i < 5; ++i) {
    opt.zero_grad();
    opt.step();
  }
  EXPECT_EQ(w->data, before);
}

TEST(AdamW, DescendsOnSquare) {
  TensorPtr w = param({1}, {1.0});
  AdamWConfig cfg;
  cfg.lr = 2e-4;
  cfg.weight_decay = 0.0;
  AdamW opt({w}, cfg);
  opt.zero_grad();
  w->grad[0] = 2.0 * w->data[0];
  opt.step();
  EXPECT_LT(w->data[0], 1.0);
}

TEST(AdamW, QuadraticCollapsesByThreeOrders) {
  TensorPtr w = param({2}, {2.0, -1.5});
  AdamWConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.0;
  AdamW opt({w}, cfg);
  auto loss = [&] {
    return (w->data[0] - 0.3) * (w->data[0] - 0.3) + 10.0 * (w->data[1] + 0.2) * (w->data[1] + 0.2);
  };
  const double initial = loss();
  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    w->grad[0] = 2.0 * (w->data[0] - 0.3);
    w->grad[1] = 20.0 * (w->data[1] + 0.2);
    opt.step();
  }
  EXPECT_LT(loss(), 1e-3 * initial);
}

TEST(AdamW, MomentStatePersistsAcrossSteps) {
  // same gradient twice: bias-corrected update still moves the weight further
  TensorPtr w = param({1}, {0.0});
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  AdamW opt({w}, cfg);
  opt.zero_grad();
  w->grad[0] = 1.0;
  opt.step();
  const double after_one = w->data[0];
  opt.zero_grad();
  w->grad[0] = 1.0;
  opt.step();
  EXPECT_LT(w->data[0], after_one);  // keeps descending
}

TEST(Registry, DuplicateNamesRejected) {
  ParamRegistry reg;
  Rng rng(58);
  Linear a(reg, "layer", 2, 2, rng);
  EXPECT_THROW(Linear(reg, "layer", 2, 2, rng), DomainError);
  EXPECT_EQ(reg.find("layer.weight"), a.weight);
  EXPECT_EQ(reg.find("absent"), nullptr);
  EXPECT_EQ(reg.total_size(), 6u);
}

TEST(Determinism, SameSeedSameWeights) {
  ParamRegistry ra, rb;
  Rng rng_a(59), rng_b(59);
  Linear a(ra, "l", 16, 16, rng_a);
  Linear b(rb, "l", 16, 16, rng_b);
  EXPECT_EQ(a.weight->data, b.weight->data);
}
