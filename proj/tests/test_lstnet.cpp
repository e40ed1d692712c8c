#include "symmpc/lstnet.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "symmpc/gradcheck.hpp"
#include "symmpc/ops.hpp"
#include "symmpc/sgformer.hpp"

using namespace symmpc;
using diff::TensorPtr;

namespace {

PointCloud random_cloud(Rng& rng, std::size_t n) {
  PointCloud c;
  c.points.resize(n);
  for (Vec3& p : c.points)
    p = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return c;
}

ModelConfig tiny(std::size_t n_k) {
  ModelConfig cfg = tiny_gradcheck();
  cfg.n_k = n_k;
  return cfg;
}

} // namespace

TEST(Downsample, ExactCountIsPermutation) {
  CompletionModel model(tiny(8));
  Rng rng(61);
  const PointCloud input = random_cloud(rng, 8);
  diff::NoGrad ng;
  const KeyGeometry key = model.lstnet().downsample(input);
  std::vector<std::uint32_t> idx = key.indices;
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(idx, (std::vector<std::uint32_t>{0, 1, 2, 3, 4, 5, 6, 7}));
  for (std::size_t i = 0; i < 8; ++i)
    for (int a = 0; a < 3; ++a)
      EXPECT_EQ(key.p_k->at(i, static_cast<std::size_t>(a)), input.points[key.indices[i]][a]);
}

TEST(Downsample, PaperScaleShapes) {
  CompletionModel model(paper_default());
  Rng rng(62);
  const PointCloud input = random_cloud(rng, 2048);
  diff::NoGrad ng;
  const KeyGeometry key = model.lstnet().downsample(input);
  EXPECT_EQ(key.p_k->shape, (std::vector<std::size_t>{512, 3}));
  EXPECT_EQ(key.f_local->shape, (std::vector<std::size_t>{512, 128}));
  EXPECT_EQ(key.f_k->shape, (std::vector<std::size_t>{512, 512}));
  EXPECT_EQ(key.g->shape, (std::vector<std::size_t>{1, 512}));
}

TEST(Downsample, GlobalFeatureIgnoresPointOrder) {
  CompletionModel model(tiny(6));
  Rng rng(63);
  PointCloud input = random_cloud(rng, 24);
  diff::NoGrad ng;
  const KeyGeometry before = model.lstnet().downsample(input);
  std::reverse(input.points.begin(), input.points.end());
  const KeyGeometry after = model.lstnet().downsample(input);
  // the selected key set is identical, so the pooled global feature is too
  EXPECT_EQ(before.g->data, after.g->data);
}

TEST(Downsample, RejectsUndersizedInput) {
  CompletionModel model(tiny(8));
  Rng rng(64);
  const PointCloud input = random_cloud(rng, 7);
  EXPECT_THROW(model.lstnet().downsample(input), SizeError);
}

TEST(PredictTransform, FreshInitIsMirrorAboutX) {
  CompletionModel model(tiny(5));
  Rng rng(65);
  diff::NoGrad ng;
  const KeyGeometry key = model.lstnet().downsample(random_cloud(rng, 20));
  const SymmetryTransform st = model.lstnet().predict_transform(key);
  const std::vector<double> mirror = {-1, 0, 0, 0, 1, 0, 0, 0, 1};
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(st.mats->at(i, j), mirror[j]);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(st.trans->at(i, j), 0.0);
  }
}

TEST(PredictTransform, ForcedNegatedIdentityBias) {
  CompletionModel model(tiny(4));
  TensorPtr bias = model.params().find("lstnet.affine_head.layer2.bias");
  ASSERT_NE(bias, nullptr);
  bias->data = {-1, 0, 0, 0, -1, 0, 0, 0, -1};
  Rng rng(66);
  diff::NoGrad ng;
  const KeyGeometry key = model.lstnet().downsample(random_cloud(rng, 16));
  const SymmetryTransform st = model.lstnet().predict_transform(key);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 9; ++j)
      EXPECT_EQ(st.mats->at(i, j), (j % 4 == 0) ? -1.0 : 0.0);
}

TEST(PredictTransform, RandomHeadsArePointwise) {
  CompletionModel model(tiny(6));
  Rng fill(67);
  for (const char* name : {"lstnet.affine_head.layer2.weight", "lstnet.translation_head.layer2.weight"}) {
    TensorPtr w = model.params().find(name);
    ASSERT_NE(w, nullptr);
    for (double& v : w->data) v = fill.uniform(-0.5, 0.5);
  }
  Rng rng(68);
  diff::NoGrad ng;
  const KeyGeometry key = model.lstnet().downsample(random_cloud(rng, 24));
  const SymmetryTransform st = model.lstnet().predict_transform(key);
  bool mats_differ = false, trans_differ = false;
  for (std::size_t j = 0; j < 9; ++j) mats_differ |= st.mats->at(0, j) != st.mats->at(1, j);
  for (std::size_t j = 0; j < 3; ++j) trans_differ |= st.trans->at(0, j) != st.trans->at(1, j);
  EXPECT_TRUE(mats_differ);
  EXPECT_TRUE(trans_differ);
}

TEST(ApplyTransform, IdentityKeepsKeys) {
  CompletionModel model(tiny(4));
  Rng rng(69);
  diff::NoGrad ng;
  const KeyGeometry key = model.lstnet().downsample(random_cloud(rng, 12));
  SymmetryTransform st;
  st.mats = diff::tensor({4, 9});
  st.trans = diff::tensor({4, 3});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 9; ++j) st.mats->at(i, j) = (j % 4 == 0) ? 1.0 : 0.0;
  const TensorPtr p_m = model.lstnet().apply_transform(key, st);
  EXPECT_EQ(p_m->data, key.p_k->data);
}

TEST(ApplyTransform, FrozenMirrorPoint) {
  ModelConfig cfg = tiny(1);
  CompletionModel model(cfg);
  PointCloud single;
  single.points = {{1, 2, 3}};
  diff::NoGrad ng;
  const PartialMissingPair pair = model.make_pair(single);
  EXPECT_DOUBLE_EQ(pair.p_m->at(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(pair.p_m->at(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(pair.p_m->at(0, 2), 3.0);
  // p_init is exactly [p_k; p_m]
  ASSERT_EQ(pair.p_init->rows(), 2u);
  EXPECT_EQ(pair.p_init->at(0, 0), 1.0);
  EXPECT_EQ(pair.p_init->at(1, 0), -1.0);
}

TEST(ApplyTransform, HouseholderBiasMatchesReflectionOracle) {
  Rng rng(70);
  for (int trial = 0; trial < 5; ++trial) {
    CompletionModel model(tiny(8));
    const Vec3 n = normalized({rng.normal(), rng.normal(), rng.normal()});
    TensorPtr bias = model.params().find("lstnet.affine_head.layer2.bias");
    ASSERT_NE(bias, nullptr);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        bias->data[static_cast<std::size_t>(a * 3 + b)] = (a == b ? 1.0 : 0.0) - 2.0 * n[a] * n[b];

    diff::NoGrad ng;
    const PartialMissingPair pair = model.make_pair(random_cloud(rng, 32));
    const PointCloud keys = diff::tensor_cloud(*pair.p_k);
    const PointCloud want = reflect_about_plane(keys, n);
    for (std::size_t i = 0; i < 8; ++i)
      for (int a = 0; a < 3; ++a)
        EXPECT_NEAR(pair.p_m->at(i, static_cast<std::size_t>(a)), want.points[i][a], 1e-12);
  }
}

TEST(ApplyTransform, PermutationEquivariant) {
  CompletionModel model(tiny(6));
  Rng rng(71);
  diff::NoGrad ng;
  const KeyGeometry key = model.lstnet().downsample(random_cloud(rng, 30));

  std::vector<std::uint32_t> perm = {3, 1, 5, 0, 2, 4};
  KeyGeometry shuffled = key;
  shuffled.p_k = diff::gather_rows(key.p_k, perm);
  shuffled.f_local = diff::gather_rows(key.f_local, perm);
  shuffled.f_k = diff::gather_rows(key.f_k, perm);

  const SymmetryTransform st = model.lstnet().predict_transform(key);
  const SymmetryTransform st_p = model.lstnet().predict_transform(shuffled);
  const TensorPtr p_m = model.lstnet().apply_transform(key, st);
  const TensorPtr p_m_p = model.lstnet().apply_transform(shuffled, st_p);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(p_m_p->at(i, j), p_m->at(perm[i], j));
}

TEST(LstnetGrad, ChamferThroughPInitChecksOut) {
  ModelConfig cfg = tiny(4);
  CompletionModel model(cfg);
  // shrink the transform trunk so the finite-difference sweep stays quick
  Rng rng(72);
  const PointCloud input = random_cloud(rng, 10);
  const PointCloud gt = random_cloud(rng, 12);

  std::vector<TensorPtr> lstnet_params;
  for (const auto& [name, t] : model.params().entries())
    if (name.rfind("lstnet.", 0) == 0) lstnet_params.push_back(t);
  ASSERT_FALSE(lstnet_params.empty());

  const double err = diff::max_grad_rel_err(lstnet_params, [&] {
    const KeyGeometry key = model.lstnet().downsample(input);
    const SymmetryTransform st = model.lstnet().predict_transform(key);
    const TensorPtr p_m = model.lstnet().apply_transform(key, st);
    return diff::chamfer_l1_diff(diff::concat_rows({key.p_k, p_m}), gt);
  });
  EXPECT_LT(err, 1e-4);
}
