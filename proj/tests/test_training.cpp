#include <gtest/gtest.h>
#include <unistd.h>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "symmpc/checkpoint.hpp"
#include "symmpc/io.hpp"
#include "symmpc/layers.hpp"
#include "symmpc/sgformer.hpp"
#include "symmpc/synthetic.hpp"
#include "symmpc/training.hpp"

namespace symmpc {
namespace {

namespace fs = std::filesystem;
using diff::TensorPtr;

class TrainingTest : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("symmpc_training_" + std::to_string(getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
};

PointCloud cloud(std::initializer_list<Vec3> pts) {
  PointCloud c;
  c.points = pts;
  return c;
}

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    c.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  return c;
}

TEST(TotalLoss, ZeroWhenEverythingMatchesGt) {
  const PointCloud gt = cloud({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}});
  const TensorPtr t = diff::cloud_tensor(gt);
  EXPECT_EQ(total_loss(t, {t, t}, gt)->data[0], 0.0);
}

TEST(TotalLoss, AddsOneChamferTermPerCloud) {
  const PointCloud gt = cloud({{0, 0, 0}});
  const TensorPtr exact = diff::cloud_tensor(gt);
  const TensorPtr off = diff::cloud_tensor(cloud({{0.5, 0, 0}}));
  // initial term 0, two fine terms at 0.5 each
  EXPECT_DOUBLE_EQ(total_loss(exact, {off, off}, gt)->data[0], 1.0);
}

TEST(TotalLoss, ZeroOffsetModelScoresTheInitialCloudThreeTimes) {
  const CompletionModel model(tiny_gradcheck());
  const PointCloud partial = random_cloud(10, 3);
  const PointCloud gt = random_cloud(12, 4);

  const CompletionResult res = model.complete(partial);
  const double total = total_loss(res.p_init, res.fines, gt)->data[0];

  const double t0 = chamfer_l1(diff::tensor_cloud(*res.p_init), gt);
  const double t1 = chamfer_l1(diff::tensor_cloud(*res.fines[0]), gt);
  const double t2 = chamfer_l1(diff::tensor_cloud(*res.fines[1]), gt);
  EXPECT_NEAR(total, t0 + t1 + t2, 1e-12);
  // fresh stages only repeat their input, which leaves chamfer unchanged
  EXPECT_NEAR(t1, t0, 1e-12);
  EXPECT_NEAR(t2, t0, 1e-12);
}

TEST(Split, HashSplitIsDeterministicAndRoughlyProportional) {
  std::size_t val = 0;
  const std::size_t total = 5000;
  for (std::size_t i = 0; i < total; ++i) {
    const std::string id = "shape_" + std::to_string(i);
    const bool first = is_validation(id, 0.2);
    EXPECT_EQ(first, is_validation(id, 0.2));
    EXPECT_TRUE(is_validation(id, 1.0));
    if (first) ++val;
  }
  const double frac = static_cast<double>(val) / static_cast<double>(total);
  EXPECT_GT(frac, 0.15);
  EXPECT_LT(frac, 0.25);
}

TEST(Synthetic, HonorsCountAndResolution) {
  const auto samples = gen_synthetic(3, 10, 64);
  ASSERT_EQ(samples.size(), 10u);
  std::vector<std::string> ids;
  for (const SampleRecord& s : samples) {
    EXPECT_EQ(s.gt.count(), 64u);
    EXPECT_EQ(s.partial.count(), 16u);
    EXPECT_TRUE(s.has_plane);
    EXPECT_NEAR(norm(s.plane_normal), 1.0, 1e-12);
    ids.push_back(s.shape_id);
  }
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
}

TEST(Synthetic, PartialPointsComeFromTheGtSet) {
  for (const SampleRecord& s : gen_synthetic(5, 6, 64))
    EXPECT_EQ(fidelity_distance(s.partial, s.gt), 0.0) << s.shape_id;
}

TEST(Synthetic, EveryFifthSampleGrowsALug) {
  const auto samples = gen_synthetic(7, 10, 64);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool asym = samples[i].shape_id.find("_asym_") != std::string::npos;
    EXPECT_EQ(asym, i % 5 == 4) << samples[i].shape_id;
  }
}

TEST(Synthetic, ReflectionSeparatesSymmetricFromAsymmetric) {
  for (const SampleRecord& s : gen_synthetic(11, 10, 512)) {
    const double cd = chamfer_l1(s.gt, reflect_about_plane(s.gt, s.plane_normal));
    if (s.shape_id.find("_asym_") == std::string::npos)
      EXPECT_LT(cd, 0.02) << s.shape_id;
    else
      EXPECT_GT(cd, 0.05) << s.shape_id;
  }
}

TEST_F(TrainingTest, FixedSeedIsBitIdentical) {
  const auto a = gen_synthetic(13, 6, 64);
  const auto b = gen_synthetic(13, 6, 64);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].shape_id, b[i].shape_id);
    EXPECT_EQ(a[i].plane_normal, b[i].plane_normal);
    EXPECT_EQ(a[i].gt.points, b[i].gt.points);
    EXPECT_EQ(a[i].partial.points, b[i].partial.points);
  }

  save_dataset(a, dir_ / "da");
  save_dataset(b, dir_ / "db");
  for (const auto& entry : fs::directory_iterator(dir_ / "da")) {
    std::ifstream fa(entry.path(), std::ios::binary);
    std::ifstream fb(dir_ / "db" / entry.path().filename(), std::ios::binary);
    ASSERT_TRUE(fa && fb) << entry.path();
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << entry.path();
  }
}

TEST_F(TrainingTest, DatasetRoundTripsAtSinglePrecision) {
  const auto orig = gen_synthetic(17, 5, 64);
  save_dataset(orig, dir_ / "ds");
  const auto back = load_dataset(dir_ / "ds");
  ASSERT_EQ(back.size(), orig.size());
  for (std::size_t i = 0; i < orig.size(); ++i) {
    EXPECT_EQ(back[i].shape_id, orig[i].shape_id);
    EXPECT_TRUE(back[i].has_plane);
    for (int a = 0; a < 3; ++a)
      EXPECT_DOUBLE_EQ(back[i].plane_normal[a], orig[i].plane_normal[a]);
    ASSERT_EQ(back[i].gt.count(), orig[i].gt.count());
    for (std::size_t p = 0; p < orig[i].gt.count(); ++p)
      for (int a = 0; a < 3; ++a)
        EXPECT_EQ(back[i].gt.points[p][a],
                  static_cast<double>(static_cast<float>(orig[i].gt.points[p][a])));
  }
}

TrainConfig tiny_train(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 2;
  t.partial_points = 16;
  t.gt_points = 64;
  t.seed = 5;
  return t;
}

TEST(Train, ZeroLrWithoutDecayLeavesParametersBitIdentical) {
  CompletionModel model(tiny_gradcheck());
  std::vector<std::vector<double>> before;
  for (const auto& [name, t] : model.params().entries()) before.push_back(t->data);

  TrainConfig cfg = tiny_train(2);
  cfg.lr = 0.0;
  cfg.weight_decay = 0.0;
  const auto stats = train(model, cfg, gen_synthetic(19, 4, 64), nullptr);
  EXPECT_EQ(stats.size(), 3u);  // epoch-0 baseline plus two epochs

  std::size_t i = 0;
  for (const auto& [name, t] : model.params().entries())
    EXPECT_EQ(t->data, before[i++]) << name;
}

TEST_F(TrainingTest, OneEpochCheckpointRoundTripsToIdenticalForward) {
  const ModelConfig mc = tiny_gradcheck();
  CompletionModel model(mc);
  const auto dataset = gen_synthetic(23, 4, 64);
  train(model, tiny_train(1), dataset, nullptr);

  const std::vector<double> out1 =
      model.complete(dataset[0].partial).fines.back()->data;
  const fs::path ckpt = dir_ / "tiny.ckpt";
  diff::save_checkpoint(model.params(), mc, ckpt);

  ModelConfig peeked = diff::peek_checkpoint_config(ckpt);
  peeked.seed = 99;  // loaded weights must overwrite whatever init produced
  CompletionModel loaded(peeked);
  diff::load_checkpoint(loaded.params(), ckpt);
  EXPECT_EQ(loaded.complete(dataset[0].partial).fines.back()->data, out1);
}

TEST(Train, AbortsOnPoisonedModelNamingTheFailurePoint) {
  CompletionModel model(tiny_gradcheck());
  // poison a bias that feeds point coordinates directly; a poisoned weight
  // could be erased by a downstream relu before it ever reaches the loss
  diff::TensorPtr bias = model.params().find("sgformer.stage2.shuffle.layer1.bias");
  ASSERT_NE(bias, nullptr);
  bias->data[0] = std::nan("");
  try {
    train(model, tiny_train(1), gen_synthetic(29, 4, 64), nullptr);
    FAIL() << "poisoned model trained to completion";
  } catch (const DomainError& e) {
    // a pre-poisoned model blows up in the epoch-0 baseline, before any batch
    const std::string msg = e.what();
    EXPECT_NE(msg.find("train: diverged at epoch 0 evaluation"), std::string::npos) << msg;
    EXPECT_NE(msg.find("non-finite"), std::string::npos) << msg;
  }
}

TEST(Train, SameSeedGivesIdenticalEpochStats) {
  const auto dataset = gen_synthetic(31, 4, 64);
  const TrainConfig cfg = tiny_train(2);

  CompletionModel a(tiny_gradcheck());
  CompletionModel b(tiny_gradcheck());
  const auto sa = train(a, cfg, dataset, nullptr);
  const auto sb = train(b, cfg, dataset, nullptr);
  ASSERT_EQ(sa.size(), sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    EXPECT_EQ(sa[i].epoch, sb[i].epoch);
    EXPECT_EQ(sa[i].train_cd, sb[i].train_cd);
    EXPECT_EQ(sa[i].val_cd, sb[i].val_cd);
  }
}

TEST(Train, RejectsEmptyDataset) {
  CompletionModel model(tiny_gradcheck());
  EXPECT_THROW(train(model, tiny_train(1), {}, nullptr), SizeError);
}

TEST(Train, WritesOneLogRowPerEpoch) {
  CompletionModel model(tiny_gradcheck());
  std::ostringstream log;
  train(model, tiny_train(2), gen_synthetic(37, 4, 64), &log);

  std::istringstream lines(log.str());
  std::string line;
  ASSERT_TRUE(std::getline(lines, line));
  EXPECT_EQ(line, "epoch,train_cd,val_cd,seconds");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(line.rfind(std::to_string(rows) + ",", 0), 0u) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 3u);
}

TEST_F(TrainingTest, PeekReadsTheEmbeddedConfig) {
  ModelConfig mc = tiny_gradcheck();
  mc.ratios = {2, 3};
  mc.use_f_k = false;
  mc.seed = 9;
  CompletionModel model(mc);
  const fs::path ckpt = dir_ / "peek.ckpt";
  diff::save_checkpoint(model.params(), mc, ckpt);

  const ModelConfig got = diff::peek_checkpoint_config(ckpt);
  EXPECT_EQ(got.n_k, mc.n_k);
  EXPECT_EQ(got.enc_channels, mc.enc_channels);
  EXPECT_EQ(got.channels, mc.channels);
  EXPECT_EQ(got.heads, mc.heads);
  EXPECT_EQ(got.knn_k, mc.knn_k);
  EXPECT_EQ(got.ratios, mc.ratios);
  EXPECT_EQ(got.use_f_k, mc.use_f_k);
  EXPECT_EQ(got.use_f_m, mc.use_f_m);
  EXPECT_EQ(got.seed, mc.seed);
}

TEST_F(TrainingTest, LoadRejectsArchitectureMismatchBothWays) {
  ModelConfig two_stage = tiny_gradcheck();
  ModelConfig one_stage = tiny_gradcheck();
  one_stage.ratios = {2};
  CompletionModel big(two_stage);
  CompletionModel small(one_stage);

  const fs::path big_ckpt = dir_ / "big.ckpt";
  const fs::path small_ckpt = dir_ / "small.ckpt";
  diff::save_checkpoint(big.params(), two_stage, big_ckpt);
  diff::save_checkpoint(small.params(), one_stage, small_ckpt);

  EXPECT_THROW(diff::load_checkpoint(small.params(), big_ckpt), IoError);
  EXPECT_THROW(diff::load_checkpoint(big.params(), small_ckpt), IoError);
}

TEST_F(TrainingTest, GarbageFileIsRejected) {
  const fs::path bad = dir_ / "bad.ckpt";
  std::ofstream(bad) << "definitely not a checkpoint";
  EXPECT_THROW(diff::peek_checkpoint_config(bad), IoError);
  EXPECT_THROW(diff::load_checkpoint(CompletionModel(tiny_gradcheck()).params(), bad), IoError);
}

// --- parameter counting, re-derived from the documented layer list ---

std::size_t lin(std::size_t in, std::size_t out) { return in * out + out; }

std::size_t mlp(std::initializer_list<std::size_t> widths) {
  std::size_t total = 0;
  const auto* w = widths.begin();
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) total += lin(w[i], w[i + 1]);
  return total;
}

std::size_t attention(std::size_t c, std::size_t kv) {
  return lin(c, c) + lin(kv, c) + lin(kv, c) + lin(c, c) + lin(c, 2 * c) + lin(2 * c, c);
}

std::size_t pt_block(std::size_t c) {
  return 5 * lin(c, c) + mlp({3, c, c}) + mlp({c, c, c});
}

std::size_t encoder_params(std::size_t e) {
  return mlp({3, e, 2 * e}) + mlp({4 * e, 2 * e, e}) + pt_block(e);
}

std::size_t stage_params(std::size_t e, std::size_t r) {
  return encoder_params(e) + 2 * mlp({e, 2 * e, 2 * e}) + 2 * attention(2 * e, e) +
         2 * attention(2 * e, 2 * e) + 2 * attention(4 * e, 4 * e) + mlp({4 * e, 2 * e, 3 * r});
}

std::size_t lstnet_params(std::size_t e, std::size_t c) {
  return mlp({3, e / 2, e}) + pt_block(e) + mlp({e, c / 2, c}) + mlp({2 * c, c, c / 2, 9}) +
         mlp({2 * c, c, c / 2, 3});
}

TEST(CountParams, MatchesHandArithmeticOnTheToyConfig) {
  const ModelConfig toy = toy_benchmark();
  std::size_t expected = lstnet_params(toy.enc_channels, toy.channels);
  for (std::size_t r : toy.ratios) expected += stage_params(toy.enc_channels, r);
  EXPECT_EQ(count_params(toy), expected);
}

TEST(CountParams, AgreesWithTheAssembledRegistry) {
  const ModelConfig tiny = tiny_gradcheck();
  EXPECT_EQ(count_params(tiny), CompletionModel(tiny).params().total_size());
}

TEST(CountParams, WidthDoublingRoughlyQuadruples) {
  const ModelConfig toy = toy_benchmark();
  ModelConfig wide = toy;
  wide.enc_channels *= 2;
  wide.channels *= 2;
  const double ratio = static_cast<double>(count_params(wide)) /
                       static_cast<double>(count_params(toy));
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.0);
}

// --- evaluation harness ---

TEST(Evaluate, ProducesOneRowPerSampleWithFiniteMetrics) {
  const CompletionModel model(tiny_gradcheck());
  const auto dataset = gen_synthetic(41, 3, 64);
  const EvalReport report = evaluate(model, dataset);

  ASSERT_EQ(report.rows.size(), dataset.size());
  MetricsRecord sums;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    EXPECT_EQ(report.rows[i].shape_id, dataset[i].shape_id);
    const MetricsRecord& m = report.rows[i].metrics;
    EXPECT_TRUE(std::isfinite(m.cd_l1) && std::isfinite(m.cd_l2) && std::isfinite(m.fd) &&
                std::isfinite(m.mmd));
    EXPECT_GE(m.f1_at_1pct, 0.0);
    EXPECT_LE(m.f1_at_1pct, 1.0);
    sums.cd_l1 += m.cd_l1;
    sums.mmd += m.mmd;
  }
  EXPECT_NEAR(report.mean.cd_l1, sums.cd_l1 / 3.0, 1e-12);
  EXPECT_NEAR(report.mean.mmd, sums.mmd / 3.0, 1e-12);

  ASSERT_EQ(report.run_id.size(), 16u);
  EXPECT_EQ(report.run_id.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_EQ(evaluate(model, dataset).run_id, report.run_id);
}

TEST_F(TrainingTest, CsvHasExactHeaderAndTrailingMeanRow) {
  const CompletionModel model(tiny_gradcheck());
  const auto dataset = gen_synthetic(43, 3, 64);
  const EvalReport report = evaluate(model, dataset);

  const fs::path csv = dir_ / "metrics.csv";
  write_metrics_csv(report, csv);
  std::ifstream in(csv);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines.front(), "shape_id,cd_l1,cd_l2,f1,fd,mmd");
  EXPECT_EQ(lines.back().rfind("mean,", 0), 0u);

  const fs::path json = dir_ / "summary.json";
  write_metrics_json(report, model.config(), json);
  std::stringstream body;
  body << std::ifstream(json).rdbuf();
  EXPECT_NE(body.str().find("\"run_id\": \"" + report.run_id + "\""), std::string::npos);
  EXPECT_NE(body.str().find("\"param_count\""), std::string::npos);
  EXPECT_NE(body.str().find("\"samples\": 3"), std::string::npos);
}

TEST_F(TrainingTest, ExportsMirrorInitialAndFineClouds) {
  const CompletionModel model(tiny_gradcheck());
  const auto dataset = gen_synthetic(47, 2, 64);
  EvalOptions opts;
  opts.export_dir = dir_ / "clouds";
  evaluate(model, dataset, opts);

  const std::string id = dataset[0].shape_id;
  EXPECT_EQ(load_xyz(opts.export_dir / (id + "_mirror.xyz")).count(), 4u);
  EXPECT_EQ(load_xyz(opts.export_dir / (id + "_initial.xyz")).count(), 8u);
  EXPECT_EQ(load_xyz(opts.export_dir / (id + "_fine1.xyz")).count(), 16u);
  EXPECT_EQ(load_xyz(opts.export_dir / (id + "_fine2.xyz")).count(), 32u);
}

TEST(Evaluate, UndersizedPartialSurfacesTheKernelError) {
  const CompletionModel model(toy_benchmark());  // wants 48 keys
  const auto dataset = gen_synthetic(53, 2, 64);  // partials carry 16 points
  EXPECT_THROW(evaluate(model, dataset), SizeError);
}

} // namespace
} // namespace symmpc
