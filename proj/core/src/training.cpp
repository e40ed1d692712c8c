#include "symmpc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "symmpc/errors.hpp"
#include "symmpc/io.hpp"
#include "symmpc/ops.hpp"
#include "symmpc/optim.hpp"
#include "symmpc/threading.hpp"

namespace symmpc {

using diff::TensorPtr;

TensorPtr total_loss(const TensorPtr& p_init, const std::vector<TensorPtr>& fines,
                     const PointCloud& gt) {
  TensorPtr loss = diff::chamfer_l1_diff(p_init, gt);
  for (const TensorPtr& fine : fines) loss = diff::add(loss, diff::chamfer_l1_diff(fine, gt));
  return loss;
}

namespace {

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// mean chamfer of the final stage's output, no tape
double split_cd(const CompletionModel& model, const std::vector<const SampleRecord*>& split) {
  if (split.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> cds(split.size(), 0.0);
  parallel_chunks(split.size(), 1, [&](std::size_t lo, std::size_t hi) {
    diff::NoGrad ng;
    for (std::size_t i = lo; i < hi; ++i) {
      const CompletionResult res = model.complete(split[i]->partial);
      cds[i] = chamfer_l1(diff::tensor_cloud(*res.fines.back()), split[i]->gt);
    }
  });
  double acc = 0.0;
  for (double c : cds) acc += c;
  return acc / static_cast<double>(split.size());
}

void emit_row(std::ostream* log, const EpochStats& row) {
  if (!log) return;
  *log << row.epoch << ',' << std::setprecision(9) << row.train_cd << ',' << row.val_cd << ','
       << std::setprecision(3) << std::fixed << row.seconds << '\n';
  log->unsetf(std::ios::floatfield);
  log->flush();
}

} // namespace

std::vector<EpochStats> train(CompletionModel& model, const TrainConfig& cfg,
                              const std::vector<SampleRecord>& dataset, std::ostream* log) {
  cfg.validate();
  if (dataset.empty()) throw SizeError("train: empty dataset");

  std::vector<const SampleRecord*> train_split, val_split;
  for (const SampleRecord& s : dataset)
    (is_validation(s.shape_id, cfg.val_fraction) ? val_split : train_split).push_back(&s);
  // tiny datasets can hash entirely into one bucket; fall back to overlap
  if (train_split.empty() || val_split.empty()) {
    train_split.clear();
    val_split.clear();
    for (const SampleRecord& s : dataset) {
      train_split.push_back(&s);
      val_split.push_back(&s);
    }
  }

  std::vector<TensorPtr> params = model.params().tensors();
  diff::AdamWConfig ocfg;
  ocfg.lr = cfg.lr;
  ocfg.weight_decay = cfg.weight_decay;
  diff::AdamW opt(params, ocfg);

  Rng root(cfg.seed);
  std::vector<EpochStats> stats;
  if (log) *log << "epoch,train_cd,val_cd,seconds\n";

  auto eval_cd = [&](const std::vector<const SampleRecord*>& split, std::size_t epoch) {
    try {
      return split_cd(model, split);
    } catch (const DomainError& e) {
      throw DomainError("train: diverged at epoch " + std::to_string(epoch) +
                        " evaluation: " + e.what());
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  EpochStats baseline{0, eval_cd(train_split, 0), eval_cd(val_split, 0), elapsed_s(t0)};
  emit_row(log, baseline);
  stats.push_back(baseline);

  std::vector<std::size_t> order(train_split.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    Rng erng = root.fork(epoch);
    erng.shuffle(order);

    double train_acc = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size, ++batch_index) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      opt.zero_grad();
      for (std::size_t i = b0; i < b1; ++i) {
        const SampleRecord& s = *train_split[order[i]];
        const std::string where =
            "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index + 1);
        CompletionResult res;
        TensorPtr loss;
        try {
          res = model.complete(s.partial);
          loss = total_loss(res.p_init, res.fines, s.gt);
        } catch (const DomainError& e) {
          // non-finite coordinates trip the kernels' own validation first
          throw DomainError("train: diverged at " + where + ": " + e.what());
        }
        if (!std::isfinite(loss->data[0]))
          throw DomainError("train: non-finite loss at " + where);
        loss->backward();
        train_acc += chamfer_l1(diff::tensor_cloud(*res.fines.back()), s.gt);
      }
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      for (const TensorPtr& p : params)
        for (double& g : p->grad) g *= inv;
      opt.step();
    }

    EpochStats row{epoch, train_acc / static_cast<double>(order.size()),
                   eval_cd(val_split, epoch), elapsed_s(te)};
    emit_row(log, row);
    stats.push_back(row);
  }
  return stats;
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string csv_text(const EvalReport& report) {
  std::ostringstream os;
  os << "shape_id,cd_l1,cd_l2,f1,fd,mmd\n";
  auto line = [&](const std::string& id, const MetricsRecord& m) {
    os << id << ',' << fmt(m.cd_l1) << ',' << fmt(m.cd_l2) << ',' << fmt(m.f1_at_1pct) << ','
       << fmt(m.fd) << ',' << fmt(m.mmd) << '\n';
  };
  for (const EvalRow& row : report.rows) line(row.shape_id, row.metrics);
  line("mean", report.mean);
  return os.str();
}

} // namespace

EvalReport evaluate(const CompletionModel& model, const std::vector<SampleRecord>& dataset,
                    const EvalOptions& opts) {
  if (dataset.empty()) throw SizeError("evaluate: empty dataset");
  std::vector<PointCloud> gallery;
  gallery.reserve(dataset.size());
  for (const SampleRecord& s : dataset) gallery.push_back(s.gt);

  const bool exporting = !opts.export_dir.empty();
  if (exporting) std::filesystem::create_directories(opts.export_dir);

  EvalReport report;
  report.rows.resize(dataset.size());
  parallel_chunks(dataset.size(), 1, [&](std::size_t lo, std::size_t hi) {
    diff::NoGrad ng;
    for (std::size_t i = lo; i < hi; ++i) {
      const SampleRecord& s = dataset[i];
      const CompletionResult res = model.complete(s.partial);
      const PointCloud out = diff::tensor_cloud(*res.fines.back());
      MetricsRecord m;
      m.cd_l1 = chamfer_l1(out, s.gt);
      m.cd_l2 = chamfer_l2(out, s.gt);
      m.f1_at_1pct = f1_score(out, s.gt, 0.01);
      m.fd = fidelity_distance(s.partial, out);
      m.mmd = mmd(out, gallery);
      report.rows[i] = EvalRow{s.shape_id, m};
      if (exporting) {
        const auto base = opts.export_dir / s.shape_id;
        save_xyz(diff::tensor_cloud(*res.p_m), base.string() + "_mirror.xyz");
        save_xyz(diff::tensor_cloud(*res.p_init), base.string() + "_initial.xyz");
        for (std::size_t f = 0; f < res.fines.size(); ++f)
          save_xyz(diff::tensor_cloud(*res.fines[f]),
                   base.string() + "_fine" + std::to_string(f + 1) + ".xyz");
      }
    }
  });

  MetricsRecord& mean = report.mean;
  for (const EvalRow& row : report.rows) {
    mean.cd_l1 += row.metrics.cd_l1;
    mean.cd_l2 += row.metrics.cd_l2;
    mean.f1_at_1pct += row.metrics.f1_at_1pct;
    mean.fd += row.metrics.fd;
    mean.mmd += row.metrics.mmd;
  }
  const double inv = 1.0 / static_cast<double>(report.rows.size());
  mean.cd_l1 *= inv;
  mean.cd_l2 *= inv;
  mean.f1_at_1pct *= inv;
  mean.fd *= inv;
  mean.mmd *= inv;

  std::ostringstream id;
  id << std::hex << std::setw(16) << std::setfill('0') << fnv1a(csv_text(report));
  report.run_id = id.str();
  return report;
}

void write_metrics_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << csv_text(report);
}

void write_metrics_json(const EvalReport& report, const ModelConfig& cfg,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const MetricsRecord& m = report.mean;
  out << "{\n"
      << "  \"run_id\": \"" << report.run_id << "\",\n"
      << "  \"samples\": " << report.rows.size() << ",\n"
      << "  \"param_count\": " << count_params(cfg) << ",\n"
      << "  \"mean\": {\"cd_l1\": " << fmt(m.cd_l1) << ", \"cd_l2\": " << fmt(m.cd_l2)
      << ", \"f1\": " << fmt(m.f1_at_1pct) << ", \"fd\": " << fmt(m.fd)
      << ", \"mmd\": " << fmt(m.mmd) << "},\n"
      << "  \"model\": {\"n_k\": " << cfg.n_k << ", \"enc_channels\": " << cfg.enc_channels
      << ", \"channels\": " << cfg.channels << ", \"heads\": " << cfg.heads
      << ", \"knn_k\": " << cfg.knn_k << ", \"ratios\": [";
  for (std::size_t i = 0; i < cfg.ratios.size(); ++i) out << (i ? ", " : "") << cfg.ratios[i];
  out << "], \"use_f_k\": " << (cfg.use_f_k ? "true" : "false")
      << ", \"use_f_m\": " << (cfg.use_f_m ? "true" : "false") << ", \"seed\": " << cfg.seed
      << "}\n"
      << "}\n";
}

} // namespace symmpc
