#pragma once

#include <filesystem>
#include <iosfwd>

#include "symmpc/sgformer.hpp"
#include "symmpc/synthetic.hpp"

namespace symmpc {

// chamfer of the initial cloud plus every refined cloud against gt
diff::TensorPtr total_loss(const diff::TensorPtr& p_init,
                           const std::vector<diff::TensorPtr>& fines, const PointCloud& gt);

struct EpochStats {
  std::size_t epoch;
  double train_cd;
  double val_cd;
  double seconds;
};

// Mutates the model's parameters. Samples split train/val by id hash; the
// epoch-0 row is the untouched model. Aborts with a diagnostic on non-finite
// loss. Bit-reproducible for a fixed seed under SYMM_THREADS=0.
std::vector<EpochStats> train(CompletionModel& model, const TrainConfig& cfg,
                              const std::vector<SampleRecord>& dataset, std::ostream* log);

struct EvalRow {
  std::string shape_id;
  MetricsRecord metrics;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  MetricsRecord mean;
  std::string run_id;  // content hash, stable across reruns
};

struct EvalOptions {
  std::filesystem::path export_dir;  // when set: mirror/initial/fine XYZ per sample
};

// Final-stage output scored against gt; fidelity against the partial input;
// mmd against the dataset's own gt gallery.
EvalReport evaluate(const CompletionModel& model, const std::vector<SampleRecord>& dataset,
                    const EvalOptions& opts = {});

void write_metrics_csv(const EvalReport& report, const std::filesystem::path& path);
void write_metrics_json(const EvalReport& report, const ModelConfig& cfg,
                        const std::filesystem::path& path);

} // namespace symmpc
