#include "symmpc/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "symmpc/checkpoint.hpp"
#include "symmpc/config.hpp"
#include "symmpc/errors.hpp"
#include "symmpc/io.hpp"
#include "symmpc/selftest.hpp"
#include "symmpc/sgformer.hpp"
#include "symmpc/synthetic.hpp"
#include "symmpc/training.hpp"

namespace symmpc {
namespace {

namespace fs = std::filesystem;

constexpr const char* kUsage = R"(usage: symmpc <command> [flags]

commands:
  gen-data  --out DIR [--seed N] [--count N] [--resolution N]
            synthesize a partial/complete dataset
  train     --data DIR --out CKPT [--config FILE]
            train a completion model; writes CKPT and CKPT.log
  eval      --ckpt FILE --data DIR --report DIR
            [--export-clouds] [--use-f-k 0|1] [--use-f-m 0|1]
            score a checkpoint; writes metrics.csv and summary.json
  complete  --ckpt FILE --in FILE --out FILE
            complete a single cloud (.xyz or .pcf by extension)
  bench     --op knn|chamfer|fps [--n N] [--seed N]
            time one geometry kernel, printing ops/sec
  selftest  run the oracle and gradient suites

exit codes: 0 success, 1 usage error, 2 runtime failure
)";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Command { gen_data, train, eval, complete, bench, self_test };

struct RunManifest {
  Command command{};
  fs::path config, data, out, ckpt, in, report;
  std::uint64_t seed = 1;
  std::size_t count = 16;
  std::size_t resolution = 2048;
  std::size_t n = 1024;
  std::string op;
  bool export_clouds = false;
  std::optional<bool> use_f_k, use_f_m;
};

std::uint64_t parse_uint(const std::string& flag, const std::string& v) {
  if (v.empty() || v[0] == '-')
    throw UsageError(flag + " needs an unsigned integer, got '" + v + "'");
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw UsageError(flag + " needs an unsigned integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& flag, const std::string& v) {
  if (v == "0" || v == "false") return false;
  if (v == "1" || v == "true") return true;
  throw UsageError(flag + " needs 0 or 1, got '" + v + "'");
}

RunManifest parse_args(int argc, const char* const* argv) {
  if (argc < 2) throw UsageError("missing command");
  const std::string cmd = argv[1];
  RunManifest m;
  if (cmd == "gen-data") m.command = Command::gen_data;
  else if (cmd == "train") m.command = Command::train;
  else if (cmd == "eval") m.command = Command::eval;
  else if (cmd == "complete") m.command = Command::complete;
  else if (cmd == "bench") m.command = Command::bench;
  else if (cmd == "selftest") m.command = Command::self_test;
  else throw UsageError("unknown command '" + cmd + "'");

  std::vector<std::string> args(argv + 2, argv + argc);
  std::size_t i = 0;
  auto value = [&](const std::string& flag) -> std::string {
    if (i + 1 >= args.size()) throw UsageError(flag + " needs a value");
    return args[++i];
  };
  auto reject = [&](const std::string& flag) -> std::string {
    throw UsageError("unknown flag '" + flag + "' for " + cmd);
  };

  for (; i < args.size(); ++i) {
    const std::string& a = args[i];
    switch (m.command) {
      case Command::gen_data:
        if (a == "--out") m.out = value(a);
        else if (a == "--seed") m.seed = parse_uint(a, value(a));
        else if (a == "--count") m.count = parse_uint(a, value(a));
        else if (a == "--resolution") m.resolution = parse_uint(a, value(a));
        else reject(a);
        break;
      case Command::train:
        if (a == "--config") m.config = value(a);
        else if (a == "--data") m.data = value(a);
        else if (a == "--out") m.out = value(a);
        else reject(a);
        break;
      case Command::eval:
        if (a == "--ckpt") m.ckpt = value(a);
        else if (a == "--data") m.data = value(a);
        else if (a == "--report") m.report = value(a);
        else if (a == "--export-clouds") m.export_clouds = true;
        else if (a == "--use-f-k") m.use_f_k = parse_bool(a, value(a));
        else if (a == "--use-f-m") m.use_f_m = parse_bool(a, value(a));
        else reject(a);
        break;
      case Command::complete:
        if (a == "--ckpt") m.ckpt = value(a);
        else if (a == "--in") m.in = value(a);
        else if (a == "--out") m.out = value(a);
        else reject(a);
        break;
      case Command::bench:
        if (a == "--op") m.op = value(a);
        else if (a == "--n") m.n = parse_uint(a, value(a));
        else if (a == "--seed") m.seed = parse_uint(a, value(a));
        else reject(a);
        break;
      case Command::self_test:
        reject(a);
        break;
    }
  }

  auto need = [](const fs::path& p, const std::string& flag) {
    if (p.empty()) throw UsageError("missing required flag " + flag);
  };
  switch (m.command) {
    case Command::gen_data:
      need(m.out, "--out");
      if (m.count == 0) throw UsageError("--count must be positive");
      if (m.resolution < 16) throw UsageError("--resolution must be at least 16");
      break;
    case Command::train:
      need(m.data, "--data");
      need(m.out, "--out");
      break;
    case Command::eval:
      need(m.ckpt, "--ckpt");
      need(m.data, "--data");
      need(m.report, "--report");
      break;
    case Command::complete:
      need(m.ckpt, "--ckpt");
      need(m.in, "--in");
      need(m.out, "--out");
      break;
    case Command::bench:
      if (m.op != "knn" && m.op != "chamfer" && m.op != "fps")
        throw UsageError("--op must be one of knn, chamfer, fps");
      if (m.n < 8) throw UsageError("--n must be at least 8");
      break;
    case Command::self_test:
      break;
  }
  return m;
}

// All paths are probed before any expensive work starts.
void require_readable(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read " + p.string());
}

void require_dataset_dir(const fs::path& p) {
  if (!fs::is_directory(p)) throw IoError("not a dataset directory: " + p.string());
  require_readable(p / "manifest.tsv");
}

void prepare_out_file(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream probe(p, std::ios::binary | std::ios::app);
  if (!probe) throw IoError("cannot write " + p.string());
}

// mirrors every character to a second sink so train logs hit file and console
class TeeBuf : public std::streambuf {
public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

protected:
  int overflow(int ch) override {
    if (ch == traits_type::eof()) return 0;
    const int ra = a_->sputc(static_cast<char>(ch));
    const int rb = b_->sputc(static_cast<char>(ch));
    return (ra == traits_type::eof() || rb == traits_type::eof()) ? traits_type::eof() : ch;
  }
  int sync() override { return (a_->pubsync() == 0 && b_->pubsync() == 0) ? 0 : -1; }

private:
  std::streambuf* a_;
  std::streambuf* b_;
};

int run_gen_data(const RunManifest& m) {
  const auto samples = gen_synthetic(m.seed, m.count, m.resolution);
  save_dataset(samples, m.out);
  std::cout << "wrote " << samples.size() << " samples to " << m.out.string() << '\n';
  return 0;
}

int run_train(const RunManifest& m) {
  if (!m.config.empty()) require_readable(m.config);
  require_dataset_dir(m.data);
  prepare_out_file(m.out);
  const fs::path log_path = m.out.string() + ".log";
  std::ofstream log_file(log_path);
  if (!log_file) throw IoError("cannot write " + log_path.string());

  RunConfig cfg;
  if (!m.config.empty()) cfg = load_config(m.config);
  cfg.model.validate();
  cfg.train.validate();

  const auto dataset = load_dataset(m.data);
  CompletionModel model(cfg.model);
  std::cout << "training " << count_params(cfg.model) << " parameters on " << dataset.size()
            << " samples\n";

  TeeBuf tee(log_file.rdbuf(), std::cout.rdbuf());
  std::ostream log(&tee);
  const auto stats = train(model, cfg.train, dataset, &log);

  diff::save_checkpoint(model.params(), model.config(), m.out);
  std::cout << "wrote checkpoint " << m.out.string() << " (final val_cd "
            << stats.back().val_cd << ")\n";
  return 0;
}

int run_eval(const RunManifest& m) {
  require_readable(m.ckpt);
  require_dataset_dir(m.data);
  fs::create_directories(m.report);

  ModelConfig cfg = diff::peek_checkpoint_config(m.ckpt);
  if (m.use_f_k) cfg.use_f_k = *m.use_f_k;
  if (m.use_f_m) cfg.use_f_m = *m.use_f_m;
  CompletionModel model(cfg);
  diff::load_checkpoint(model.params(), m.ckpt);

  const auto dataset = load_dataset(m.data);
  EvalOptions opts;
  if (m.export_clouds) opts.export_dir = m.report / "clouds";
  const EvalReport report = evaluate(model, dataset, opts);

  write_metrics_csv(report, m.report / "metrics.csv");
  write_metrics_json(report, cfg, m.report / "summary.json");
  std::cout << "run " << report.run_id << ": " << report.rows.size()
            << " samples, mean cd_l1 " << report.mean.cd_l1 << ", f1 " << report.mean.f1_at_1pct
            << '\n';
  return 0;
}

int run_complete(const RunManifest& m) {
  require_readable(m.ckpt);
  require_readable(m.in);
  prepare_out_file(m.out);

  const ModelConfig cfg = diff::peek_checkpoint_config(m.ckpt);
  CompletionModel model(cfg);
  diff::load_checkpoint(model.params(), m.ckpt);

  const PointCloud partial = load_cloud(m.in);
  diff::NoGrad ng;
  const CompletionResult res = model.complete(partial);
  const PointCloud out = diff::tensor_cloud(*res.fines.back());
  save_cloud(out, m.out);
  std::cout << "completed " << partial.count() << " -> " << out.count() << " points into "
            << m.out.string() << '\n';
  return 0;
}

int run_bench(const RunManifest& m) {
  Rng rng(m.seed);
  PointCloud a, b;
  a.points.resize(m.n);
  b.points.resize(m.n);
  for (Vec3& p : a.points)
    p = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  for (Vec3& p : b.points)
    p = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

  double sink = 0.0;
  std::function<void()> op;
  if (m.op == "knn") {
    op = [&] { sink += static_cast<double>(knn(a, b, 16)[0][0]); };
  } else if (m.op == "chamfer") {
    op = [&] { sink += chamfer_l1(a, b); };
  } else {
    op = [&] { sink += static_cast<double>(fps(a, m.n / 4, 0)[0]); };
  }

  op();  // warm-up, outside the timed window
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t reps = 0;
  double elapsed = 0.0;
  do {
    op();
    ++reps;
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  } while (elapsed < 0.5 && reps < 1000000);

  std::ostringstream line;
  line.setf(std::ios::fixed);
  line.precision(1);
  line << m.op << " n=" << m.n << ": " << (static_cast<double>(reps) / elapsed) << " ops/sec ("
       << reps << " reps in " << std::setprecision(2) << elapsed << " s)";
  std::cout << line.str() << '\n';
  if (!std::isfinite(sink)) std::cerr << "";  // keep the kernel results alive
  return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
  try {
    if (argc >= 2) {
      const std::string first = argv[1];
      if (first == "--help" || first == "-h" || first == "help") {
        std::cout << kUsage;
        return 0;
      }
    }
    const RunManifest m = parse_args(argc, argv);
    switch (m.command) {
      case Command::gen_data: return run_gen_data(m);
      case Command::train: return run_train(m);
      case Command::eval: return run_eval(m);
      case Command::complete: return run_complete(m);
      case Command::bench: return run_bench(m);
      case Command::self_test: return selftest(std::cout) ? 0 : 2;
    }
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << kUsage;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

} // namespace symmpc
