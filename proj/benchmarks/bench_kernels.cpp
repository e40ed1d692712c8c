#include <benchmark/benchmark.h>

#include <cstddef>

#include "symmpc/geometry.hpp"
#include "symmpc/rng.hpp"

namespace {

using namespace symmpc;

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    c.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  return c;
}

void BM_Knn(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = random_cloud(n, 1);
  const PointCloud b = random_cloud(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(knn(a, b, 16));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Knn)->Arg(256)->Arg(1024)->Arg(4096);

void BM_ChamferL1(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = random_cloud(n, 3);
  const PointCloud b = random_cloud(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer_l1(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_ChamferL1)->Arg(256)->Arg(1024)->Arg(4096);

void BM_Fps(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = random_cloud(n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(fps(a, n / 4, 0));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Fps)->Arg(256)->Arg(1024)->Arg(4096);

void BM_Reflect(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const PointCloud a = random_cloud(n, 6);
  const Vec3 normal{0.3, -0.5, 0.8};
  for (auto _ : state) benchmark::DoNotOptimize(reflect_about_plane(a, normal));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Reflect)->Arg(1024)->Arg(16384);

} // namespace

BENCHMARK_MAIN();
