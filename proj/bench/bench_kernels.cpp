// Serial reference vs. OpenMP kernels. Arg(0) = serial, Arg(1) = OpenMP.
#include <cmath>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "evtrack/kernels.hpp"

using namespace evtrack::kernels;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::kParallel : Exec::kSerial; }

std::vector<double> uniform(std::size_t n, double lo, double hi, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void BM_Rasterize(benchmark::State& state) {
  const std::vector<RasterShape> shapes = {{ShapeKind::kCross, 89.0, 64.0, 6, 0.0, 0.9},
                                           {ShapeKind::kTriangle, 45.0, 96.9, 9, 0.0, 0.9},
                                           {ShapeKind::kCircle, 39.0, 20.7, 4, 0.0, 0.9}};
  std::vector<double> out(128 * 128);
  for (auto _ : state) {
    rasterize(exec_of(state), shapes, 128, 128, 0.2, 4, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * 128 * 128);
}

void BM_LifUpdate(benchmark::State& state) {
  const std::size_t n = 800;
  LifConstants c;
  c.trace_decay = std::exp(-1e-3 / 0.2);
  c.trace_increment = 5.0;
  auto u = uniform(n, 0.0, 1.0, 1);
  const auto current = uniform(n, 0.0, 3.0, 2);
  std::vector<int> refractory(n, 0);
  std::vector<std::uint8_t> silenced(n, 0), spikes(n, 0);
  std::vector<double> trace(n, 0.0);
  for (auto _ : state) {
    lif_update(exec_of(state), c, u, refractory, current, silenced, spikes, trace);
    benchmark::DoNotOptimize(trace.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_Gemv(benchmark::State& state) {
  const int n = 800;
  RowMajorMatrix w = RowMajorMatrix::Random(n, n);
  const auto x = uniform(n, -1.0, 1.0, 3);
  std::vector<double> y(n);
  for (auto _ : state) {
    gemv(exec_of(state), w, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}

void BM_LogQuantize(benchmark::State& state) {
  const std::size_t n = 128 * 128;
  const auto lum = uniform(n, 0.0, 1.0, 4);
  const auto ref = uniform(n, -3.0, 0.0, 5);
  std::vector<int> counts(n);
  for (auto _ : state) {
    log_quantize(exec_of(state), lum, ref, 0.15, 1e-3, counts);
    benchmark::DoNotOptimize(counts.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_Scale(benchmark::State& state) {
  auto v = uniform(128 * 128, 0.0, 1.0, 6);
  for (auto _ : state) {
    scale(exec_of(state), v, 0.999);
    benchmark::DoNotOptimize(v.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(v.size()));
}

}  // namespace

BENCHMARK(BM_Rasterize)->ArgName("omp")->Arg(0)->Arg(1);
BENCHMARK(BM_LifUpdate)->ArgName("omp")->Arg(0)->Arg(1);
BENCHMARK(BM_Gemv)->ArgName("omp")->Arg(0)->Arg(1);
BENCHMARK(BM_LogQuantize)->ArgName("omp")->Arg(0)->Arg(1);
BENCHMARK(BM_Scale)->ArgName("omp")->Arg(0)->Arg(1);

BENCHMARK_MAIN();
