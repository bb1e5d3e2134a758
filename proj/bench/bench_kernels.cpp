// Serial reference kernels against their OpenMP versions.
#include <benchmark/benchmark.h>

#include <vector>

#include "ramp/kernels.hpp"
#include "ramp/rng.hpp"

using namespace ramp;

namespace {

Eigen::MatrixXd radiation(int days, int n) {
  Rng rng(11);
  Eigen::MatrixXd v(days, n);
  for (int t = 0; t < days; ++t)
    for (int j = 0; j < n; ++j) v(t, j) = 1000.0 * rng.uniform();
  return v;
}

// Random binary histories over m features with an always-on intercept.
kernels::SparseRows histories(int rows, int m, double density) {
  Rng rng(12);
  kernels::SparseRows r;
  r.cols = m;
  std::vector<int> active;
  for (int i = 0; i < rows; ++i) {
    active.assign(1, 0);
    for (int j = 1; j < m; ++j)
      if (rng.uniform() < density) active.push_back(j);
    r.add(active);
  }
  return r;
}

void BM_QuantileSerial(benchmark::State& state) {
  const auto v = radiation(365, 48);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::quantile_bands_serial(v, 30, 0.0005));
}
void BM_QuantileOmp(benchmark::State& state) {
  const auto v = radiation(365, 48);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::quantile_bands_omp(v, 30, 0.0005));
}

void BM_GramSerial(benchmark::State& state) {
  const auto rows = histories(static_cast<int>(state.range(0)), 301, 0.05);
  std::vector<double> w(rows.rows(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::gram_serial(rows, w));
}
void BM_GramOmp(benchmark::State& state) {
  const auto rows = histories(static_cast<int>(state.range(0)), 301, 0.05);
  std::vector<double> w(rows.rows(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::gram_omp(rows, w));
}

void nll_bench(benchmark::State& state, bool parallel) {
  const int P = static_cast<int>(state.range(0));
  const auto rows = histories(P, 301, 0.05);
  Eigen::MatrixXd counts(P, 2);
  for (int i = 0; i < P; ++i) counts.row(i) << (i % 3 ? 1.0 : 0.0), (i % 3 ? 0.0 : 1.0);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 301);
  x(0, 0) = 0.3;
  for (auto _ : state) {
    auto r = parallel ? kernels::nll_omp(rows, counts, P, x) : kernels::nll_serial(rows, counts, P, x);
    benchmark::DoNotOptimize(r.loss);
  }
}
void BM_NllSerial(benchmark::State& state) { nll_bench(state, false); }
void BM_NllOmp(benchmark::State& state) { nll_bench(state, true); }

}  // namespace

BENCHMARK(BM_QuantileSerial);
BENCHMARK(BM_QuantileOmp);
BENCHMARK(BM_GramSerial)->Arg(365)->Arg(4096);
BENCHMARK(BM_GramOmp)->Arg(365)->Arg(4096);
BENCHMARK(BM_NllSerial)->Arg(365)->Arg(4096);
BENCHMARK(BM_NllOmp)->Arg(365)->Arg(4096);

BENCHMARK_MAIN();
