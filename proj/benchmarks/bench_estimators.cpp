#include <benchmark/benchmark.h>

#include "shortlong/density_ratio.hpp"
#include "shortlong/estimators.hpp"
#include "shortlong/stats.hpp"
#include "shortlong/synthetic.hpp"

namespace {

using namespace shortlong;

ToyConfig toy(std::size_t n) {
  ToyConfig c;
  c.n_behavior = n;
  c.seed = 17;
  return c;
}

RatioConfig lenient() {
  RatioConfig r;
  r.options.strict_coverage = false;
  return r;
}

void BM_ToySample(benchmark::State& state) {
  const auto c = toy(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sample_behavior(c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ToySample)->Arg(5000)->Arg(50000);

void BM_HistogramRatio(benchmark::State& state) {
  const auto c = toy(static_cast<std::size_t>(state.range(0)));
  const auto b = sample_behavior(c);
  const auto e = sample_target(c).data;
  const auto grid = BinGrid::toy_default();
  for (auto _ : state) benchmark::DoNotOptimize(fit_histogram_ratio(b, e, grid, lenient().options));
}
BENCHMARK(BM_HistogramRatio)->Arg(5000)->Arg(50000);

void BM_WeightedLeastSquares(benchmark::State& state) {
  const auto b = sample_behavior(toy(static_cast<std::size_t>(state.range(0))));
  const std::vector<double> w(b.size(), 0.5);
  const auto features = toy_quadratic_features();
  for (auto _ : state) benchmark::DoNotOptimize(fit_least_squares(b, features, w));
}
BENCHMARK(BM_WeightedLeastSquares)->Arg(5000)->Arg(50000);

void BM_DrEstimate(benchmark::State& state) {
  const auto c = toy(static_cast<std::size_t>(state.range(0)));
  const auto b = sample_behavior(c);
  const auto e = sample_target(c).data;
  RegressorConfig r;
  r.features = toy_quadratic_features();
  DrOptions o;
  o.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_dr(b, e, r, lenient(), o));
}
BENCHMARK(BM_DrEstimate)->Arg(5000)->Arg(50000)->Unit(benchmark::kMillisecond);

void BM_TTest(benchmark::State& state) {
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<double>(i % 17);
    y[i] = static_cast<double>(i % 13) + 0.3;
  }
  for (auto _ : state) benchmark::DoNotOptimize(t_test_independent(x, y));
}
BENCHMARK(BM_TTest)->Arg(100)->Arg(10000);

}  // namespace
