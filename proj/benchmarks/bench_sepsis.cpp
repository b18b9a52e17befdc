#include <benchmark/benchmark.h>

#include "shortlong/sepsis.hpp"

namespace {

using namespace shortlong;

const MdpSpec& spec() {
  static const MdpSpec s = build_default_spec(0);
  return s;
}

void BM_BuildSpec(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_default_spec(1));
}
BENCHMARK(BM_BuildSpec)->Unit(benchmark::kMillisecond);

void BM_PolicyIteration(benchmark::State& state) {
  const int actions = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(policy_iteration_solution(spec(), actions));
}
BENCHMARK(BM_PolicyIteration)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_DiscountedValueIteration(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(discounted_value_iteration(spec(), 8));
}
BENCHMARK(BM_DiscountedValueIteration)->Unit(benchmark::kMillisecond);

void BM_ExactPolicyValue(benchmark::State& state) {
  const auto pe = soften(policy_iteration(spec(), 8), 0.15);
  for (auto _ : state) benchmark::DoNotOptimize(exact_policy_value(spec(), pe));
}
BENCHMARK(BM_ExactPolicyValue)->Unit(benchmark::kMillisecond);

void BM_Rollout(benchmark::State& state) {
  const auto pb = soften(policy_iteration(spec(), 4), 0.15);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(rollout_behavior(spec(), pb, n, 2, 5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Rollout)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace
