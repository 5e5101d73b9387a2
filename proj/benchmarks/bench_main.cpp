// Copyright 2026 The Flexicache Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "flexi/config.hpp"
#include "flexi/costmodel.hpp"
#include "flexi/metrics.hpp"
#include "flexi/rng.hpp"
#include "flexi/schedule.hpp"
#include "flexi/simulator.hpp"

namespace flexi {
namespace {

Tensor noise(int batch) {
  const std::vector<std::uint64_t> seeds = seed_range(0, static_cast<std::size_t>(batch));
  return noise_batch(seeds, UNetConfig{}.image);
}

void BM_ForwardFull(benchmark::State& state) {
  const UNet model(UNetConfig{});
  const Tensor x = noise(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model.forward_full(x, 500));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardFull)->Arg(1)->Arg(64);

void BM_ForwardPartial(benchmark::State& state) {
  const UNet model(UNetConfig{});
  const Tensor x = noise(64);
  const int branch = static_cast<int>(state.range(0));
  const FullOutput full = model.forward_full(x, 600);
  const CacheSlot slot{branch, full.junction[static_cast<std::size_t>(branch - 1)], 600, 0};
  for (auto _ : state) benchmark::DoNotOptimize(model.forward_partial(x, 500, slot));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardPartial)->DenseRange(1, 3);

void BM_RunPlan(benchmark::State& state) {
  const UNet model(UNetConfig{});
  const DdimSampler sampler;
  const Tensor x = noise(64);
  const StepPlan plan = expand(deepcache_uniform(50, static_cast<int>(state.range(0)), 1));
  for (auto _ : state) benchmark::DoNotOptimize(run_plan(model, plan, x, sampler));
}
BENCHMARK(BM_RunPlan)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_Frechet(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(1);
  const auto stats = [&] {
    Eigen::MatrixXd f(500, d);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.normal();
    return stats_from_features(f);
  };
  const FeatureStats a = stats(), b = stats();
  for (auto _ : state) benchmark::DoNotOptimize(frechet(a, b));
}
BENCHMARK(BM_Frechet)->Arg(32)->Arg(64);

void BM_KendallTau(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  for (auto _ : state) benchmark::DoNotOptimize(kendall_tau(a, b));
}
BENCHMARK(BM_KendallTau)->Arg(20)->Arg(300)->Arg(10000);

void BM_AverageMacs(benchmark::State& state) {
  const CostProfile profile{"ldm", 99.82, {{1, 4.42}}, 1};
  const ScheduleGenome g = deepcache_uniform(250, 5, 1);
  for (auto _ : state) benchmark::DoNotOptimize(average_macs(g, profile));
}
BENCHMARK(BM_AverageMacs);

}  // namespace
}  // namespace flexi

BENCHMARK_MAIN();
