// Microbenchmarks for the aggregation kernels over round-realistic shapes:
// m uploads of dimension d, unit-ish weights, Gaussian clusters.

#include <benchmark/benchmark.h>

#include "huberfl/adversary.hpp"
#include "huberfl/aggregation.hpp"
#include "huberfl/rng.hpp"

using namespace huberfl;

namespace {

UpdateSet make_updates(std::size_t m, std::size_t d) {
  Rng rng(12345);
  UpdateSet u;
  u.vectors.resize(m);
  u.weights.assign(m, 20);
  for (auto& v : u.vectors) {
    v.resize(d);
    for (double& x : v) x = rng.normal();
  }
  return u;
}

}  // namespace

static void BM_HuberCenter(benchmark::State& state) {
  UpdateSet u = make_updates(static_cast<std::size_t>(state.range(0)), 50);
  HuberParams p = HuberParams::uniform(1.0, u.count(), 1e-8);
  for (auto _ : state) {
    AggregationResult r = huber_center(u, p);
    benchmark::DoNotOptimize(r.center.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_HuberCenter)->RangeMultiplier(4)->Range(32, 512)->Complexity();

static void BM_WeiszfeldStep(benchmark::State& state) {
  UpdateSet u = make_updates(static_cast<std::size_t>(state.range(0)), 50);
  HuberParams p = HuberParams::uniform(1.0, u.count());
  Vector c(50, 0.0);
  for (auto _ : state) {
    Vector next = weiszfeld_step(c, u, p);
    benchmark::DoNotOptimize(next.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WeiszfeldStep)->RangeMultiplier(4)->Range(32, 2048)->Complexity();

static void BM_Krum(benchmark::State& state) {
  UpdateSet u = make_updates(static_cast<std::size_t>(state.range(0)), 50);
  const int q = static_cast<int>(state.range(0) / 5);
  for (auto _ : state) {
    Vector g = krum(u, q);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Krum)->RangeMultiplier(4)->Range(32, 512)->Complexity();

static void BM_CoordinateTrimmedMean(benchmark::State& state) {
  UpdateSet u = make_updates(static_cast<std::size_t>(state.range(0)), 50);
  for (auto _ : state) {
    Vector g = coordinate_trimmed_mean(u, 0.2);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CoordinateTrimmedMean)->RangeMultiplier(4)->Range(32, 2048)->Complexity();

static void BM_GeometricMedian(benchmark::State& state) {
  UpdateSet u = make_updates(static_cast<std::size_t>(state.range(0)), 50);
  for (auto _ : state) {
    MedianResult r = geometric_median(u);
    benchmark::DoNotOptimize(r.center.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GeometricMedian)->RangeMultiplier(4)->Range(32, 512)->Complexity();

static void BM_KrumAttackSearch(benchmark::State& state) {
  const std::size_t m = static_cast<std::size_t>(state.range(0));
  UpdateSet honest = make_updates(m, 50);
  AttackContext ctx = make_attack_context(honest);
  AttackSpec spec;
  spec.strategy = AttackStrategy::KrumAttack;
  for (std::size_t i = 0; i < m / 5; ++i) spec.byzantine.push_back(i * 5);
  const int q = static_cast<int>(spec.byzantine.size());
  for (auto _ : state) {
    KrumAttackResult r = krum_attack(ctx, spec, q);
    benchmark::DoNotOptimize(r.updates.vectors.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KrumAttackSearch)->RangeMultiplier(4)->Range(32, 512)->Complexity();

BENCHMARK_MAIN();
