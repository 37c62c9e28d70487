#include "pesin/markov.hpp"
#include "support.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace pesin;

namespace {

coding::ShiftGraph random_graph(int n, int degree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  coding::ShiftGraph g;
  g.out.resize(static_cast<std::size_t>(n));
  g.in.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    for (int k = 0; k < degree; ++k) {
      const int w = pick(rng);
      if (g.has_edge(v, w)) continue;
      g.out[static_cast<std::size_t>(v)].push_back(w);
      g.in[static_cast<std::size_t>(w)].push_back(v);
    }
  }
  return g;
}

void BM_CountPeriodicWords(benchmark::State& state) {
  const auto g = random_graph(static_cast<int>(state.range(0)), 3, 1);
  for (auto _ : state) benchmark::DoNotOptimize(markov::count_periodic_words(g, 60));
}
BENCHMARK(BM_CountPeriodicWords)->Arg(16)->Arg(64)->Arg(256);

void BM_EntropyEstimate(benchmark::State& state) {
  const auto g = random_graph(static_cast<int>(state.range(0)), 2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(markov::entropy_estimate(g, 60));
}
BENCHMARK(BM_EntropyEstimate)->Arg(64)->Arg(256);

void BM_GreedyQ(benchmark::State& state) {
  const auto cfg = charts::EpsilonConfig::make(0.01);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<long> draw(0, 900);
  std::vector<long> q(static_cast<std::size_t>(state.range(0)));
  for (auto& x : q) x = draw(rng);
  for (auto _ : state) benchmark::DoNotOptimize(charts::greedy_q(cfg, q, 10));
}
BENCHMARK(BM_GreedyQ)->Arg(1000)->Arg(100000);

void BM_GraphTransform(benchmark::State& state) {
  const auto map = testing::fixture();
  const auto ctx = testing::fixture_context();
  const auto v = testing::fixed_point_chart(map, ctx);
  std::mt19937_64 rng(4);
  const auto m = manifolds::random_manifold(ctx, v, manifolds::Kind::Unstable, rng);
  for (auto _ : state) benchmark::DoNotOptimize(manifolds::graph_transform_u(map, ctx, v, v, m));
}
BENCHMARK(BM_GraphTransform);

void BM_StableManifoldLimit(benchmark::State& state) {
  const auto map = testing::fixture();
  const auto ctx = testing::fixture_context();
  const std::vector<coding::DoubleChart> path(80, testing::fixed_point_chart(map, ctx));
  for (auto _ : state) benchmark::DoNotOptimize(manifolds::stable_manifold(map, ctx, path));
}
BENCHMARK(BM_StableManifoldLimit);

void BM_Refine(benchmark::State& state) {
  // Nested intervals of a line of points, each its own s- and u-fibre.
  const int n = static_cast<int>(state.range(0));
  markov::SetSystem sys;
  sys.points = static_cast<std::size_t>(n);
  for (int lo = 0; lo < n; lo += 4) {
    std::vector<int> set;
    for (int p = lo; p < std::min(n, lo + 12); ++p) set.push_back(p);
    std::vector<std::vector<int>> single;
    for (int p : set) single.push_back({p});
    sys.sets.push_back(set);
    sys.s_fibre.push_back(single);
    sys.u_fibre.push_back(single);
  }
  for (auto _ : state) benchmark::DoNotOptimize(markov::refine(sys));
}
BENCHMARK(BM_Refine)->Arg(256)->Arg(2048);

void BM_CoarseGrainFixture(benchmark::State& state) {
  const auto map = testing::fixture();
  const auto ctx = testing::fixture_context();
  geometry::PeriodicOrbit fixed;
  fixed.points = {geometry::PhasePoint{0, 0.0, 0.0}};
  const auto db = coding::build_centers(map, ctx, {}, {fixed});
  for (auto _ : state) benchmark::DoNotOptimize(coding::coarse_grain(map, ctx, db));
}
BENCHMARK(BM_CoarseGrainFixture);

}  // namespace

BENCHMARK_MAIN();
