// Serial reference vs OpenMP variant for the grid kernels and candidate scoring.
// Sizes are square grid edges in cells.

#include "sat/kernels.hpp"
#include "sat/planning.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace sat;

namespace {

std::vector<double> random_belief(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> p(n);
  for (auto& x : p) x = u(gen);
  return p;
}

template <bool Parallel>
void BM_Decay(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0) * state.range(0));
  const auto p_last = random_belief(n, 1);
  std::vector<double> last_seen(n, 0.0);
  std::vector<double> p(n);
  kernels::DecayArgs args{30.0, 1.0 / 90.0, true};
  for (auto _ : state) {
    if constexpr (Parallel) kernels::omp::decay(p, p_last, last_seen, args);
    else kernels::serial::decay(p, p_last, last_seen, args);
    benchmark::DoNotOptimize(p.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_Fuse(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0) * state.range(0));
  std::vector<std::vector<double>> beliefs, seen;
  std::vector<kernels::FuseSource> sources;
  for (unsigned k = 0; k < 4; ++k) {
    beliefs.push_back(random_belief(n, 10 + k));
    seen.emplace_back(n, 1.0);
  }
  for (unsigned k = 0; k < 4; ++k) sources.push_back({beliefs[k], seen[k], 0.25});
  std::vector<double> out(n);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::omp::fuse(sources, out);
    else kernels::serial::fuse(sources, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_Entropy(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  const GridMap map = GridMap::open(w, w);
  const auto p = random_belief(map.size(), 3);
  for (auto _ : state) {
    double h = Parallel ? kernels::omp::entropy(p, map) : kernels::serial::entropy(p, map);
    benchmark::DoNotOptimize(h);
  }
}

template <bool Parallel>
void BM_ScoreCandidates(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  const GridMap map = GridMap::open(w, w);
  std::vector<double> p(map.size(), 0.5);
  // Explored lower half so frontiers line its edge.
  for (std::size_t i = map.size() / 2; i < map.size(); ++i) p[i] = 0.1;
  AgentState agent;
  agent.pose = Pose{w * 0.5, w * 0.25, 0.0};
  const auto frontiers = extract_frontiers(p, map);
  const auto base = gen_search_candidates(agent, frontiers, map);
  const auto gains = explore_gain_map(p, agent.sensor, map);
  const std::vector<TargetForecast> tracks;
  const std::vector<ReportEstimate> reports;
  const ScoreInputs in{gains, &tracks, &reports, 0.04, 0.0};
  for (auto _ : state) {
    auto cands = base;
    score_candidates(cands, in, agent.sensor, map, Parallel ? Exec::Parallel : Exec::Serial);
    benchmark::DoNotOptimize(cands.data());
  }
  state.counters["candidates"] = static_cast<double>(base.size());
}

}  // namespace

BENCHMARK(BM_Decay<false>)->Name("decay/serial")->Arg(50)->Arg(200);
BENCHMARK(BM_Decay<true>)->Name("decay/omp")->Arg(50)->Arg(200);
BENCHMARK(BM_Fuse<false>)->Name("fuse/serial")->Arg(50)->Arg(200);
BENCHMARK(BM_Fuse<true>)->Name("fuse/omp")->Arg(50)->Arg(200);
BENCHMARK(BM_Entropy<false>)->Name("entropy/serial")->Arg(50)->Arg(200);
BENCHMARK(BM_Entropy<true>)->Name("entropy/omp")->Arg(50)->Arg(200);
BENCHMARK(BM_ScoreCandidates<false>)->Name("score_candidates/serial")->Arg(50)->Arg(100);
BENCHMARK(BM_ScoreCandidates<true>)->Name("score_candidates/omp")->Arg(50)->Arg(100);

BENCHMARK_MAIN();
