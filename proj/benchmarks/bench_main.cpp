// Microbenchmarks for the hot paths: enumeration, measure assembly, ladder
// solves, test-object construction and the exact-clock simulator.
#include <benchmark/benchmark.h>

#include "incap/contraction.hpp"
#include "incap/hierarchy.hpp"
#include "incap/ladder.hpp"
#include "incap/measure.hpp"
#include "incap/sandwich.hpp"
#include "incap/simulate.hpp"
#include "incap/test_flow.hpp"
#include "incap/test_function.hpp"

using namespace incap;

namespace {

SiteGraph path5() {
  return build_site_graph({"x", "a", "b", "c", "y"},
                          {{"x", "a", 1.0},
                           {"a", "x", 2.0},
                           {"a", "b", 1.0},
                           {"b", "a", 1.0},
                           {"b", "c", 1.0},
                           {"c", "b", 1.0},
                           {"c", "y", 2.0},
                           {"y", "c", 1.0}});
}

void BM_EnumerateAndMeasure(benchmark::State& state) {
  SiteGraph g = path5();
  int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    ConfigSpace cs = ConfigSpace::enumerate(g, n, 0.05);
    MeasureTable mt = stationary_measure(cs);
    benchmark::DoNotOptimize(mt.log_z);
  }
  state.SetItemsProcessed(state.iterations() * composition_count(n, 5));
}
BENCHMARK(BM_EnumerateAndMeasure)->Arg(20)->Arg(40);

void BM_RankUnrank(benchmark::State& state) {
  SiteGraph g = path5();
  ConfigSpace cs = ConfigSpace::enumerate(g, 40, 0.05);
  Occupation occ;
  Index i = 0;
  for (auto _ : state) {
    cs.unrank_into(i, occ);
    benchmark::DoNotOptimize(cs.rank(occ));
    i = (i + 9973) % cs.size();
  }
}
BENCHMARK(BM_RankUnrank);

void BM_ExactCapacity(benchmark::State& state) {
  SiteGraph g = path5();
  int n = static_cast<int>(state.range(0));
  ConfigSpace cs = ConfigSpace::enumerate(g, n, 0.05);
  MeasureTable mt = stationary_measure(cs);
  ReversibleChain chain = chain_from(cs, mt);
  Occupation ax(5, 0), ay(5, 0);
  ax[0] = n;
  ay[4] = n;
  int ix = static_cast<int>(cs.rank(ax)), iy = static_cast<int>(cs.rank(ay));
  for (auto _ : state) {
    PotentialSolution sol = equilibrium_potential(chain, {ix}, {iy});
    benchmark::DoNotOptimize(sol.cap);
  }
}
BENCHMARK(BM_ExactCapacity)->Arg(16)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_ResolventSolve(benchmark::State& state) {
  SiteGraph g = path5();
  ContractedGraph c = contract_graph(g, 0, 4);
  int depth = static_cast<int>(state.range(0));
  for (auto _ : state) {
    ResolventSolution sol = solve_resolvent(g, c, depth, 0.8);
    benchmark::DoNotOptimize(sol.residual);
  }
}
BENCHMARK(BM_ResolventSolve)->Arg(80)->Arg(320)->Unit(benchmark::kMillisecond);

void BM_TestFunctionSweep(benchmark::State& state) {
  SiteGraph g = path5();
  ContractedGraph c = contract_graph(g, 0, 4);
  int n = 24;
  ResolventSolution sol = solve_resolvent(g, c, n, 0.8);
  TestFunction f(g, c, sol, n, 0.05);
  ConfigSpace cs = ConfigSpace::enumerate(g, n, 0.05);
  MeasureTable mt = stationary_measure(cs);
  for (auto _ : state) {
    DirichletBreakdown br = dirichlet_of_test_function(cs, mt, f);
    benchmark::DoNotOptimize(br.total);
  }
  state.SetItemsProcessed(state.iterations() * cs.size());
}
BENCHMARK(BM_TestFunctionSweep)->Unit(benchmark::kMillisecond);

void BM_TestFlowAssembly(benchmark::State& state) {
  SiteGraph g = path5();
  ContractedGraph c = contract_graph(g, 0, 4);
  ResolventSolution sol = solve_resolvent(g, c, 6, 0.8);
  for (auto _ : state) {
    TestFlow psi = build_test_flow(g, c, sol, 40);
    benchmark::DoNotOptimize(psi.source_value);
  }
}
BENCHMARK(BM_TestFlowAssembly)->Unit(benchmark::kMillisecond);

void BM_SimulatorEvents(benchmark::State& state) {
  SiteGraph g = path5();
  ConfigSpace cs = ConfigSpace::enumerate(g, 12, 0.3);
  MetastableHierarchy h = metastable_hierarchy(g);
  Occupation ax(5, 0);
  ax[0] = 12;
  Index start = cs.rank(ax);
  SimConfig cfg;
  cfg.replicas = 1;
  std::uint64_t seed = 1;
  for (auto _ : state) {
    cfg.seed = seed++;
    CensusResult census = timescale_census(cs, h, start, 2000.0, 0.0, cfg);
    benchmark::DoNotOptimize(census.projected.size());
  }
}
BENCHMARK(BM_SimulatorEvents)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
