// Microbenchmarks of the differentiation paths on synthetic cases.
//
//   lmesens_bench --benchmark_filter=Reverse
//
// Each case is solved and its KKT system assembled once, outside the timed
// loops; the LME benchmarks time one evaluation from that starting point.

#include <benchmark/benchmark.h>

#include <map>
#include <tuple>

#include "lmesens/central.hpp"
#include "lmesens/decentral.hpp"

namespace {

using namespace lmesens;

struct Prepared {
  DispatchCase c;
  DispatchSolution sol;
  KktSystem kkt;
};

const Prepared& prepared(Index nodes, Index batteries, Index horizon) {
  static std::map<std::tuple<Index, Index, Index>, Prepared> cache;
  const auto key = std::make_tuple(nodes, batteries, horizon);
  auto it = cache.find(key);
  if (it == cache.end()) {
    DispatchCase c = generate_synthetic(nodes, batteries, horizon, 1);
    DispatchSolution sol = solve_dispatch(c);
    KktSystem kkt = assemble_kkt(c, sol, 1e-6);
    it = cache.emplace(key, Prepared{std::move(c), std::move(sol), std::move(kkt)}).first;
  }
  return it->second;
}

void set_counters(benchmark::State& state, const Prepared& p) {
  state.counters["L"] = double(p.kkt.dim_l);
  state.counters["NT"] = double(p.c.n_nodes() * p.c.horizon);
}

void CentralReverse(benchmark::State& state) {
  const Prepared& p = prepared(state.range(0), 2, state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(lme_reverse_central(p.c, p.sol, p.kkt).lambda.data());
  set_counters(state, p);
}

void CentralForward(benchmark::State& state) {
  const Prepared& p = prepared(state.range(0), 2, state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(lme_forward_central(p.c, p.sol, p.kkt).lambda.data());
  set_counters(state, p);
}

void DecentralReverse(benchmark::State& state) {
  const Prepared& p = prepared(state.range(0), 2, state.range(1));
  const DecentralOptions opt{1e-6, 1e-8, std::size_t(state.range(2))};
  for (auto _ : state) benchmark::DoNotOptimize(lme_reverse_decentral(p.c, p.sol, opt).lambda.data());
  set_counters(state, p);
}

void DecentralForward(benchmark::State& state) {
  const Prepared& p = prepared(state.range(0), 2, state.range(1));
  const DecentralOptions opt{1e-6, 1e-8, 1};
  for (auto _ : state) benchmark::DoNotOptimize(lme_forward_decentral(p.c, p.sol, opt).lambda.data());
  set_counters(state, p);
}

void AssembleKkt(benchmark::State& state) {
  const Prepared& p = prepared(state.range(0), 2, state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_kkt(p.c, p.sol, 1e-6).d1F.nonZeros());
  set_counters(state, p);
}

void SolveDispatch(benchmark::State& state) {
  const DispatchCase c = generate_synthetic(state.range(0), 2, state.range(1), 1);
  for (auto _ : state) benchmark::DoNotOptimize(solve_dispatch(c).objective_value);
}

BENCHMARK(CentralReverse)->ArgsProduct({{20, 50}, {24, 96}})->Unit(benchmark::kMillisecond);
BENCHMARK(CentralForward)->Args({20, 24})->Args({50, 48})->Unit(benchmark::kMillisecond);
BENCHMARK(DecentralReverse)->ArgsProduct({{20, 50}, {24, 96}, {1, 4}})->Unit(benchmark::kMillisecond);
BENCHMARK(DecentralForward)->Args({20, 24})->Args({50, 48})->Unit(benchmark::kMillisecond);
BENCHMARK(AssembleKkt)->Args({50, 96})->Unit(benchmark::kMillisecond);
BENCHMARK(SolveDispatch)->Args({20, 24})->Args({50, 48})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
