// Microbenchmarks for the hot paths: market clearing, equilibrium iteration,
// the inverse LP in both solver shapes, and dataset generation.
#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "sfe/datagen.hpp"
#include "sfe/inverse.hpp"
#include "sfe/learning.hpp"
#include "sfe/market.hpp"
#include "sfe/rng.hpp"

namespace {

sfe::GameInstance full_instance(const sfe::MarketConfig& config, double demand, double fuel) {
    sfe::GameInstance inst;
    inst.config = config;
    inst.demand = demand;
    inst.fuel_price = fuel;
    inst.marginal_set.resize(config.n_suppliers);
    std::iota(inst.marginal_set.begin(), inst.marginal_set.end(), 0);
    return inst;
}

void BM_clear_market(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const sfe::GroundTruth truth = sfe::generate_market(n);
    sfe::Rng rng(17);
    sfe::BidVector bids(n);
    for (int i = 0; i < n; ++i) bids[i] = rng.uniform(5.0, 40.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sfe::clear_market(truth.config, bids, 75.0));
    }
}
BENCHMARK(BM_clear_market)->Arg(3)->Arg(10)->Arg(50);

void BM_nash_equilibrium(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const sfe::GroundTruth truth = sfe::generate_market(n);
    const sfe::GameInstance inst = full_instance(truth.config, 75.0, 20.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            sfe::nash_equilibrium(truth.thetas, inst, sfe::NashOptions{1e-8, 10000}));
    }
}
BENCHMARK(BM_nash_equilibrium)->Arg(2)->Arg(5)->Arg(10);

void BM_inverse_lp(benchmark::State& state) {
    const int n = 3;
    const int m = static_cast<int>(state.range(0));
    const sfe::GroundTruth truth = sfe::generate_market(n);
    const auto dataset =
        sfe::generate_observations(truth, m, sfe::ScenarioRanges{}, 0.01, 23);
    sfe::InverseOptions options;
    options.solver = state.range(1) == 0 ? sfe::InverseSolver::Reduced
                                         : sfe::InverseSolver::Simplex;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sfe::estimate_costs(dataset, truth.config, options));
    }
}
BENCHMARK(BM_inverse_lp)
    ->ArgsProduct({{25, 100}, {0, 1}})
    ->ArgNames({"m", "simplex"})
    ->Unit(benchmark::kMillisecond);

void BM_random_search(benchmark::State& state) {
    const sfe::GroundTruth truth = sfe::generate_market(5);
    const auto dataset =
        sfe::generate_observations(truth, 100, sfe::ScenarioRanges{}, 0.01, 31);
    sfe::SearchConfig sc;
    sc.max_iter = 10;
    sc.tolerance = 1e-12;  // run all iterations
    sc.master_seed = 4;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sfe::random_search(dataset, truth.config, sc));
    }
}
BENCHMARK(BM_random_search)->Unit(benchmark::kMillisecond);

void BM_generate_observations(benchmark::State& state) {
    const sfe::GroundTruth truth = sfe::generate_market(5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            sfe::generate_observations(truth, 200, sfe::ScenarioRanges{}, 0.01, 42));
    }
}
BENCHMARK(BM_generate_observations)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
