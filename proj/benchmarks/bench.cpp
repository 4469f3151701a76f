#include <benchmark/benchmark.h>

#include <proxmsm/bridges.hpp>
#include <proxmsm/dgm.hpp>
#include <proxmsm/estimators.hpp>
#include <proxmsm/oracle.hpp>

using namespace proxmsm;

namespace {

const PanelDataset& bench_data(Eigen::Index n) {
    static const PanelDataset d4k = simulate(DgmParams{}, 4000, 1);
    static const PanelDataset d32k = simulate(DgmParams{}, 32000, 1);
    return n <= 4000 ? d4k : d32k;
}

void BM_Simulate(benchmark::State& state) {
    const Eigen::Index n = state.range(0);
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(simulate(DgmParams{}, n, ++seed));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Simulate)->Arg(4000)->Arg(32000);

void BM_FitHBridges(benchmark::State& state) {
    const PanelDataset& d = bench_data(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(fit_h_bridges(d));
}
BENCHMARK(BM_FitHBridges)->Arg(4000)->Arg(32000);

void BM_FitQBridges(benchmark::State& state) {
    const PanelDataset& d = bench_data(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(fit_q_bridges(d));
}
BENCHMARK(BM_FitQBridges)->Arg(4000)->Arg(32000);

void BM_EstimatePdr(benchmark::State& state) {
    const PanelDataset& d = bench_data(state.range(0));
    const HBridgeFit h = fit_h_bridges(d);
    const QBridgeFit q = fit_q_bridges(d);
    const MsmmSpec spec = MsmmSpec::cumulative();
    for (auto _ : state) benchmark::DoNotOptimize(estimate_pdr(d, h, d, q, spec));
}
BENCHMARK(BM_EstimatePdr)->Arg(4000);

void BM_EstimateDrSra(benchmark::State& state) {
    const PanelDataset& d = bench_data(state.range(0));
    const MsmmSpec spec = MsmmSpec::cumulative();
    for (auto _ : state) benchmark::DoNotOptimize(estimate_dr_sra(d, spec));
}
BENCHMARK(BM_EstimateDrSra)->Arg(4000);

void BM_OracleVerify(benchmark::State& state) {
    const DiscreteWorld w = random_complete_world(7);
    for (auto _ : state) benchmark::DoNotOptimize(verify_identification(w));
}
BENCHMARK(BM_OracleVerify);

}  // namespace

BENCHMARK_MAIN();
