#include <numeric>

#include <benchmark/benchmark.h>

#include "oppsched/drift.hpp"
#include "oppsched/kernels.hpp"
#include "oppsched/simulator.hpp"

using namespace oppsched;

namespace {

// Grid-like kernel: each state feeds itself and up to four neighbours.
SparseKernel grid_kernel(std::size_t side) {
    const std::size_t n = side * side;
    SparseKernel k;
    k.size = n;
    k.offsets.push_back(0);
    for (std::size_t y = 0; y < n; ++y) {
        const std::size_t i = y % side, j = y / side;
        std::vector<std::size_t> src{y};
        if (i > 0) src.push_back(y - 1);
        if (i + 1 < side) src.push_back(y + 1);
        if (j > 0) src.push_back(y - side);
        if (j + 1 < side) src.push_back(y + side);
        for (auto s : src) {
            k.source.push_back(static_cast<std::uint32_t>(s));
            k.prob.push_back(0.2);
        }
        k.offsets.push_back(k.source.size());
    }
    return k;
}

void run_power_step(benchmark::State& state, Exec exec) {
    const auto k = grid_kernel(static_cast<std::size_t>(state.range(0)));
    std::vector<double> in(k.size, 1.0 / static_cast<double>(k.size)), out(k.size);
    for (auto _ : state) {
        benchmark::DoNotOptimize(power_step(k, in, out, exec));
        std::swap(in, out);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k.source.size()));
}

void BM_PowerStepSerial(benchmark::State& state) { run_power_step(state, Exec::Serial); }
void BM_PowerStepParallel(benchmark::State& state) { run_power_step(state, Exec::Parallel); }

void run_replications(benchmark::State& state, Exec exec) {
    const auto cfg = cdma::two_class(0.14);
    const Policy p(parse_policy("pi", "", 2), cfg);
    CostOptions o;
    o.horizon = 100'000;
    o.warmup = 10'000;
    o.replications = static_cast<int>(state.range(0));
    o.exec = exec;
    for (auto _ : state) benchmark::DoNotOptimize(estimate_mean_cost(cfg, p, o).mean_cost);
    state.SetItemsProcessed(state.iterations() * o.horizon * o.replications);
}

void BM_ReplicationsSerial(benchmark::State& state) { run_replications(state, Exec::Serial); }
void BM_ReplicationsParallel(benchmark::State& state) { run_replications(state, Exec::Parallel); }

void run_multid(benchmark::State& state, Exec exec) {
    const auto cfg = cdma::two_class(0.03, 0.02);
    const Policy p(parse_policy("cmu", "", 2), cfg);
    StationaryOptions o;
    o.exec = exec;
    for (auto _ : state) benchmark::DoNotOptimize(stationary_multid(p, cfg, ClassSet{true, true}, o).mass.data());
}

void BM_MultidSerial(benchmark::State& state) { run_multid(state, Exec::Serial); }
void BM_MultidParallel(benchmark::State& state) { run_multid(state, Exec::Parallel); }

}  // namespace

BENCHMARK(BM_PowerStepSerial)->Arg(256)->Arg(1024);
BENCHMARK(BM_PowerStepParallel)->Arg(256)->Arg(1024)->UseRealTime();
BENCHMARK(BM_ReplicationsSerial)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReplicationsParallel)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MultidSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MultidParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

int main(int argc, char** argv) {
    apply_thread_cap_from_env();
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
