// Serial vs OpenMP-parallel kernels: the hop-estimator battery and multi-seed
// experiment runs.

#include <benchmark/benchmark.h>

#include "pcnsim/battery.hpp"
#include "pcnsim/experiment.hpp"

using namespace pcnsim;

namespace {

BatteryConfig bench_config() {
    BatteryConfig c;
    c.classes = {LinkClass{"local", 49500, 2 * kMillisecond, kMillisecond},
                 LinkClass{"network", 124500, 2 * kMillisecond, kMillisecond}};
    c.runs = 32;
    return c;
}

void BM_BatterySerial(benchmark::State& st) {
    const auto cfg = bench_config();
    for (auto _ : st) benchmark::DoNotOptimize(run_battery_serial(cfg));
}

void BM_BatteryParallel(benchmark::State& st) {
    const auto cfg = bench_config();
    for (auto _ : st) benchmark::DoNotOptimize(run_battery_parallel(cfg));
    st.counters["threads"] = parallel_threads();
}

const Scenario& fig2() {
    static const Scenario s = load_scenario(PCNSIM_SCENARIO_DIR "/fig2.scenario");
    return s;
}

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5, 6, 7, 8};

void BM_SeedsSerial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(run_seeds_serial(fig2(), AttackKind::probe, {}, kSeeds));
}

void BM_SeedsParallel(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(run_seeds_parallel(fig2(), AttackKind::probe, {}, kSeeds));
    st.counters["threads"] = parallel_threads();
}

}  // namespace

BENCHMARK(BM_BatterySerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatteryParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SeedsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SeedsParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
