#include "pcnsim/battery.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pcnsim/network.hpp"

namespace pcnsim {

LatencyCalibration battery_calibration(const BatteryConfig& config) {
    LatencyCalibration cal;
    cal.max_hops = config.estimator_max_hops;
    for (const auto& c : config.classes) {
        cal.classes.push_back(HopClass{c.name, static_cast<double>(c.hop_mean()) / kSecond,
                                       std::sqrt(2.0) * static_cast<double>(c.jitter_stddev) / kSecond});
    }
    return cal;
}

Scenario chain_scenario(const BatteryConfig& config, const std::vector<int>& hop_classes, std::uint64_t seed) {
    Scenario s;
    s.name = "battery-chain";
    s.seed = seed;
    s.fulfill_delay = config.fulfill_delay;
    const std::size_t k = hop_classes.size();
    s.nodes.push_back({"sender", 1 * kMillisecond});
    s.nodes.push_back({"observer", 1 * kMillisecond});
    for (std::size_t i = 0; i < k; ++i)
        s.nodes.push_back({"h" + std::to_string(i + 1), config.classes.at(hop_classes[i]).processing_delay});

    const Msat cap = 2'000'000'000;
    auto add_channel = [&](std::uint32_t a, std::uint32_t b) {
        ChannelSpec c;
        c.name = "c" + std::to_string(a) + "_" + std::to_string(b);
        c.a = NodeId{a};
        c.b = NodeId{b};
        c.capacity = cap;
        c.balance_ab = cap / 2;
        c.balance_ba = cap / 2;
        s.channels.push_back(c);
    };
    add_channel(0, 1);
    s.links.push_back({NodeId{0}, NodeId{1}, 1 * kMillisecond, 0});
    for (std::size_t i = 0; i < k; ++i) {
        const auto a = static_cast<std::uint32_t>(i + 1);
        add_channel(a, a + 1);
        const LinkClass& lc = config.classes.at(hop_classes[i]);
        s.links.push_back({NodeId{a}, NodeId{a + 1}, lc.one_way_latency, lc.jitter_stddev});
    }
    s.validate();
    return s;
}

BatteryRun run_battery_case(const BatteryConfig& config, int index) {
    if (config.classes.empty()) throw Error("battery needs at least one link class");
    if (config.min_hops < 1 || config.max_hops < config.min_hops) throw Error("battery hop range invalid");
    const std::uint64_t run_seed = derive_seed(config.seed, static_cast<std::uint64_t>(index));
    Rng rng(run_seed);

    BatteryRun run;
    run.index = index;
    const int span = config.max_hops - config.min_hops + 1;
    const int hops = config.min_hops + index % span;
    std::vector<int> hop_classes;
    std::uniform_int_distribution<int> pick(0, static_cast<int>(config.classes.size()) - 1);
    for (int i = 0; i < hops; ++i) hop_classes.push_back(pick(rng));
    run.truth.assign(config.classes.size(), 0);
    for (int c : hop_classes) ++run.truth[c];

    Network net(chain_scenario(config, hop_classes, run_seed));
    const NodeId sender{0};
    const NodeId observer{1};
    const NodeId destination{static_cast<std::uint32_t>(hops + 1)};
    const Invoice inv = net.create_invoice(destination, 1000, "battery");
    const PaymentOutcome o = net.pay(sender, inv);
    if (o.kind != OutcomeKind::success) throw Error("battery payment failed");

    const auto samples = record(observer, net.trace());
    if (samples.size() != 1) throw Error("battery expected exactly one observed sample");
    run.delta = samples.front().delta();
    const HopEstimate est = estimate_remaining_hops(samples.front().delta_seconds(), battery_calibration(config));
    run.estimated = est.best;
    run.correct = est.best == run.truth;
    return run;
}

std::vector<BatteryRun> run_battery_serial(const BatteryConfig& config) {
    std::vector<BatteryRun> out(static_cast<std::size_t>(config.runs));
    for (int i = 0; i < config.runs; ++i) out[i] = run_battery_case(config, i);
    return out;
}

std::vector<BatteryRun> run_battery_parallel(const BatteryConfig& config) {
    std::vector<BatteryRun> out(static_cast<std::size_t>(config.runs));
    std::vector<std::string> errors(out.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < config.runs; ++i) {
        try {
            out[i] = run_battery_case(config, i);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw Error(e);
    return out;
}

double battery_accuracy(const std::vector<BatteryRun>& runs) {
    if (runs.empty()) return 0.0;
    std::size_t ok = 0;
    for (const auto& r : runs) ok += r.correct ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(runs.size());
}

int parallel_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace pcnsim
