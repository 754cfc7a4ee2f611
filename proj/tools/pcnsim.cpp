// pcnsim: run probing / timing experiments over a scenario file.

#include <cmath>
#include <iostream>

#include "CLI11.hpp"
#include "pcnsim/experiment.hpp"
#include "pcnsim/network.hpp"

using namespace pcnsim;

namespace {

VirtualTime ms_to_time(double ms) { return static_cast<VirtualTime>(std::llround(ms * kMillisecond)); }

DelayRange parse_delay_range(const std::string& text) {
    const auto comma = text.find(',');
    try {
        if (comma == std::string::npos) return DelayRange{0, ms_to_time(std::stod(text))};
        return DelayRange{ms_to_time(std::stod(text.substr(0, comma))), ms_to_time(std::stod(text.substr(comma + 1)))};
    } catch (const std::logic_error&) {
        throw Error("bad --fulfill-delay-ms '" + text + "' (expected MAX or MIN,MAX)");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Payment channel network simulator: balance probing and HTLC timing experiments"};

    std::string scenario_path, attack = "both", seeds_text, out_dir = "out", lock_mode, fulfill_delay, dump_node;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> threshold;
    std::optional<double> monitor_interval_s, jitter_ms;
    bool serial = false;

    app.add_option("--scenario", scenario_path, "Scenario file (YAML)")->required()->check(CLI::ExistingFile);
    app.add_option("--attack", attack, "probe | timing | both")->check(CLI::IsMember({"probe", "timing", "both"}));
    app.add_option("--seed", seed, "Single seed (defaults to the scenario's seed)");
    app.add_option("--seeds", seeds_text, "Seed list, e.g. 1,2,5-8");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--threshold-msat", threshold, "Probe precision threshold (default 1000)");
    app.add_option("--monitor-interval", monitor_interval_s, "Monitoring interval in seconds (default 5)");
    app.add_option("--lock-mode", lock_mode, "release | held")->check(CLI::IsMember({"release", "held"}));
    app.add_option("--fulfill-delay-ms", fulfill_delay, "Fulfill-delay countermeasure: MAX or MIN,MAX in ms");
    app.add_option("--jitter", jitter_ms, "Override per-link jitter stddev (ms)");
    app.add_flag("--serial", serial, "Run seeds one after another instead of in parallel");
    app.add_option("--dump-gossip", dump_node, "Print NODE's gossip view after bootstrap and exit");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!dump_node.empty()) {
            const Scenario s = load_scenario(scenario_path);
            Network net(s);
            const auto node = s.node(dump_node);
            std::cout << net.gossip().dump(node, [&](NodeId n) { return s.node_name(n); });
            return 0;
        }

        ExperimentSpec spec;
        spec.scenario_path = scenario_path;
        spec.attack = parse_attack_kind(attack);
        spec.out_dir = out_dir;
        spec.parallel = !serial;
        if (!seeds_text.empty()) spec.seeds = parse_seed_list(seeds_text);
        if (seed) spec.seeds.push_back(*seed);
        auto& o = spec.overrides;
        if (threshold) o.threshold = *threshold;
        if (monitor_interval_s) o.monitor_interval = static_cast<VirtualTime>(std::llround(*monitor_interval_s * kSecond));
        if (!lock_mode.empty()) o.lock_mode = parse_lock_mode(lock_mode);
        if (!fulfill_delay.empty()) o.fulfill_delay = parse_delay_range(fulfill_delay);
        if (jitter_ms) o.jitter = ms_to_time(*jitter_ms);

        const ExperimentReport report = run_experiment(spec);
        std::cout << summary_text(report);
        for (const auto& r : report.runs)
            if (!r.ok) std::cerr << "seed " << r.seed << ": " << r.error << '\n';
        return report.any_error() ? 1 : 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
