// Experiment runner: one independent simulation per seed, with CSV outputs,
// summary statistics and a result index. Seeds run in parallel (OpenMP) or
// serially; the outputs are identical either way.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pcnsim/probe.hpp"
#include "pcnsim/scenario.hpp"
#include "pcnsim/timing.hpp"

namespace pcnsim {

enum class AttackKind { probe, timing, both };
AttackKind parse_attack_kind(const std::string& text);
const char* to_string(AttackKind k);

struct ExperimentOverrides {
    std::optional<Msat> threshold;
    std::optional<VirtualTime> monitor_interval;
    std::optional<LockMode> lock_mode;
    std::optional<DelayRange> fulfill_delay;
    std::optional<VirtualTime> jitter;  // applied to every link
};

struct ExperimentSpec {
    std::filesystem::path scenario_path;
    AttackKind attack = AttackKind::both;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path out_dir;
    ExperimentOverrides overrides;
    bool parallel = true;
};

struct ProbeRunResult {
    BalanceEstimate initial;
    Msat true_initial = 0;  // route bottleneck at the end of the initial bisection
    MonitorResult monitor;
    Msat true_final = 0;
    std::string probes_csv;
    std::string monitor_csv;
};

struct TimingRunResult {
    LatencyCalibration calibration;
    std::vector<TimingSample> samples;
    LatencySummary summary;
    HopEstimate mean_estimate;
    std::optional<IndependenceReport> independence;
    std::string samples_csv;
    std::string estimates_csv;
};

struct SeedRun {
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;
    std::optional<ProbeRunResult> probe;
    std::optional<TimingRunResult> timing;
    std::string trace_csv;
};

/// Ground truth: the largest amount `source` could deliver to `destination` over
/// the route getroute picks right now, given the true directed balances and fees.
Msat route_bottleneck(const Network& net, NodeId source, NodeId destination, const std::set<ChannelId>& excluded);

Scenario apply_overrides(Scenario scenario, const ExperimentOverrides& overrides, std::uint64_t seed);

/// One seed, no file IO. Errors are captured in the result.
SeedRun run_seed(const Scenario& base, AttackKind attack, const ExperimentOverrides& overrides, std::uint64_t seed);

std::vector<SeedRun> run_seeds_serial(const Scenario& base, AttackKind attack, const ExperimentOverrides& overrides,
                                      const std::vector<std::uint64_t>& seeds);
std::vector<SeedRun> run_seeds_parallel(const Scenario& base, AttackKind attack,
                                        const ExperimentOverrides& overrides,
                                        const std::vector<std::uint64_t>& seeds);

struct ExperimentReport {
    std::string scenario_name;
    AttackKind attack = AttackKind::both;
    std::vector<SeedRun> runs;
    bool any_error() const;
};

std::string summary_text(const ExperimentReport& report);
/// One JSON object per line, one line per (seed, metric).
std::string summary_jsonl(const ExperimentReport& report);
std::string index_json(const ExperimentReport& report);

/// Per-seed files relative to the output directory, with their contents.
std::map<std::string, std::string> report_files(const ExperimentReport& report);

/// Loads the scenario, runs every seed and writes all outputs under spec.out_dir.
ExperimentReport run_experiment(const ExperimentSpec& spec);

/// "1,2,5-8" -> {1,2,5,6,7,8}
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace pcnsim
