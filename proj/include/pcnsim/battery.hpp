// Hop-estimator battery: many independent chain simulations, each placing the
// observer a known number of hops (of known latency classes) away from the
// payment destination, then checking what the estimator recovers.
//
// run_battery_parallel distributes runs over OpenMP threads; run_battery_serial
// is the reference. Both return identical results for the same config.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcnsim/scenario.hpp"
#include "pcnsim/timing.hpp"

namespace pcnsim {

struct LinkClass {
    std::string name;
    VirtualTime one_way_latency = 50 * kMillisecond;
    VirtualTime jitter_stddev = 0;
    VirtualTime processing_delay = 1 * kMillisecond;

    /// Expected settlement time contributed by one hop of this class.
    VirtualTime hop_mean() const { return 2 * one_way_latency + processing_delay; }
};

struct BatteryConfig {
    std::vector<LinkClass> classes;
    int runs = 100;
    int min_hops = 1;
    int max_hops = 4;
    std::uint64_t seed = 1;
    DelayRange fulfill_delay;  // countermeasure applied at every node
    int estimator_max_hops = 6;
};

struct BatteryRun {
    int index = 0;
    std::vector<int> truth;  // count per class
    std::vector<int> estimated;
    VirtualTime delta = 0;
    bool correct = false;

    bool operator==(const BatteryRun&) const = default;
};

/// Configured calibration: mean 2L + p, stddev sqrt(2) * jitter per class.
LatencyCalibration battery_calibration(const BatteryConfig& config);

/// Chain sender -> observer -> h1 -> ... -> hk; `hop_classes[i]` is the class of hop i after the observer.
Scenario chain_scenario(const BatteryConfig& config, const std::vector<int>& hop_classes, std::uint64_t seed);

BatteryRun run_battery_case(const BatteryConfig& config, int index);
std::vector<BatteryRun> run_battery_serial(const BatteryConfig& config);
std::vector<BatteryRun> run_battery_parallel(const BatteryConfig& config);
double battery_accuracy(const std::vector<BatteryRun>& runs);

/// Number of OpenMP threads available (1 when built without OpenMP).
int parallel_threads();

}  // namespace pcnsim
