// Passive timing observer.
//
// A forwarding node timestamps the update_add_htlc it sends downstream and the
// matching update_fulfill_htlc it gets back. The gap is the settlement latency
// of the remaining route, which is compared against per-hop-class latency
// calibrations to estimate how many hops are left to the destination.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "pcnsim/network.hpp"

namespace pcnsim {

struct TimingSample {
    HtlcId htlc;
    VirtualTime t_add_forwarded = 0;
    VirtualTime t_fulfill_received = 0;
    Msat amount = 0;

    VirtualTime delta() const { return t_fulfill_received - t_add_forwarded; }
    double delta_seconds() const { return static_cast<double>(delta()) / kSecond; }
};

/// Pairs every add `node` sent with the fulfill it received for the same HTLC.
/// Reads only the node's own message log.
std::vector<TimingSample> record(NodeId node, const Trace& trace);

struct LatencySummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n - 1)
    std::size_t n = 0;
};

LatencySummary summarize(std::span<const double> values);
/// Deltas in seconds.
LatencySummary summarize(const std::vector<TimingSample>& samples);
/// "μ = 0.4140, σ = 0.0500, n = 25"
std::string format_summary(const LatencySummary& s);

struct HopClass {
    std::string name;
    double mean = 0.0;    // seconds per hop (round trip incl. processing)
    double stddev = 0.0;  // seconds
};

struct LatencyCalibration {
    enum class Source { configured, measured };
    std::vector<HopClass> classes;
    int max_hops = 6;
    Source source = Source::configured;
};

struct HopEstimate {
    std::vector<int> best;  // count per calibration class
    int best_hops = 0;
    int interval_min = 0;  // hop totals of all compositions within 3 combined σ
    int interval_max = 0;
    double residual = 0.0;  // seconds, |delta - best mean|
    std::vector<std::vector<int>> plausible;
};

/// Best-fitting hop composition (counts per class, 1..max_hops hops in total).
HopEstimate estimate_remaining_hops(double delta_seconds, const LatencyCalibration& calibration);

std::string format_composition(const std::vector<int>& counts, const LatencyCalibration& calibration);

/// Measures one hop class via honest payments over the single channel from -> to.
HopClass measure_hop_class(Network& net, const std::string& name, NodeId from, NodeId to, int count, Msat amount,
                           VirtualTime spacing);

struct IndependenceReport {
    LatencySummary small;
    LatencySummary large;
    double standard_error = 0.0;  // sqrt(s1²/n1 + s2²/n2)
    bool flagged = false;         // |μ1 - μ2| > 3 · standard_error
};

IndependenceReport independence_check(const LatencySummary& small, const LatencySummary& large);
/// Requires the two payment amounts to differ by at least 10^5x.
IndependenceReport independence_check(const std::vector<TimingSample>& small, const std::vector<TimingSample>& large);

std::string samples_csv(const std::vector<TimingSample>& samples);

}  // namespace pcnsim
