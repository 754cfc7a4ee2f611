// Active balance-probing attacker.
//
// Probes are payments with a random hash toward the victim: 16399 means the
// amount made it through every hop, 204 means some hop (normally the observed
// penultimate -> victim channel) could not forward it. A bisection over the
// gossiped capacity recovers the directed balance to within `threshold`, and
// periodic re-probing detects payments that moved it.

#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pcnsim/network.hpp"

namespace pcnsim {

struct ProbeTarget {
    NodeId attacker;
    NodeId victim;
    ChannelId observed_channel;
    Msat capacity_ceiling = 0;
};

/// Target whose ceiling is the observed channel's capacity in the attacker's gossip store.
ProbeTarget make_probe_target(const Network& net, NodeId attacker, NodeId victim, ChannelId observed);

struct ProbeRecord {
    VirtualTime time = 0;
    Msat amount = 0;
    OutcomeKind outcome = OutcomeKind::no_route;
    Msat min_msat = 0;
    Msat max_msat = 0;
};

struct BalanceEstimate {
    Msat min_msat = 0;
    Msat max_msat = 0;
    Msat estimate = 0;
    int probes_used = 0;
    VirtualTime duration = 0;
};

struct MonitorReport {
    VirtualTime time = 0;
    Msat old_estimate = 0;
    Msat new_estimate = 0;
    Msat delta = 0;  // old - new

    bool operator==(const MonitorReport&) const = default;
};

struct MonitorResult {
    std::vector<MonitorReport> reports;
    bool halted = false;
    std::string halt_reason;
    std::vector<std::string> warnings;
    Msat final_estimate = 0;
    int checks = 0;
};

struct ProberConfig {
    Msat threshold = 1000;
    double riskfactor = 1.0;
};

/// ⌈log2(ceiling / threshold)⌉ + 1, the bisection's probe budget.
int probe_budget(Msat ceiling, Msat threshold);

class Prober {
public:
    Prober(Network& net, ProbeTarget target, ProberConfig config = {});

    OutcomeKind probe(Msat amount);
    /// Bisection; returns the lower bound as the estimate. Throws NoRouteError.
    BalanceEstimate find_init_max();
    /// Re-probes every `interval` for `duration` of virtual time.
    MonitorResult monitor(Msat init_max, VirtualTime interval, VirtualTime duration);

    const ProbeTarget& target() const { return target_; }
    const ProberConfig& config() const { return config_; }
    const std::vector<ProbeRecord>& log() const { return log_; }
    const std::set<ChannelId>& excluded_channels() const { return excluded_; }
    /// Sum of the attacker's own HTLCs still locked (held-mode probe residue).
    Msat locked_probe_funds() const;

    std::string probes_csv() const;
    static std::string monitor_csv(const MonitorResult& result);

private:
    Network& net_;
    ProbeTarget target_;
    ProberConfig config_;
    std::set<ChannelId> excluded_;
    std::vector<ProbeRecord> log_;
    Msat bound_min_ = 0;
    Msat bound_max_ = 0;
    std::optional<Msat> route_capacity_;
};

}  // namespace pcnsim
