// Scenario description: nodes, channels, links, and the experiment knobs
// (seed, lock mode, countermeasure, attack parameters). Loadable from a YAML
// scenario file; see docs/scenario-format.md for the schema.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pcnsim/core.hpp"
#include "pcnsim/simnet.hpp"

namespace pcnsim {

enum class LockMode { release_on_fail, held_until_expiry };
const char* to_string(LockMode m);
LockMode parse_lock_mode(const std::string& text);

struct DelayRange {
    VirtualTime min = 0;
    VirtualTime max = 0;
    bool enabled() const { return max > 0; }
};

struct OffsetRange {
    std::int32_t min = 0;
    std::int32_t max = 0;
};

struct NodeSpec {
    std::string name;
    VirtualTime processing_delay = 1 * kMillisecond;
};

struct ChannelSpec {
    std::string name;
    NodeId a;
    NodeId b;
    Msat capacity = 0;
    Msat balance_ab = 0;
    Msat balance_ba = 0;
    FeePolicy policy_ab;
    FeePolicy policy_ba;
    bool is_private = false;
};

struct ScheduledPayment {
    VirtualTime at = 0;  // relative to the start of the experiment
    NodeId from;
    NodeId to;
    Msat amount = 0;
};

struct ProbeAttackSpec {
    NodeId attacker;
    NodeId victim;
    ChannelId observed_channel;
    Msat threshold = 1000;
    VirtualTime monitor_interval = 5 * kSecond;
    VirtualTime monitor_duration = 0;
    double riskfactor = 1.0;
};

struct HopClassSpec {
    std::string name;
    std::optional<double> mean_s;
    double stddev_s = 0.0;
    // Measured calibration: honest payments over the single channel from -> to.
    std::optional<NodeId> measure_from;
    std::optional<NodeId> measure_to;
    int measure_count = 25;
};

struct TimingAttackSpec {
    NodeId observer;
    NodeId sender;
    NodeId destination;
    int payments = 25;
    Msat amount = 1000;
    std::optional<Msat> large_amount;  // enables the amount-independence check
    VirtualTime spacing = 2 * kSecond;
    std::vector<HopClassSpec> calibration;
    int max_hops = 6;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 1;
    LockMode lock_mode = LockMode::release_on_fail;
    VirtualTime block_interval = 600 * kSecond;
    std::int32_t final_cltv = 9;
    DelayRange fulfill_delay;
    OffsetRange shadow_offset;

    std::vector<NodeSpec> nodes;
    std::vector<ChannelSpec> channels;
    std::vector<LinkSpec> links;
    std::vector<ScheduledPayment> payments;

    std::optional<ProbeAttackSpec> probe;
    std::optional<TimingAttackSpec> timing;

    NodeId node(const std::string& name) const;
    ChannelId channel(const std::string& name) const;
    const std::string& node_name(NodeId id) const { return nodes.at(id.value).name; }
    const std::string& channel_name(ChannelId id) const { return channels.at(id.value).name; }
    const LinkSpec* link_between(NodeId x, NodeId y) const;

    /// Throws ScenarioError naming the first violated invariant.
    void validate() const;
};

class ScenarioError : public Error {
public:
    using Error::Error;
};

class ScenarioParseError : public ScenarioError {
public:
    ScenarioParseError(const std::string& what, int line)
        : ScenarioError("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace pcnsim
