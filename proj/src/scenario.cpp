#include "pcnsim/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pcnsim {

const char* to_string(LockMode m) {
    return m == LockMode::release_on_fail ? "release" : "held";
}

LockMode parse_lock_mode(const std::string& text) {
    if (text == "release" || text == "release-on-fail" || text == "release_on_fail")
        return LockMode::release_on_fail;
    if (text == "held" || text == "held-until-expiry" || text == "held_until_expiry")
        return LockMode::held_until_expiry;
    throw ScenarioError("unknown lock mode '" + text + "' (expected release or held)");
}

NodeId Scenario::node(const std::string& name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].name == name) return NodeId{static_cast<std::uint32_t>(i)};
    throw ScenarioError("undefined node '" + name + "'");
}

ChannelId Scenario::channel(const std::string& name) const {
    for (std::size_t i = 0; i < channels.size(); ++i)
        if (channels[i].name == name) return ChannelId{static_cast<std::uint32_t>(i)};
    throw ScenarioError("undefined channel '" + name + "'");
}

const LinkSpec* Scenario::link_between(NodeId x, NodeId y) const {
    for (const auto& l : links)
        if (l.connects(x, y)) return &l;
    return nullptr;
}

void Scenario::validate() const {
    auto fail = [](const std::string& what) { throw ScenarioError("invalid scenario: " + what); };
    auto known = [&](NodeId n) { return n.value < nodes.size(); };

    if (nodes.empty()) fail("at least one node is required");
    std::set<std::string> names;
    for (const auto& n : nodes) {
        if (n.name.empty()) fail("node names must be non-empty");
        if (!names.insert(n.name).second) fail("duplicate node '" + n.name + "'");
        if (n.processing_delay < 0) fail("node '" + n.name + "' has negative processing delay");
    }
    if (block_interval <= 0) fail("block interval must be positive");
    if (final_cltv < 0) fail("final_cltv must be non-negative");
    if (fulfill_delay.min < 0 || fulfill_delay.max < fulfill_delay.min)
        fail("fulfill delay range must satisfy 0 <= min <= max");
    if (shadow_offset.min < 0 || shadow_offset.max < shadow_offset.min)
        fail("shadow offset range must satisfy 0 <= min <= max");

    std::set<std::string> channel_names;
    for (const auto& c : channels) {
        if (!channel_names.insert(c.name).second) fail("duplicate channel '" + c.name + "'");
        if (!known(c.a) || !known(c.b)) fail("channel '" + c.name + "' references an undefined node");
        if (c.a == c.b) fail("channel '" + c.name + "' endpoints must be distinct");
        if (c.capacity <= 0) fail("channel '" + c.name + "' capacity must be positive");
        if (c.balance_ab < 0 || c.balance_ba < 0)
            fail("channel '" + c.name + "' balances must be non-negative");
        if (c.balance_ab + c.balance_ba != c.capacity)
            fail("channel '" + c.name + "' violates conservation: balance_ab + balance_ba != capacity");
        if (!c.policy_ab.valid() || !c.policy_ba.valid())
            fail("channel '" + c.name + "' fee policy fields must be non-negative");
        if (link_between(c.a, c.b) == nullptr)
            fail("channel '" + c.name + "' endpoints have no link");
    }
    for (const auto& l : links) {
        if (!known(l.a) || !known(l.b)) fail("link references an undefined node");
        if (l.a == l.b) fail("link endpoints must be distinct");
        if (l.one_way_latency <= 0) fail("link latency must be positive");
        if (l.jitter_stddev < 0) fail("link jitter must be non-negative");
    }
    for (const auto& p : payments) {
        if (!known(p.from) || !known(p.to)) fail("payment references an undefined node");
        if (p.amount <= 0) fail("payment amount must be positive");
        if (p.at < 0) fail("payment time must be non-negative");
    }
    if (probe) {
        if (!known(probe->attacker) || !known(probe->victim)) fail("probe attack references an undefined node");
        if (probe->observed_channel.value >= channels.size()) fail("probe observed channel undefined");
        const auto& oc = channels[probe->observed_channel.value];
        if (oc.a != probe->victim && oc.b != probe->victim)
            fail("probe observed channel must end at the victim");
        if (probe->threshold < 2) fail("probe threshold must be at least 2 msat");
        if (probe->monitor_interval <= 0) fail("monitor interval must be positive");
        if (probe->monitor_duration < 0) fail("monitor duration must be non-negative");
        if (probe->riskfactor < 0) fail("riskfactor must be non-negative");
    }
    if (timing) {
        if (!known(timing->observer) || !known(timing->sender) || !known(timing->destination))
            fail("timing attack references an undefined node");
        if (timing->payments < 1) fail("timing attack needs at least one payment");
        if (timing->amount <= 0) fail("timing payment amount must be positive");
        if (timing->max_hops < 1) fail("max_hops must be at least 1");
        for (const auto& c : timing->calibration) {
            const bool measured = c.measure_from.has_value() && c.measure_to.has_value();
            if (!c.mean_s && !measured)
                fail("calibration class '" + c.name + "' needs mean_ms or measure");
            if (c.mean_s && *c.mean_s <= 0) fail("calibration class '" + c.name + "' mean must be positive");
        }
    }
}

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line + 1; }

template <typename T>
T as(const YAML::Node& n, const char* key) {
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ScenarioParseError(std::string("bad value for '") + key + "'", line_of(n));
    }
}

template <typename T>
T get(const YAML::Node& map, const char* key, T fallback) {
    const YAML::Node v = map[key];
    if (!v || v.IsNull()) return fallback;
    return as<T>(v, key);
}

YAML::Node require(const YAML::Node& map, const char* key) {
    const YAML::Node v = map[key];
    if (!v || v.IsNull())
        throw ScenarioParseError(std::string("missing required key '") + key + "'", line_of(map));
    return v;
}

VirtualTime ms_to_time(double ms) { return static_cast<VirtualTime>(std::llround(ms * 1000.0)); }
VirtualTime s_to_time(double s) { return static_cast<VirtualTime>(std::llround(s * 1e6)); }

FeePolicy parse_policy(const YAML::Node& n, FeePolicy base) {
    if (!n || n.IsNull()) return base;
    if (!n.IsMap()) throw ScenarioParseError("policy must be a map", line_of(n));
    base.fee_base = get<Msat>(n, "fee_base_msat", base.fee_base);
    base.fee_ppm = get<std::int64_t>(n, "fee_ppm", base.fee_ppm);
    base.cltv_delta = get<std::int32_t>(n, "cltv_delta", base.cltv_delta);
    return base;
}

template <typename T>
std::pair<T, T> parse_pair(const YAML::Node& n, const char* key) {
    if (n.IsScalar()) {
        const T v = as<T>(n, key);
        return {T{}, v};
    }
    if (!n.IsSequence() || n.size() != 2)
        throw ScenarioParseError(std::string("'") + key + "' must be [min, max]", line_of(n));
    return {as<T>(n[0], key), as<T>(n[1], key)};
}

NodeId node_ref(const Scenario& s, const YAML::Node& map, const char* key) {
    const YAML::Node v = require(map, key);
    return s.node(as<std::string>(v, key));
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ScenarioParseError(e.msg, e.mark.line + 1);
    }
    if (!root || root.IsNull()) throw ScenarioParseError("empty scenario file", 1);
    if (!root.IsMap()) throw ScenarioParseError("scenario root must be a map", line_of(root));

    Scenario s;
    s.name = get<std::string>(root, "name", "scenario");
    s.seed = get<std::uint64_t>(root, "seed", 1);
    if (const auto lm = root["lock_mode"]; lm && !lm.IsNull())
        s.lock_mode = parse_lock_mode(as<std::string>(lm, "lock_mode"));
    s.block_interval = s_to_time(get<double>(root, "block_interval_s", 600.0));
    s.final_cltv = get<std::int32_t>(root, "final_cltv", 9);
    if (const auto fd = root["fulfill_delay_ms"]; fd && !fd.IsNull()) {
        const auto [lo, hi] = parse_pair<double>(fd, "fulfill_delay_ms");
        s.fulfill_delay = {ms_to_time(lo), ms_to_time(hi)};
    }
    if (const auto so = root["shadow_offset_blocks"]; so && !so.IsNull()) {
        const auto [lo, hi] = parse_pair<std::int32_t>(so, "shadow_offset_blocks");
        s.shadow_offset = {lo, hi};
    }

    const YAML::Node defaults = root["defaults"];
    VirtualTime default_processing = 1 * kMillisecond;
    FeePolicy default_policy;
    if (defaults && defaults.IsMap()) {
        default_processing = ms_to_time(get<double>(defaults, "processing_delay_ms", 1.0));
        default_policy = parse_policy(defaults["policy"], default_policy);
    }

    const YAML::Node nodes = require(root, "nodes");
    if (!nodes.IsSequence()) throw ScenarioParseError("'nodes' must be a list", line_of(nodes));
    for (const auto& n : nodes) {
        NodeSpec spec;
        spec.processing_delay = default_processing;
        if (n.IsScalar()) {
            spec.name = as<std::string>(n, "nodes");
        } else if (n.IsMap()) {
            spec.name = as<std::string>(require(n, "name"), "name");
            if (const auto p = n["processing_delay_ms"]; p && !p.IsNull())
                spec.processing_delay = ms_to_time(as<double>(p, "processing_delay_ms"));
        } else {
            throw ScenarioParseError("node entries must be names or maps", line_of(n));
        }
        s.nodes.push_back(spec);
    }

    if (const YAML::Node channels = root["channels"]; channels && !channels.IsNull()) {
        if (!channels.IsSequence()) throw ScenarioParseError("'channels' must be a list", line_of(channels));
        for (const auto& c : channels) {
            ChannelSpec spec;
            spec.name = as<std::string>(require(c, "name"), "name");
            spec.a = node_ref(s, c, "a");
            spec.b = node_ref(s, c, "b");
            spec.balance_ab = as<Msat>(require(c, "balance_ab_msat"), "balance_ab_msat");
            spec.balance_ba = get<Msat>(c, "balance_ba_msat", 0);
            spec.capacity = get<Msat>(c, "capacity_msat", spec.balance_ab + spec.balance_ba);
            const FeePolicy both = parse_policy(c["policy"], default_policy);
            spec.policy_ab = parse_policy(c["policy_ab"], both);
            spec.policy_ba = parse_policy(c["policy_ba"], both);
            spec.is_private = get<bool>(c, "private", false);
            s.channels.push_back(spec);
        }
    }

    if (const YAML::Node links = root["links"]; links && !links.IsNull()) {
        if (!links.IsSequence()) throw ScenarioParseError("'links' must be a list", line_of(links));
        for (const auto& l : links) {
            LinkSpec spec;
            spec.a = node_ref(s, l, "a");
            spec.b = node_ref(s, l, "b");
            spec.one_way_latency = ms_to_time(as<double>(require(l, "latency_ms"), "latency_ms"));
            spec.jitter_stddev = ms_to_time(get<double>(l, "jitter_ms", 0.0));
            s.links.push_back(spec);
        }
    }

    if (const YAML::Node payments = root["payments"]; payments && !payments.IsNull()) {
        if (!payments.IsSequence()) throw ScenarioParseError("'payments' must be a list", line_of(payments));
        for (const auto& p : payments) {
            ScheduledPayment spec;
            spec.at = s_to_time(as<double>(require(p, "at_s"), "at_s"));
            spec.from = node_ref(s, p, "from");
            spec.to = node_ref(s, p, "to");
            spec.amount = as<Msat>(require(p, "amount_msat"), "amount_msat");
            s.payments.push_back(spec);
        }
    }

    if (const YAML::Node attack = root["attack"]; attack && attack.IsMap()) {
        if (const YAML::Node p = attack["probe"]; p && p.IsMap()) {
            ProbeAttackSpec spec;
            spec.attacker = node_ref(s, p, "attacker");
            spec.victim = node_ref(s, p, "victim");
            spec.observed_channel = s.channel(as<std::string>(require(p, "observed_channel"), "observed_channel"));
            spec.threshold = get<Msat>(p, "threshold_msat", 1000);
            spec.monitor_interval = s_to_time(get<double>(p, "monitor_interval_s", 5.0));
            spec.monitor_duration = s_to_time(get<double>(p, "monitor_duration_s", 0.0));
            spec.riskfactor = get<double>(p, "riskfactor", 1.0);
            s.probe = spec;
        }
        if (const YAML::Node t = attack["timing"]; t && t.IsMap()) {
            TimingAttackSpec spec;
            spec.observer = node_ref(s, t, "observer");
            spec.sender = node_ref(s, t, "sender");
            spec.destination = node_ref(s, t, "destination");
            spec.payments = get<int>(t, "payments", 25);
            spec.amount = get<Msat>(t, "amount_msat", 1000);
            if (const auto la = t["large_amount_msat"]; la && !la.IsNull())
                spec.large_amount = as<Msat>(la, "large_amount_msat");
            spec.spacing = s_to_time(get<double>(t, "spacing_s", 2.0));
            spec.max_hops = get<int>(t, "max_hops", 6);
            if (const YAML::Node cal = t["calibration"]; cal && cal.IsSequence()) {
                for (const auto& c : cal) {
                    HopClassSpec hc;
                    hc.name = as<std::string>(require(c, "name"), "name");
                    if (const auto m = c["mean_ms"]; m && !m.IsNull()) hc.mean_s = as<double>(m, "mean_ms") / 1000.0;
                    hc.stddev_s = get<double>(c, "stddev_ms", 0.0) / 1000.0;
                    if (const YAML::Node meas = c["measure"]; meas && meas.IsMap()) {
                        hc.measure_from = node_ref(s, meas, "from");
                        hc.measure_to = node_ref(s, meas, "to");
                        hc.measure_count = get<int>(meas, "count", 25);
                    }
                    spec.calibration.push_back(hc);
                }
            }
            s.timing = spec;
        }
    }

    s.validate();
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

}  // namespace pcnsim
