// Small scenario builder for tests.
#pragma once

#include <random>
#include <string>

#include "pcnsim/scenario.hpp"

namespace testutil {

using namespace pcnsim;

struct Builder {
    Scenario s;

    explicit Builder(std::uint64_t seed = 1) { s.seed = seed; }

    NodeId node(const std::string& name, VirtualTime processing = kMillisecond) {
        s.nodes.push_back({name, processing});
        return NodeId{static_cast<std::uint32_t>(s.nodes.size() - 1)};
    }

    ChannelId channel(NodeId a, NodeId b, Msat ab, Msat ba, FeePolicy policy = {}, bool is_private = false,
                      VirtualTime latency = 10 * kMillisecond, VirtualTime jitter = 0) {
        ChannelSpec c;
        c.name = "c" + std::to_string(s.channels.size());
        c.a = a;
        c.b = b;
        c.capacity = ab + ba;
        c.balance_ab = ab;
        c.balance_ba = ba;
        c.policy_ab = policy;
        c.policy_ba = policy;
        c.is_private = is_private;
        s.channels.push_back(c);
        if (!s.link_between(a, b)) s.links.push_back(LinkSpec{a, b, latency, jitter});
        return ChannelId{static_cast<std::uint32_t>(s.channels.size() - 1)};
    }

    Scenario build() const {
        s.validate();
        return s;
    }
};

struct RandomGraph {
    std::mt19937_64 rng;
    bool fees = true;
    Msat max_balance = 1'000'000;

    std::int64_t pick(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
    }
    FeePolicy policy() {
        if (!fees) return {};
        return FeePolicy{pick(0, 2000), pick(0, 5000), static_cast<std::int32_t>(pick(1, 144))};
    }

    // Connected: a random spanning tree plus `extra` channels (parallel allowed).
    Scenario build(std::uint64_t seed, int nodes, int extra) {
        Builder b(seed);
        std::vector<NodeId> n;
        for (int i = 0; i < nodes; ++i) n.push_back(b.node("n" + std::to_string(i), pick(0, 3) * kMillisecond));
        auto add = [&](NodeId x, NodeId y) {
            const Msat ab = pick(1, max_balance), ba = pick(0, max_balance);
            b.channel(x, y, ab, ba, policy(), false, pick(1, 80) * kMillisecond, pick(0, 5) * kMillisecond);
            b.s.channels.back().policy_ba = policy();
        };
        for (int i = 1; i < nodes; ++i) add(n[i], n[pick(0, i - 1)]);
        for (int e = 0; e < extra && nodes > 1; ++e) {
            const auto x = pick(0, nodes - 1);
            auto y = pick(0, nodes - 2);
            if (y >= x) ++y;
            add(n[x], n[y]);
        }
        return b.build();
    }
};

inline std::string scenario_dir() { return PCNSIM_SCENARIO_DIR; }

}  // namespace testutil
