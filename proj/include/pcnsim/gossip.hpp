// Channel announcements and policy updates, flooded over the peer graph.
//
// A GossipStore only ever holds public quantities (endpoints, capacity, fee
// policy); directed balances have no field to live in. Private channels never
// enter any store: their two endpoints track them in a separate local table.

#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "pcnsim/core.hpp"

namespace pcnsim {

/// Message delivery between peers with link latency.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void deliver(NodeId from, NodeId to, std::function<void()> on_receive) = 0;
};

struct ChannelAnnounce {
    ChannelId channel;
    NodeId a;
    NodeId b;
    Msat capacity = 0;
};

struct ChannelUpdate {
    ChannelId channel;
    Direction direction = Direction::AtoB;
    FeePolicy policy;
    std::uint32_t sequence = 0;
};

using GossipMessage = std::variant<ChannelAnnounce, ChannelUpdate>;

struct PublicChannel {
    ChannelId id;
    NodeId a;
    NodeId b;
    Msat capacity = 0;
    std::array<std::optional<FeePolicy>, 2> policy;
    bool is_private = false;

    bool has_endpoint(NodeId n) const { return n == a || n == b; }
    Direction direction_from(NodeId from) const { return from == a ? Direction::AtoB : Direction::BtoA; }
    NodeId peer_of(NodeId n) const { return n == a ? b : a; }
    const std::optional<FeePolicy>& policy_from(NodeId from) const {
        return policy[index_of(direction_from(from))];
    }
};

struct PublicGraph {
    std::vector<PublicChannel> channels;  // ordered by ChannelId

    const PublicChannel* find(ChannelId id) const;
    bool empty() const { return channels.empty(); }
    std::size_t size() const { return channels.size(); }
    /// Adds channels not already present (route hints, local private channels).
    void merge(const std::vector<PublicChannel>& extra);
};

class GossipStore {
public:
    enum class UpdateResult { applied, stale, unknown_channel };

    /// Returns false if the channel was already known.
    bool apply(const ChannelAnnounce& msg);
    UpdateResult apply(const ChannelUpdate& msg);

    PublicGraph view() const;
    std::size_t channel_count() const { return entries_.size(); }
    bool contains(ChannelId id) const { return entries_.count(id) != 0; }
    std::optional<std::uint32_t> sequence(ChannelId id, Direction d) const;

private:
    struct Entry {
        NodeId a;
        NodeId b;
        Msat capacity = 0;
        std::array<std::optional<FeePolicy>, 2> policy;
        std::array<std::uint32_t, 2> sequence{0, 0};
    };
    std::map<ChannelId, Entry> entries_;
};

class GossipLayer {
public:
    using PeerFn = std::function<std::vector<NodeId>(NodeId)>;

    GossipLayer(std::size_t node_count, Transport& transport, PeerFn peers);

    /// Broadcasts a new channel once. Private channels reach only their endpoints'
    /// local tables. Throws on a duplicate announce.
    void announce(const DirectedChannel& channel);

    /// Policy change for the direction leaving `endpoint`. Throws for unknown
    /// channels and non-endpoint callers.
    void update_policy(NodeId endpoint, ChannelId channel, const FeePolicy& policy);

    /// Exactly this node's gossip store contents.
    PublicGraph public_view(NodeId node) const;
    /// Private channels this node is an endpoint of.
    std::vector<PublicChannel> private_channels(NodeId node) const;
    const GossipStore& store(NodeId node) const { return stores_.at(node.value); }

    /// Network receive path (flood handling); exposed for replay tests.
    void receive(NodeId at, NodeId from, const GossipMessage& msg);

    std::string dump(NodeId node, const std::function<std::string(NodeId)>& node_name) const;

private:
    struct Origin {
        NodeId a;
        NodeId b;
        Msat capacity = 0;
        bool is_private = false;
        std::array<std::uint32_t, 2> sequence{0, 0};
    };
    using SeenKey = std::tuple<std::uint32_t, std::uint8_t, std::uint32_t, bool>;

    static SeenKey key_of(const GossipMessage& msg);
    void accept(NodeId at, const GossipMessage& msg);
    void forward(NodeId at, NodeId except, const GossipMessage& msg);

    Transport& transport_;
    PeerFn peers_;
    std::map<ChannelId, Origin> origins_;
    std::vector<GossipStore> stores_;
    std::vector<std::map<ChannelId, PublicChannel>> private_;
    std::vector<std::set<SeenKey>> seen_;
    std::vector<std::vector<ChannelUpdate>> pending_;
};

}  // namespace pcnsim
