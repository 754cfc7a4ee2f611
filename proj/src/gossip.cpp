#include "pcnsim/gossip.hpp"

#include <algorithm>
#include <sstream>

namespace pcnsim {

const PublicChannel* PublicGraph::find(ChannelId id) const {
    auto it = std::lower_bound(channels.begin(), channels.end(), id,
                               [](const PublicChannel& c, ChannelId v) { return c.id < v; });
    return (it != channels.end() && it->id == id) ? &*it : nullptr;
}

void PublicGraph::merge(const std::vector<PublicChannel>& extra) {
    for (const auto& c : extra)
        if (find(c.id) == nullptr) channels.push_back(c);
    std::sort(channels.begin(), channels.end(),
              [](const PublicChannel& x, const PublicChannel& y) { return x.id < y.id; });
}

bool GossipStore::apply(const ChannelAnnounce& msg) {
    if (entries_.count(msg.channel)) return false;
    entries_[msg.channel] = Entry{msg.a, msg.b, msg.capacity, {}, {0, 0}};
    return true;
}

GossipStore::UpdateResult GossipStore::apply(const ChannelUpdate& msg) {
    auto it = entries_.find(msg.channel);
    if (it == entries_.end()) return UpdateResult::unknown_channel;
    auto& seq = it->second.sequence[index_of(msg.direction)];
    if (msg.sequence <= seq) return UpdateResult::stale;
    seq = msg.sequence;
    it->second.policy[index_of(msg.direction)] = msg.policy;
    return UpdateResult::applied;
}

PublicGraph GossipStore::view() const {
    PublicGraph g;
    g.channels.reserve(entries_.size());
    for (const auto& [id, e] : entries_) g.channels.push_back(PublicChannel{id, e.a, e.b, e.capacity, e.policy, false});
    return g;
}

std::optional<std::uint32_t> GossipStore::sequence(ChannelId id, Direction d) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second.sequence[index_of(d)];
}

GossipLayer::GossipLayer(std::size_t node_count, Transport& transport, PeerFn peers)
    : transport_(transport),
      peers_(std::move(peers)),
      stores_(node_count),
      private_(node_count),
      seen_(node_count),
      pending_(node_count) {}

GossipLayer::SeenKey GossipLayer::key_of(const GossipMessage& msg) {
    if (const auto* a = std::get_if<ChannelAnnounce>(&msg)) return {a->channel.value, 0, 0, true};
    const auto& u = std::get<ChannelUpdate>(msg);
    return {u.channel.value, static_cast<std::uint8_t>(u.direction), u.sequence, false};
}

void GossipLayer::announce(const DirectedChannel& channel) {
    if (origins_.count(channel.id()))
        throw Error("duplicate channel_announce for channel " + std::to_string(channel.id().value));
    origins_[channel.id()] = Origin{channel.node_a(), channel.node_b(), channel.capacity(), channel.is_private(), {0, 0}};

    if (channel.is_private()) {
        const PublicChannel local{channel.id(), channel.node_a(), channel.node_b(), channel.capacity(), {}, true};
        private_.at(channel.node_a().value)[channel.id()] = local;
        private_.at(channel.node_b().value)[channel.id()] = local;
        return;
    }
    const GossipMessage msg = ChannelAnnounce{channel.id(), channel.node_a(), channel.node_b(), channel.capacity()};
    seen_.at(channel.node_a().value).insert(key_of(msg));
    accept(channel.node_a(), msg);
    forward(channel.node_a(), channel.node_a(), msg);
}

void GossipLayer::update_policy(NodeId endpoint, ChannelId channel, const FeePolicy& policy) {
    auto it = origins_.find(channel);
    if (it == origins_.end()) throw Error("channel_update for unknown channel " + std::to_string(channel.value));
    Origin& o = it->second;
    if (endpoint != o.a && endpoint != o.b)
        throw Error("channel_update from a node that is not an endpoint of channel " + std::to_string(channel.value));
    if (!policy.valid()) throw Error("fee policy fields must be non-negative");
    const Direction d = endpoint == o.a ? Direction::AtoB : Direction::BtoA;
    const ChannelUpdate upd{channel, d, policy, ++o.sequence[index_of(d)]};

    if (o.is_private) {
        private_.at(endpoint.value)[channel].policy[index_of(d)] = policy;
        const NodeId peer = endpoint == o.a ? o.b : o.a;
        transport_.deliver(endpoint, peer, [this, peer, channel, d, policy] {
            private_.at(peer.value)[channel].policy[index_of(d)] = policy;
        });
        return;
    }
    const GossipMessage msg = upd;
    seen_.at(endpoint.value).insert(key_of(msg));
    accept(endpoint, msg);
    forward(endpoint, endpoint, msg);
}

void GossipLayer::accept(NodeId at, const GossipMessage& msg) {
    GossipStore& store = stores_.at(at.value);
    if (const auto* a = std::get_if<ChannelAnnounce>(&msg)) {
        store.apply(*a);
        auto& pending = pending_.at(at.value);
        std::vector<ChannelUpdate> keep;
        for (const auto& u : pending) {
            if (u.channel == a->channel)
                store.apply(u);
            else
                keep.push_back(u);
        }
        pending.swap(keep);
        return;
    }
    const auto& u = std::get<ChannelUpdate>(msg);
    if (store.apply(u) == GossipStore::UpdateResult::unknown_channel) pending_.at(at.value).push_back(u);
}

void GossipLayer::receive(NodeId at, NodeId from, const GossipMessage& msg) {
    if (!seen_.at(at.value).insert(key_of(msg)).second) return;
    accept(at, msg);
    forward(at, from, msg);
}

void GossipLayer::forward(NodeId at, NodeId except, const GossipMessage& msg) {
    std::vector<NodeId> peers = peers_(at);
    std::sort(peers.begin(), peers.end());
    peers.erase(std::unique(peers.begin(), peers.end()), peers.end());
    for (NodeId peer : peers) {
        if (peer == except || peer == at) continue;
        transport_.deliver(at, peer, [this, peer, at, msg] { receive(peer, at, msg); });
    }
}

PublicGraph GossipLayer::public_view(NodeId node) const { return stores_.at(node.value).view(); }

std::vector<PublicChannel> GossipLayer::private_channels(NodeId node) const {
    std::vector<PublicChannel> out;
    for (const auto& [id, c] : private_.at(node.value)) out.push_back(c);
    return out;
}

std::string GossipLayer::dump(NodeId node, const std::function<std::string(NodeId)>& node_name) const {
    std::ostringstream os;
    auto policy_text = [](const std::optional<FeePolicy>& p) {
        if (!p) return std::string("-");
        return std::to_string(p->fee_base) + "/" + std::to_string(p->fee_ppm) + "/" + std::to_string(p->cltv_delta);
    };
    os << "channel,a,b,capacity_msat,policy_ab,policy_ba,private\n";
    auto row = [&](const PublicChannel& c) {
        os << c.id.value << ',' << node_name(c.a) << ',' << node_name(c.b) << ',' << c.capacity << ','
           << policy_text(c.policy[0]) << ',' << policy_text(c.policy[1]) << ',' << (c.is_private ? 1 : 0) << '\n';
    };
    for (const auto& c : public_view(node).channels) row(c);
    for (const auto& c : private_channels(node)) row(c);
    return os.str();
}

}  // namespace pcnsim
