#include "doctest.h"
#include "helpers.hpp"
#include "pcnsim/network.hpp"

using namespace pcnsim;

namespace {

// Square a-b-c-d-a with one extra private channel b-d.
Scenario square(bool private_bd) {
    testutil::Builder b;
    const auto a = b.node("a"), bb = b.node("b"), c = b.node("c"), d = b.node("d");
    b.channel(a, bb, 1000, 1000);
    b.channel(bb, c, 1000, 1000);
    b.channel(c, d, 1000, 1000);
    b.channel(d, a, 1000, 1000);
    if (private_bd) b.channel(bb, d, 500, 500, {}, true);
    return b.build();
}

}  // namespace

TEST_CASE("public channels reach every store") {
    Network net(square(false));
    for (std::uint32_t n = 0; n < 4; ++n) {
        const auto& store = net.gossip().store(NodeId{n});
        CHECK(store.channel_count() == 4);
        for (std::uint32_t c = 0; c < 4; ++c) CHECK(store.contains(ChannelId{c}));
        for (const auto& ch : net.gossip().public_view(NodeId{n}).channels) {
            CHECK(ch.policy[0].has_value());
            CHECK(ch.policy[1].has_value());
        }
    }
}

TEST_CASE("private channels reach no store") {
    Network net(square(true));
    const ChannelId priv{4};
    for (std::uint32_t n = 0; n < 4; ++n) CHECK_FALSE(net.gossip().store(NodeId{n}).contains(priv));
    // only the endpoints know it
    CHECK(net.gossip().private_channels(NodeId{1}).size() == 1);
    CHECK(net.gossip().private_channels(NodeId{3}).size() == 1);
    CHECK(net.gossip().private_channels(NodeId{0}).empty());
    CHECK(net.gossip().private_channels(NodeId{2}).empty());
}

TEST_CASE("duplicate announce is rejected") {
    Network net(square(false));
    CHECK_THROWS_AS(net.gossip().announce(net.channel(ChannelId{0})), Error);
    GossipStore store;
    const ChannelAnnounce ann{ChannelId{0}, NodeId{0}, NodeId{1}, 10};
    CHECK(store.apply(ann));
    CHECK_FALSE(store.apply(ann));
}

TEST_CASE("stale updates are ignored") {
    GossipStore store;
    store.apply(ChannelAnnounce{ChannelId{0}, NodeId{0}, NodeId{1}, 10});
    CHECK(store.apply(ChannelUpdate{ChannelId{0}, Direction::AtoB, FeePolicy{1, 1}, 2}) ==
          GossipStore::UpdateResult::applied);
    CHECK(store.apply(ChannelUpdate{ChannelId{0}, Direction::AtoB, FeePolicy{9, 9}, 1}) ==
          GossipStore::UpdateResult::stale);
    CHECK(store.apply(ChannelUpdate{ChannelId{0}, Direction::AtoB, FeePolicy{9, 9}, 2}) ==
          GossipStore::UpdateResult::stale);
    CHECK(store.view().channels[0].policy[0] == FeePolicy{1, 1});
    CHECK(store.apply(ChannelUpdate{ChannelId{7}, Direction::AtoB, FeePolicy{}, 1}) ==
          GossipStore::UpdateResult::unknown_channel);
}

TEST_CASE("replayed flood message does not change a store") {
    Network net(square(false));
    const auto before = net.gossip().store(NodeId{2}).sequence(ChannelId{0}, Direction::AtoB);
    net.gossip().receive(NodeId{2}, NodeId{1}, ChannelUpdate{ChannelId{0}, Direction::AtoB, FeePolicy{99, 99}, 1});
    net.sim().run();
    CHECK(net.gossip().store(NodeId{2}).sequence(ChannelId{0}, Direction::AtoB) == before);
    CHECK(net.gossip().public_view(NodeId{2}).find(ChannelId{0})->policy[0] == FeePolicy{});
}

TEST_CASE("policy update changes fees on the next getroute") {
    Network net(square(false));
    const NodeId a{0}, c{2};
    const Route before = net.find_route(a, c, 1'000, {.shadow = false});
    CHECK(before.total_fees() == 0);
    // raise the fee of every forwarding direction
    for (std::uint32_t ch = 0; ch < 4; ++ch) {
        const auto& dc = net.channel(ChannelId{ch});
        net.gossip().update_policy(dc.node_a(), dc.id(), FeePolicy{0, 100'000});
        net.gossip().update_policy(dc.node_b(), dc.id(), FeePolicy{0, 100'000});
    }
    net.sim().run();
    const Route after = net.find_route(a, c, 1'000, {.shadow = false});
    CHECK(after.total_fees() == 100);
}

TEST_CASE("private channel update reaches only the endpoints") {
    Network net(square(true));
    net.gossip().update_policy(NodeId{1}, ChannelId{4}, FeePolicy{42, 0});
    net.sim().run();
    for (std::uint32_t n = 0; n < 4; ++n) CHECK_FALSE(net.gossip().store(NodeId{n}).contains(ChannelId{4}));
    for (NodeId n : {NodeId{1}, NodeId{3}}) {
        const auto priv = net.gossip().private_channels(n);
        REQUIRE(priv.size() == 1);
        CHECK(priv[0].policy_from(NodeId{1}) == FeePolicy{42, 0});
    }
}

TEST_CASE("update by a non-endpoint or for an unknown channel is rejected") {
    Network net(square(false));
    CHECK_THROWS_AS(net.gossip().update_policy(NodeId{2}, ChannelId{0}, FeePolicy{}), Error);
    CHECK_THROWS_AS(net.gossip().update_policy(NodeId{0}, ChannelId{99}, FeePolicy{}), Error);
}

TEST_CASE("fig2 view") {
    Network net(load_scenario(testutil::scenario_dir() + "/fig2.scenario"));
    for (std::uint32_t n = 0; n < 4; ++n) CHECK(net.gossip().public_view(NodeId{n}).size() == 3);
}

TEST_CASE("one private channel hides it from non-endpoints") {
    testutil::Builder b;
    const auto n1 = b.node("1"), n2 = b.node("2"), n3 = b.node("3"), n4 = b.node("4");
    b.channel(n3, n1, 10, 10);
    b.channel(n1, n2, 10, 10);
    b.channel(n2, n4, 10, 10, {}, true);
    Network net(b.build());
    CHECK(net.gossip().public_view(n3).size() == 2);
    CHECK(net.gossip().public_view(n1).size() == 2);
    CHECK(net.routing_view(n2).size() == 3);
}

TEST_CASE("empty network has an empty view") {
    testutil::Builder b;
    b.node("solo");
    Network net(b.build());
    CHECK(net.gossip().public_view(NodeId{0}).empty());
}

TEST_CASE("stores never hold balances") {
    // A PublicChannel only carries capacity; two networks differing only in the
    // balance split produce identical views.
    testutil::Builder b1, b2;
    const auto x1 = b1.node("x"), y1 = b1.node("y");
    const auto x2 = b2.node("x"), y2 = b2.node("y");
    b1.channel(x1, y1, 900, 100);
    b2.channel(x2, y2, 100, 900);
    Network n1(b1.build()), n2(b2.build());
    const auto v1 = n1.gossip().public_view(x1), v2 = n2.gossip().public_view(x2);
    CHECK(v1.channels[0].capacity == v2.channels[0].capacity);
    CHECK(v1.channels[0].policy == v2.channels[0].policy);
}
