#include "pcnsim/routing.hpp"

#include <algorithm>
#include <queue>

namespace pcnsim {

bool cost_less(const RouteCost& x, const RouteCost& y, double k) {
    if (x == y) return false;
    const long double fee_gap = static_cast<long double>(x.fee_units - y.fee_units);
    const long double risk_gap = static_cast<long double>(y.risk_weight - x.risk_weight);
    return fee_gap < 100.0L * static_cast<long double>(k) * risk_gap;
}

int fee_fuzz(std::uint64_t seed, int fuzzpercent, ChannelId channel, Direction d) {
    if (fuzzpercent <= 0) return 0;
    const std::uint64_t h = derive_seed(seed, 2ULL * channel.value + index_of(d));
    const auto span = static_cast<std::uint64_t>(2 * fuzzpercent + 1);
    return static_cast<int>(h % span) - fuzzpercent;
}

namespace {

void check_query(const RouteQuery& q) {
    if (q.amount <= 0) throw Error("route amount must be positive");
    if (q.fuzzpercent < 0 || q.fuzzpercent > 100) throw Error("fuzzpercent must lie in [0, 100]");
    if (q.riskfactor < 0) throw Error("riskfactor must be non-negative");
}

struct Label {
    NodeId node;
    Msat amount;  // forward amount on the channel entering `node`
    RouteCost cost;
    std::vector<ChannelId> suffix;  // channels from `node` to the destination
    std::vector<NodeId> nodes;      // nodes on the suffix, sorted
    bool alive = true;
};

bool subset(const std::vector<NodeId>& small, const std::vector<NodeId>& big) {
    return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

bool contains(const std::vector<NodeId>& sorted, NodeId n) {
    return std::binary_search(sorted.begin(), sorted.end(), n);
}

// m makes l redundant: every completion of l is matched by an equal-or-better one of m.
bool dominates(const Label& m, const Label& l, double k) {
    if (cost_less(l.cost, m.cost, k) || m.amount > l.amount) return false;
    if (!subset(m.nodes, l.nodes)) return false;
    if (cost_less(m.cost, l.cost, k)) return true;
    return m.suffix <= l.suffix;
}

}  // namespace

Route getroute(const RouteQuery& query, const PublicGraph& view) {
    check_query(query);
    const double k = query.riskfactor * query.risk_scale;

    auto node_known = [&](NodeId n) {
        return std::any_of(view.channels.begin(), view.channels.end(),
                           [&](const PublicChannel& c) { return c.has_endpoint(n); });
    };
    if (query.source == query.destination) throw NoRouteError("No suitable route found. (source is destination)");
    if (!node_known(query.source) || !node_known(query.destination))
        throw NoRouteError("No suitable route found. (endpoint not in view)");

    std::vector<Label> labels;
    std::vector<std::vector<std::size_t>> at_node;
    auto bucket = [&](NodeId n) -> std::vector<std::size_t>& {
        if (n.value >= at_node.size()) at_node.resize(n.value + 1);
        return at_node[n.value];
    };

    using Entry = std::pair<long double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

    std::optional<std::size_t> best;
    auto better_final = [&](const Label& x, const Label& y) {
        if (cost_less(x.cost, y.cost, k)) return true;
        if (cost_less(y.cost, x.cost, k)) return false;
        return x.suffix < y.suffix;
    };

    auto insert = [&](Label l) {
        auto& here = bucket(l.node);
        for (std::size_t idx : here)
            if (labels[idx].alive && dominates(labels[idx], l, k)) return;
        for (std::size_t idx : here)
            if (labels[idx].alive && dominates(l, labels[idx], k)) labels[idx].alive = false;
        const std::size_t id = labels.size();
        const long double key = l.cost.value(k);
        labels.push_back(std::move(l));
        here.push_back(id);
        if (labels[id].node == query.source) {
            if (!best || better_final(labels[id], labels[*best])) best = id;
        } else {
            open.emplace(key, id);
        }
    };

    insert(Label{query.destination, query.amount, {}, {}, {query.destination}, true});

    while (!open.empty()) {
        const std::size_t id = open.top().second;
        open.pop();
        if (!labels[id].alive) continue;
        if (best && cost_less(labels[*best].cost, labels[id].cost, k)) continue;
        const Label cur = labels[id];

        for (const PublicChannel& ch : view.channels) {
            if (!ch.has_endpoint(cur.node)) continue;
            if (query.excluded_channels.count(ch.id)) continue;
            const NodeId upstream = ch.peer_of(cur.node);
            if (contains(cur.nodes, upstream)) continue;
            const auto& policy = ch.policy_from(upstream);
            if (!policy) continue;
            if (ch.capacity < cur.amount) continue;

            Label next;
            next.node = upstream;
            next.cost = cur.cost;
            next.amount = cur.amount;
            if (upstream != query.source) {
                const Msat fee = compute_fee(cur.amount, *policy);
                const int fuzz = fee_fuzz(query.fuzz_seed, query.fuzzpercent, ch.id, ch.direction_from(upstream));
                next.cost.fee_units += fee * (100 + fuzz);
                next.amount = cur.amount + fee;
            }
            next.cost.risk_weight += cur.amount * policy->cltv_delta;
            next.suffix.reserve(cur.suffix.size() + 1);
            next.suffix.push_back(ch.id);
            next.suffix.insert(next.suffix.end(), cur.suffix.begin(), cur.suffix.end());
            next.nodes = cur.nodes;
            next.nodes.insert(std::upper_bound(next.nodes.begin(), next.nodes.end(), upstream), upstream);
            insert(std::move(next));
        }
    }

    if (!best) throw NoRouteError("No suitable route found.");
    return build_route(query.source, labels[*best].suffix, query.amount, view, query.current_height,
                       query.final_cltv);
}

Route build_route(NodeId source, const std::vector<ChannelId>& path, Msat amount, const PublicGraph& view,
                  BlockHeight current_height, std::int32_t final_cltv) {
    if (path.empty()) throw Error("route path must contain at least one channel");
    if (amount <= 0) throw Error("route amount must be positive");
    Route route;
    NodeId at = source;
    std::vector<const PublicChannel*> chans;
    for (ChannelId id : path) {
        const PublicChannel* ch = view.find(id);
        if (ch == nullptr) throw Error("route channel " + std::to_string(id.value) + " not in view");
        if (!ch->has_endpoint(at)) throw Error("route channels do not form a connected path");
        if (!ch->policy_from(at)) throw Error("route channel " + std::to_string(id.value) + " has no policy");
        RouteHop hop;
        hop.channel = id;
        hop.from = at;
        hop.to = ch->peer_of(at);
        hop.cltv_delta = ch->policy_from(at)->cltv_delta;
        route.hops.push_back(hop);
        chans.push_back(ch);
        at = hop.to;
    }
    route.destination = at;

    const std::size_t n = route.hops.size();
    route.hops[n - 1].forward_amount = amount;
    route.hops[n - 1].expiry = current_height + final_cltv;
    for (std::size_t i = n - 1; i-- > 0;) {
        const RouteHop& down = route.hops[i + 1];
        const FeePolicy& p = *chans[i + 1]->policy_from(down.from);
        route.hops[i].forward_amount = down.forward_amount + compute_fee(down.forward_amount, p);
        route.hops[i].expiry = down.expiry + p.cltv_delta;
    }
    route.total_sent = route.hops.front().forward_amount;
    return route;
}

RouteCost route_cost(const Route& route, const RouteQuery& query, const PublicGraph& view) {
    RouteCost c;
    for (std::size_t i = 0; i < route.hops.size(); ++i) {
        const RouteHop& h = route.hops[i];
        const PublicChannel* ch = view.find(h.channel);
        if (ch == nullptr || !ch->policy_from(h.from)) throw Error("route_cost: channel missing from view");
        const FeePolicy& p = *ch->policy_from(h.from);
        if (i > 0) {
            const int fuzz = fee_fuzz(query.fuzz_seed, query.fuzzpercent, h.channel, ch->direction_from(h.from));
            c.fee_units += compute_fee(h.forward_amount, p) * (100 + fuzz);
        }
        c.risk_weight += h.forward_amount * p.cltv_delta;
    }
    return c;
}

Route apply_shadow_route(Route route, Rng& rng, OffsetRange range) {
    if (range.min < 0 || range.max < range.min) throw Error("shadow offset range must satisfy 0 <= min <= max");
    if (range.max == 0) return route;
    std::uniform_int_distribution<std::int32_t> dist(range.min, range.max);
    const std::int32_t offset = dist(rng);
    for (auto& hop : route.hops) hop.expiry += offset;
    return route;
}

void validate_route(const Route& route) {
    if (route.hops.empty()) throw Error("malformed route: no hops");
    if (route.total_sent != route.hops.front().forward_amount)
        throw Error("malformed route: total_sent differs from first hop amount");
    if (route.hops.back().to != route.destination) throw Error("malformed route: last hop does not reach destination");
    for (std::size_t i = 0; i < route.hops.size(); ++i) {
        const RouteHop& h = route.hops[i];
        if (h.forward_amount <= 0) throw Error("malformed route: non-positive forward amount");
        if (h.from == h.to) throw Error("malformed route: self hop");
        if (i + 1 < route.hops.size()) {
            const RouteHop& d = route.hops[i + 1];
            if (h.to != d.from) throw Error("malformed route: hops are not connected");
            if (h.forward_amount < d.forward_amount) throw Error("malformed route: forward amount increases downstream");
            if (h.expiry < d.expiry + d.cltv_delta) throw Error("malformed route: expiry ordering violated");
        }
    }
}

}  // namespace pcnsim
