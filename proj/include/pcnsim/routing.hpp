// Source routing over a node's public view.
//
// Route cost is  Σ fee_e  +  k · Σ amount_e · cltv_delta_e  with
// k = riskfactor · risk_scale. Fees are charged by every forwarding node on its
// outgoing channel; the sender's own first hop is free. Amounts and expiries
// are accumulated back to front from the destination.

#pragma once

#include <set>
#include <stdexcept>
#include <vector>

#include "pcnsim/core.hpp"
#include "pcnsim/gossip.hpp"
#include "pcnsim/scenario.hpp"
#include "pcnsim/simnet.hpp"

namespace pcnsim {

/// Blocks-per-year scaling of the risk premium (per block-msat, times riskfactor).
inline constexpr double kDefaultRiskScale = 1.0 / 5259600.0;

struct RouteHop {
    ChannelId channel;
    NodeId from;
    NodeId to;
    Msat forward_amount = 0;
    BlockHeight expiry = 0;
    std::int32_t cltv_delta = 0;  // policy of this hop's channel in travel direction

    bool operator==(const RouteHop&) const = default;
};

struct Route {
    std::vector<RouteHop> hops;
    Msat total_sent = 0;
    NodeId destination;

    NodeId source() const { return hops.front().from; }
    Msat amount() const { return hops.back().forward_amount; }
    Msat total_fees() const { return total_sent - amount(); }
    bool operator==(const Route&) const = default;
};

struct RouteQuery {
    NodeId source;
    NodeId destination;
    Msat amount = 0;
    double riskfactor = 1.0;
    int fuzzpercent = 0;
    std::uint64_t fuzz_seed = 0;
    std::set<ChannelId> excluded_channels;
    BlockHeight current_height = 0;
    std::int32_t final_cltv = 9;
    double risk_scale = kDefaultRiskScale;
};

class NoRouteError : public Error {
public:
    using Error::Error;
};

/// Exact route cost. `fee_units` is the fee sum scaled by 100 (so fee fuzzing
/// stays integral); `risk_weight` is Σ amount · cltv_delta.
struct RouteCost {
    std::int64_t fee_units = 0;
    std::int64_t risk_weight = 0;

    bool operator==(const RouteCost&) const = default;
    long double value(double k) const { return fee_units / 100.0L + static_cast<long double>(k) * risk_weight; }
};

/// Strict weak order on costs for a given k; exact when both components tie.
bool cost_less(const RouteCost& x, const RouteCost& y, double k);

/// Fee perturbation in percent, in [-fuzzpercent, fuzzpercent], deterministic in
/// (seed, channel, direction).
int fee_fuzz(std::uint64_t seed, int fuzzpercent, ChannelId channel, Direction d);

/// Cost of an existing route under `query`'s weights.
RouteCost route_cost(const Route& route, const RouteQuery& query, const PublicGraph& view);

/// Minimum-cost route. Only edges with a known policy, capacity >= forward
/// amount and not excluded are considered. Ties resolve to the lexicographically
/// smallest channel-id sequence. Throws NoRouteError.
Route getroute(const RouteQuery& query, const PublicGraph& view);

/// Amounts and expiries for a fixed path (channel sequence) from `source`.
Route build_route(NodeId source, const std::vector<ChannelId>& path, Msat amount, const PublicGraph& view,
                  BlockHeight current_height, std::int32_t final_cltv);

/// Adds one offset drawn uniformly from `range` to every hop's expiry.
Route apply_shadow_route(Route route, Rng& rng, OffsetRange range);

/// Structural checks (connected path, amounts, expiry ordering). Throws Error.
void validate_route(const Route& route);

}  // namespace pcnsim
