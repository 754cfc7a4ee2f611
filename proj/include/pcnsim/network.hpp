// The simulated payment channel network and its HTLC engine.
//
// Message flow per payment: update_add_htlc travels hop by hop toward the
// destination; the destination answers with update_fulfill_htlc (known
// preimage) or update_fail_htlc 16399 (unknown hash); a forwarding node that
// cannot forward answers update_fail_htlc 204. Resolutions travel back hop by
// hop. Each node applies its processing delay when it originates or relays a
// fulfill/fail; adds are forwarded immediately. Optional countermeasure delay
// is added before every fulfill a node sends.
//
// All state is mutated from the simulator's event loop only.

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pcnsim/core.hpp"
#include "pcnsim/gossip.hpp"
#include "pcnsim/onion.hpp"
#include "pcnsim/routing.hpp"
#include "pcnsim/scenario.hpp"
#include "pcnsim/simnet.hpp"

namespace pcnsim {

inline constexpr int kFailAlongRoute = 204;
inline constexpr int kFailAtDestination = 16399;

enum class MessageKind : std::uint8_t { update_add_htlc, update_fulfill_htlc, update_fail_htlc };
const char* to_string(MessageKind k);

struct TraceRecord {
    VirtualTime sent_at = 0;
    VirtualTime received_at = 0;
    MessageKind kind = MessageKind::update_add_htlc;
    NodeId from;
    NodeId to;
    HtlcId htlc;
    Msat amount = 0;
};

/// One message as seen by a single node: its own send or receive timestamp only.
struct LocalLogEntry {
    VirtualTime at = 0;
    MessageKind kind = MessageKind::update_add_htlc;
    bool outgoing = false;
    NodeId peer;
    HtlcId htlc;
    Msat amount = 0;
};

class Trace {
public:
    void append(const TraceRecord& r) { records_.push_back(r); }
    const std::vector<TraceRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    /// The message log a node itself would write, ordered by its own timestamps.
    std::vector<LocalLogEntry> local_log(NodeId node) const;

    std::string to_csv(const std::function<std::string(NodeId)>& node_name) const;

private:
    std::vector<TraceRecord> records_;
};

enum class OutcomeKind { success, fail_along_route, fail_at_destination, no_route };
const char* to_string(OutcomeKind k);

struct PaymentOutcome {
    OutcomeKind kind = OutcomeKind::no_route;
    std::optional<NodeId> failing_hop;  // present iff fail_along_route
    VirtualTime latency = 0;

    /// 0 / 204 / 16399 / -1 for no route.
    int code() const;
    bool operator==(const PaymentOutcome&) const = default;
};

struct Invoice {
    NodeId destination;
    PaymentHash payment_hash;
    std::optional<Msat> amount;
    VirtualTime expiry = 0;
    std::string label;
    std::vector<PublicChannel> route_hints;  // destination's private channels
};

struct FailureInfo {
    int code = kFailAlongRoute;
    NodeId origin;
};

using PaymentId = std::uint64_t;

struct RouteOptions {
    double riskfactor = 1.0;
    int fuzzpercent = 0;
    std::set<ChannelId> excluded_channels;
    bool shadow = true;  // apply the scenario's shadow offset range
};

class Network : public Transport {
public:
    /// Builds channels from the scenario and floods their announcements and
    /// initial policies to quiescence.
    explicit Network(Scenario scenario);
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    const Scenario& scenario() const { return scenario_; }
    Simulator& sim() { return sim_; }
    const Simulator& sim() const { return sim_; }
    GossipLayer& gossip() { return *gossip_; }
    const GossipLayer& gossip() const { return *gossip_; }
    std::size_t node_count() const { return scenario_.nodes.size(); }
    std::string node_name(NodeId n) const { return scenario_.node_name(n); }

    // Ground truth; attack code must not read these.
    const DirectedChannel& channel(ChannelId id) const { return channels_.at(id.value); }
    const std::vector<DirectedChannel>& channels() const { return channels_; }
    const Htlc& htlc(HtlcId id) const { return htlcs_.at(id).htlc; }
    std::vector<Htlc> all_htlcs() const;
    bool conserved() const;
    const Trace& trace() const { return trace_; }
    std::size_t rejected_fulfills() const { return rejected_fulfills_; }

    /// Outstanding HTLCs this node offered (a node knows its own HTLCs).
    std::vector<Htlc> offered_htlcs_from(NodeId node) const;

    Invoice create_invoice(NodeId destination, std::optional<Msat> amount, std::string label);
    PaymentHash random_payment_hash();
    bool knows_preimage(NodeId node, PaymentHash hash) const;

    /// Node's routing view: gossip store + own private channels + hints.
    PublicGraph routing_view(NodeId node, const std::vector<PublicChannel>& hints = {}) const;
    /// getroute over the routing view at the current block height (throws NoRouteError).
    Route find_route(NodeId source, NodeId destination, Msat amount, const RouteOptions& options = {},
                     const std::vector<PublicChannel>& hints = {});

    /// Starts a payment. Throws Error for malformed routes.
    PaymentId sendpay(NodeId sender, const Route& route, PaymentHash hash);
    bool completed(PaymentId id) const { return payments_.at(id).outcome.has_value(); }
    const PaymentOutcome& outcome(PaymentId id) const;
    /// Runs the event loop until the payment resolves.
    PaymentOutcome await(PaymentId id);
    /// Honest payment of an invoice: route, send, await.
    PaymentOutcome pay(NodeId sender, const Invoice& invoice, const RouteOptions& options = {});

    /// Honest background payment at now() + delay; the invoice is created at fire time.
    void schedule_payment(VirtualTime delay, NodeId from, NodeId to, Msat amount);
    struct ScheduledResult {
        ScheduledPayment spec;
        std::optional<PaymentId> payment;
        bool no_route = false;
    };
    const std::vector<ScheduledResult>& scheduled() const { return scheduled_; }

    // Engine entry points, invoked on message delivery.
    void handle_add_htlc(NodeId node, HtlcId htlc, const OnionPacket& onion);
    void handle_fulfill(NodeId node, HtlcId htlc, PaymentHash preimage);
    void handle_fail(NodeId node, HtlcId htlc, const FailureInfo& failure);
    /// Expires every offered HTLC with expiry <= now; returns the expired ids.
    std::vector<HtlcId> expire_htlcs(BlockHeight now);

    void deliver(NodeId from, NodeId to, std::function<void()> on_receive) override;

private:
    struct HtlcRecord {
        Htlc htlc;
        std::optional<HtlcId> incoming;
        std::optional<PaymentId> payment;
        bool fail_held = false;
    };
    struct Payment {
        NodeId sender;
        Route route;
        PaymentHash hash;
        VirtualTime started = 0;
        std::optional<PaymentOutcome> outcome;
    };

    std::size_t link_index(NodeId a, NodeId b) const;
    VirtualTime processing(NodeId n) const { return scenario_.nodes.at(n.value).processing_delay; }
    VirtualTime countermeasure_delay(NodeId n);
    void send(NodeId from, NodeId to, MessageKind kind, HtlcId htlc, Msat amount, VirtualTime hold,
              std::function<void()> on_receive);
    HtlcId offer(NodeId from, ChannelId channel, Msat amount, PaymentHash hash, BlockHeight expiry,
                 std::optional<HtlcId> incoming, std::optional<PaymentId> payment);
    void send_fail(NodeId node, HtlcId incoming, const FailureInfo& failure);
    void send_fulfill(NodeId node, HtlcId incoming, PaymentHash preimage);
    void complete(PaymentId id, PaymentOutcome outcome);
    void ensure_block_tick();
    std::vector<NodeId> peers(NodeId n) const;

    Scenario scenario_;
    Simulator sim_;
    std::vector<DirectedChannel> channels_;
    std::unique_ptr<GossipLayer> gossip_;
    std::vector<Rng> link_rng_;
    std::vector<Rng> delay_rng_;
    Rng hash_rng_;
    Rng shadow_rng_;
    std::vector<std::set<PaymentHash>> preimages_;
    std::map<HtlcId, HtlcRecord> htlcs_;
    std::map<PaymentId, Payment> payments_;
    std::vector<ScheduledResult> scheduled_;
    Trace trace_;
    std::uint64_t next_htlc_ = 1;
    PaymentId next_payment_ = 1;
    std::size_t rejected_fulfills_ = 0;
    std::size_t outstanding_ = 0;  // HTLCs in state offered
    bool tick_scheduled_ = false;
};

}  // namespace pcnsim
