#include "pcnsim/network.hpp"

#include <algorithm>
#include <sstream>

namespace pcnsim {

namespace {
constexpr std::uint64_t kHashStream = 7;
constexpr std::uint64_t kShadowStream = 11;
constexpr std::uint64_t kLinkStreamBase = 1'000;
constexpr std::uint64_t kDelayStreamBase = 1'000'000;
}  // namespace

const char* to_string(MessageKind k) {
    switch (k) {
        case MessageKind::update_add_htlc: return "update_add_htlc";
        case MessageKind::update_fulfill_htlc: return "update_fulfill_htlc";
        case MessageKind::update_fail_htlc: return "update_fail_htlc";
    }
    return "?";
}

const char* to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::success: return "success";
        case OutcomeKind::fail_along_route: return "204";
        case OutcomeKind::fail_at_destination: return "16399";
        case OutcomeKind::no_route: return "no_route";
    }
    return "?";
}

int PaymentOutcome::code() const {
    switch (kind) {
        case OutcomeKind::success: return 0;
        case OutcomeKind::fail_along_route: return kFailAlongRoute;
        case OutcomeKind::fail_at_destination: return kFailAtDestination;
        case OutcomeKind::no_route: return -1;
    }
    return -1;
}

std::vector<LocalLogEntry> Trace::local_log(NodeId node) const {
    std::vector<LocalLogEntry> out;
    for (const auto& r : records_) {
        if (r.from == node) out.push_back({r.sent_at, r.kind, true, r.to, r.htlc, r.amount});
        if (r.to == node) out.push_back({r.received_at, r.kind, false, r.from, r.htlc, r.amount});
    }
    std::stable_sort(out.begin(), out.end(), [](const LocalLogEntry& x, const LocalLogEntry& y) { return x.at < y.at; });
    return out;
}

std::string Trace::to_csv(const std::function<std::string(NodeId)>& node_name) const {
    std::ostringstream os;
    os << "sent_us,received_us,kind,from,to,htlc,amount_msat\n";
    for (const auto& r : records_)
        os << r.sent_at << ',' << r.received_at << ',' << to_string(r.kind) << ',' << node_name(r.from) << ','
           << node_name(r.to) << ',' << r.htlc.value << ',' << r.amount << '\n';
    return os.str();
}

Network::Network(Scenario scenario)
    : scenario_(std::move(scenario)),
      sim_(scenario_.block_interval),
      hash_rng_(derive_seed(scenario_.seed, kHashStream)),
      shadow_rng_(derive_seed(scenario_.seed, kShadowStream)),
      preimages_(scenario_.nodes.size()) {
    scenario_.validate();
    for (std::size_t i = 0; i < scenario_.links.size(); ++i)
        link_rng_.emplace_back(derive_seed(scenario_.seed, kLinkStreamBase + i));
    for (std::size_t i = 0; i < scenario_.nodes.size(); ++i)
        delay_rng_.emplace_back(derive_seed(scenario_.seed, kDelayStreamBase + i));

    channels_.reserve(scenario_.channels.size());
    for (std::size_t i = 0; i < scenario_.channels.size(); ++i) {
        const auto& c = scenario_.channels[i];
        channels_.emplace_back(ChannelId{static_cast<std::uint32_t>(i)}, c.a, c.b, c.capacity, c.balance_ab,
                               c.balance_ba, c.policy_ab, c.policy_ba, c.is_private);
    }

    gossip_ = std::make_unique<GossipLayer>(scenario_.nodes.size(), *this, [this](NodeId n) { return peers(n); });
    for (const auto& ch : channels_) {
        gossip_->announce(ch);
        gossip_->update_policy(ch.node_a(), ch.id(), ch.policy(Direction::AtoB));
        gossip_->update_policy(ch.node_b(), ch.id(), ch.policy(Direction::BtoA));
    }
    sim_.run();
}

std::vector<NodeId> Network::peers(NodeId n) const {
    std::vector<NodeId> out;
    for (const auto& ch : channels_)
        if (ch.has_endpoint(n)) out.push_back(ch.peer_of(n));
    return out;
}

std::size_t Network::link_index(NodeId a, NodeId b) const {
    for (std::size_t i = 0; i < scenario_.links.size(); ++i)
        if (scenario_.links[i].connects(a, b)) return i;
    throw Error("no link between " + node_name(a) + " and " + node_name(b));
}

void Network::deliver(NodeId from, NodeId to, std::function<void()> on_receive) {
    const std::size_t li = link_index(from, to);
    const VirtualTime latency = sample_latency(scenario_.links[li], link_rng_[li]);
    sim_.schedule_after(latency, EventKind::message, std::move(on_receive));
}

std::vector<Htlc> Network::all_htlcs() const {
    std::vector<Htlc> out;
    for (const auto& [id, rec] : htlcs_) out.push_back(rec.htlc);
    return out;
}

bool Network::conserved() const {
    return std::all_of(channels_.begin(), channels_.end(), [](const DirectedChannel& c) { return c.conserved(); });
}

std::vector<Htlc> Network::offered_htlcs_from(NodeId node) const {
    std::vector<Htlc> out;
    for (const auto& [id, rec] : htlcs_)
        if (rec.htlc.upstream == node && rec.htlc.state == HtlcState::offered) out.push_back(rec.htlc);
    return out;
}

Invoice Network::create_invoice(NodeId destination, std::optional<Msat> amount, std::string label) {
    Invoice inv;
    inv.destination = destination;
    inv.payment_hash = random_payment_hash();
    inv.amount = amount;
    inv.expiry = sim_.now() + 3600 * kSecond;
    inv.label = std::move(label);
    inv.route_hints = gossip_->private_channels(destination);
    preimages_.at(destination.value).insert(inv.payment_hash);
    return inv;
}

PaymentHash Network::random_payment_hash() { return PaymentHash{hash_rng_()}; }

bool Network::knows_preimage(NodeId node, PaymentHash hash) const {
    return preimages_.at(node.value).count(hash) != 0;
}

PublicGraph Network::routing_view(NodeId node, const std::vector<PublicChannel>& hints) const {
    PublicGraph g = gossip_->public_view(node);
    g.merge(gossip_->private_channels(node));
    g.merge(hints);
    return g;
}

Route Network::find_route(NodeId source, NodeId destination, Msat amount, const RouteOptions& options,
                          const std::vector<PublicChannel>& hints) {
    RouteQuery q;
    q.source = source;
    q.destination = destination;
    q.amount = amount;
    q.riskfactor = options.riskfactor;
    q.fuzzpercent = options.fuzzpercent;
    q.fuzz_seed = scenario_.seed;
    q.excluded_channels = options.excluded_channels;
    q.current_height = sim_.block_height();
    q.final_cltv = scenario_.final_cltv;
    Route r = getroute(q, routing_view(source, hints));
    if (options.shadow) r = apply_shadow_route(std::move(r), shadow_rng_, scenario_.shadow_offset);
    return r;
}

void Network::send(NodeId from, NodeId to, MessageKind kind, HtlcId htlc, Msat amount, VirtualTime hold,
                   std::function<void()> on_receive) {
    const std::size_t li = link_index(from, to);
    const VirtualTime sent_at = sim_.now() + hold;
    const VirtualTime received_at = sent_at + sample_latency(scenario_.links[li], link_rng_[li]);
    trace_.append({sent_at, received_at, kind, from, to, htlc, amount});
    sim_.schedule(received_at, EventKind::message, std::move(on_receive));
}

HtlcId Network::offer(NodeId from, ChannelId channel, Msat amount, PaymentHash hash, BlockHeight expiry,
                      std::optional<HtlcId> incoming, std::optional<PaymentId> payment) {
    DirectedChannel& ch = channels_.at(channel.value);
    const Direction d = ch.direction_from(from);
    const HtlcId id{next_htlc_++};
    ch.lock(id, d, amount);
    HtlcRecord rec;
    rec.htlc = Htlc{id, channel, d, amount, hash, expiry, HtlcState::offered, from, ch.peer_of(from)};
    rec.incoming = incoming;
    rec.payment = payment;
    htlcs_.emplace(id, rec);
    ++outstanding_;
    ensure_block_tick();
    return id;
}

PaymentId Network::sendpay(NodeId sender, const Route& route, PaymentHash hash) {
    validate_route(route);
    if (route.source() != sender) throw Error("malformed route: does not start at sender");
    for (const auto& hop : route.hops) {
        if (hop.channel.value >= channels_.size()) throw Error("malformed route: unknown channel");
        const auto& ch = channels_[hop.channel.value];
        if (!ch.has_endpoint(hop.from) || ch.peer_of(hop.from) != hop.to)
            throw Error("malformed route: hop endpoints do not match channel");
    }

    const PaymentId pid = next_payment_++;
    payments_[pid] = Payment{sender, route, hash, sim_.now(), std::nullopt};

    const RouteHop& first = route.hops.front();
    const DirectedChannel& ch = channels_.at(first.channel.value);
    if (!ch.can_lock(ch.direction_from(sender), first.forward_amount)) {
        complete(pid, PaymentOutcome{OutcomeKind::fail_along_route, sender, 0});
        return pid;
    }
    const HtlcId id = offer(sender, first.channel, first.forward_amount, hash, first.expiry, std::nullopt, pid);
    const OnionPacket onion = OnionPacket::build(route);
    const NodeId next = first.to;
    send(sender, next, MessageKind::update_add_htlc, id, first.forward_amount, 0,
         [this, next, id, onion] { handle_add_htlc(next, id, onion); });
    return pid;
}

const PaymentOutcome& Network::outcome(PaymentId id) const {
    const auto& p = payments_.at(id);
    if (!p.outcome) throw Error("payment still in flight");
    return *p.outcome;
}

PaymentOutcome Network::await(PaymentId id) {
    sim_.run_until([&] { return completed(id); });
    return outcome(id);
}

PaymentOutcome Network::pay(NodeId sender, const Invoice& invoice, const RouteOptions& options) {
    if (!invoice.amount) throw Error("pay: invoice carries no amount");
    Route route;
    try {
        route = find_route(sender, invoice.destination, *invoice.amount, options, invoice.route_hints);
    } catch (const NoRouteError&) {
        return PaymentOutcome{OutcomeKind::no_route, std::nullopt, 0};
    }
    return await(sendpay(sender, route, invoice.payment_hash));
}

void Network::schedule_payment(VirtualTime delay, NodeId from, NodeId to, Msat amount) {
    const std::size_t idx = scheduled_.size();
    scheduled_.push_back({ScheduledPayment{sim_.now() + delay, from, to, amount}, std::nullopt, false});
    sim_.schedule_after(delay, EventKind::timer, [this, idx, from, to, amount] {
        const Invoice inv = create_invoice(to, amount, "scheduled-" + std::to_string(idx));
        try {
            const Route r = find_route(from, to, amount, {}, inv.route_hints);
            scheduled_[idx].payment = sendpay(from, r, inv.payment_hash);
        } catch (const NoRouteError&) {
            scheduled_[idx].no_route = true;
        }
    });
}

VirtualTime Network::countermeasure_delay(NodeId n) {
    const DelayRange& r = scenario_.fulfill_delay;
    if (!r.enabled()) return 0;
    std::uniform_int_distribution<VirtualTime> dist(r.min, r.max);
    return dist(delay_rng_.at(n.value));
}

void Network::handle_add_htlc(NodeId node, HtlcId id, const OnionPacket& onion) {
    HtlcRecord& rec = htlcs_.at(id);
    if (rec.htlc.state != HtlcState::offered || rec.fail_held) return;
    const Htlc in = rec.htlc;
    const auto peeled = onion.peel();
    const HopPayload& p = peeled.payload;

    if (p.final) {
        const bool details_ok = in.amount >= p.forward_amount && in.expiry >= p.outgoing_expiry &&
                                in.expiry > sim_.block_height();
        if (details_ok && knows_preimage(node, in.payment_hash))
            send_fulfill(node, id, in.payment_hash);
        else
            send_fail(node, id, {kFailAtDestination, node});
        return;
    }

    auto fail_here = [&] { send_fail(node, id, {kFailAlongRoute, node}); };
    if (p.next_channel.value >= channels_.size()) return fail_here();
    DirectedChannel& out = channels_[p.next_channel.value];
    if (!out.has_endpoint(node)) return fail_here();
    const Direction d = out.direction_from(node);
    const FeePolicy& policy = out.policy(d);
    if (in.expiry <= sim_.block_height()) return fail_here();
    if (in.amount < p.forward_amount + compute_fee(p.forward_amount, policy)) return fail_here();
    if (in.expiry < p.outgoing_expiry + policy.cltv_delta) return fail_here();
    if (!out.can_lock(d, p.forward_amount)) return fail_here();

    const HtlcId next_id = offer(node, out.id(), p.forward_amount, in.payment_hash, p.outgoing_expiry, id, std::nullopt);
    const NodeId next = out.peer_of(node);
    const OnionPacket inner = peeled.next;
    send(node, next, MessageKind::update_add_htlc, next_id, p.forward_amount, 0,
         [this, next, next_id, inner] { handle_add_htlc(next, next_id, inner); });
}

void Network::send_fail(NodeId node, HtlcId incoming, const FailureInfo& failure) {
    const Htlc& in = htlcs_.at(incoming).htlc;
    const NodeId up = in.upstream;
    send(node, up, MessageKind::update_fail_htlc, incoming, in.amount, processing(node),
         [this, up, incoming, failure] { handle_fail(up, incoming, failure); });
}

void Network::send_fulfill(NodeId node, HtlcId incoming, PaymentHash preimage) {
    const Htlc& in = htlcs_.at(incoming).htlc;
    const NodeId up = in.upstream;
    const VirtualTime hold = processing(node) + countermeasure_delay(node);
    send(node, up, MessageKind::update_fulfill_htlc, incoming, in.amount, hold,
         [this, up, incoming, preimage] { handle_fulfill(up, incoming, preimage); });
}

void Network::handle_fulfill(NodeId node, HtlcId id, PaymentHash preimage) {
    auto it = htlcs_.find(id);
    if (it == htlcs_.end()) return;
    HtlcRecord& rec = it->second;
    if (rec.htlc.upstream != node) return;
    if (rec.htlc.state != HtlcState::offered) {
        ++rejected_fulfills_;
        return;
    }
    if (preimage != rec.htlc.payment_hash) return;
    if (rec.htlc.expiry <= sim_.block_height()) {
        expire_htlcs(sim_.block_height());
        ++rejected_fulfills_;
        return;
    }
    channels_.at(rec.htlc.channel.value).settle(id);
    rec.htlc.transition(HtlcState::fulfilled);
    --outstanding_;
    if (rec.incoming) {
        send_fulfill(node, *rec.incoming, preimage);
    } else if (rec.payment) {
        complete(*rec.payment, PaymentOutcome{OutcomeKind::success, std::nullopt, 0});
    }
}

void Network::handle_fail(NodeId node, HtlcId id, const FailureInfo& failure) {
    auto it = htlcs_.find(id);
    if (it == htlcs_.end()) return;
    HtlcRecord& rec = it->second;
    if (rec.htlc.upstream != node || rec.htlc.state != HtlcState::offered || rec.fail_held) return;
    if (scenario_.lock_mode == LockMode::release_on_fail) {
        channels_.at(rec.htlc.channel.value).release(id);
        rec.htlc.transition(HtlcState::failed);
        --outstanding_;
    } else {
        rec.fail_held = true;
    }
    if (rec.incoming) {
        send_fail(node, *rec.incoming, failure);
    } else if (rec.payment) {
        PaymentOutcome o;
        if (failure.code == kFailAtDestination) {
            o.kind = OutcomeKind::fail_at_destination;
        } else {
            o.kind = OutcomeKind::fail_along_route;
            o.failing_hop = failure.origin;
        }
        complete(*rec.payment, o);
    }
}

std::vector<HtlcId> Network::expire_htlcs(BlockHeight now) {
    std::vector<HtlcId> expired;
    for (auto& [id, rec] : htlcs_) {
        if (rec.htlc.state != HtlcState::offered || rec.htlc.expiry > now) continue;
        channels_.at(rec.htlc.channel.value).release(id);
        rec.htlc.transition(HtlcState::expired);
        --outstanding_;
        expired.push_back(id);
        if (rec.payment && !payments_.at(*rec.payment).outcome)
            complete(*rec.payment, PaymentOutcome{OutcomeKind::fail_along_route, rec.htlc.downstream, 0});
    }
    return expired;
}

void Network::complete(PaymentId id, PaymentOutcome outcome) {
    Payment& p = payments_.at(id);
    if (p.outcome) return;
    outcome.latency = sim_.now() - p.started;
    p.outcome = outcome;
}

void Network::ensure_block_tick() {
    if (tick_scheduled_ || outstanding_ == 0) return;
    tick_scheduled_ = true;
    const VirtualTime next_boundary = (sim_.block_height() + 1) * sim_.block_interval();
    sim_.schedule(next_boundary, EventKind::block_tick, [this] {
        tick_scheduled_ = false;
        expire_htlcs(sim_.block_height());
        ensure_block_tick();
    });
}

}  // namespace pcnsim
