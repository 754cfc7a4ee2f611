#include "pcnsim/probe.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pcnsim {

ProbeTarget make_probe_target(const Network& net, NodeId attacker, NodeId victim, ChannelId observed) {
    const PublicGraph view = net.routing_view(attacker);
    const PublicChannel* ch = view.find(observed);
    if (ch == nullptr) throw Error("observed channel is not in the attacker's gossip view");
    if (!ch->has_endpoint(victim)) throw Error("observed channel does not end at the victim");
    return ProbeTarget{attacker, victim, observed, ch->capacity};
}

int probe_budget(Msat ceiling, Msat threshold) {
    if (threshold <= 0) throw Error("threshold must be positive");
    if (ceiling < threshold) return 0;
    int bits = 0;
    // smallest b with 2^b >= ceiling / threshold, exactly in integers
    while ((static_cast<__int128>(threshold) << bits) < ceiling) ++bits;
    return bits + 1;
}

Prober::Prober(Network& net, ProbeTarget target, ProberConfig config)
    : net_(net), target_(target), config_(config) {
    if (config_.threshold < 2) throw Error("probe threshold must be at least 2 msat");
    // Pin the last hop to the observed channel.
    for (const auto& ch : net_.routing_view(target_.attacker).channels)
        if (ch.has_endpoint(target_.victim) && ch.id != target_.observed_channel) excluded_.insert(ch.id);
}

OutcomeKind Prober::probe(Msat amount) {
    if (amount <= 0) throw Error("probe amount must be positive");
    const VirtualTime t = net_.sim().now();
    RouteOptions opts;
    opts.riskfactor = config_.riskfactor;
    opts.excluded_channels = excluded_;
    OutcomeKind kind = OutcomeKind::no_route;
    try {
        const Route route = net_.find_route(target_.attacker, target_.victim, amount, opts);
        Msat cap = 0;
        const PublicGraph view = net_.routing_view(target_.attacker);
        for (std::size_t i = 0; i < route.hops.size(); ++i) {
            const Msat c = view.find(route.hops[i].channel)->capacity;
            cap = i == 0 ? c : std::min(cap, c);
        }
        route_capacity_ = cap;
        const PaymentId pid = net_.sendpay(target_.attacker, route, net_.random_payment_hash());
        kind = net_.await(pid).kind;
        if (kind == OutcomeKind::success) kind = OutcomeKind::fail_at_destination;
    } catch (const NoRouteError&) {
        kind = OutcomeKind::no_route;
    }
    if (kind == OutcomeKind::fail_at_destination) bound_min_ = std::max(bound_min_, amount);
    if (kind == OutcomeKind::fail_along_route) bound_max_ = std::min(bound_max_, amount);
    log_.push_back({t, amount, kind, bound_min_, bound_max_});
    return kind;
}

BalanceEstimate Prober::find_init_max() {
    const VirtualTime start = net_.sim().now();
    bound_min_ = 0;
    bound_max_ = target_.capacity_ceiling;
    BalanceEstimate est;
    Msat amount = bound_max_ / 2;
    while (bound_max_ - bound_min_ >= config_.threshold) {
        const OutcomeKind o = probe(amount);
        ++est.probes_used;
        if (o == OutcomeKind::no_route) throw NoRouteError("No suitable route found.");
        amount = (bound_min_ + bound_max_) / 2;
    }
    est.min_msat = bound_min_;
    est.max_msat = bound_max_;
    est.estimate = bound_min_;
    est.duration = net_.sim().now() - start;
    return est;
}

Msat Prober::locked_probe_funds() const {
    Msat total = 0;
    for (const auto& h : net_.offered_htlcs_from(target_.attacker)) total += h.amount;
    return total;
}

MonitorResult Prober::monitor(Msat init_max, VirtualTime interval, VirtualTime duration) {
    if (interval <= 0) throw Error("monitor interval must be positive");
    MonitorResult result;
    Msat current = init_max;
    const VirtualTime end = net_.sim().now() + duration;
    VirtualTime next = net_.sim().now() + interval;
    bool over_budget = false;

    auto rerun = [&](VirtualTime t) -> bool {
        try {
            const BalanceEstimate est = find_init_max();
            result.reports.push_back({t, current, est.estimate, current - est.estimate});
            current = est.estimate;
            return true;
        } catch (const NoRouteError&) {
            result.halted = true;
            result.halt_reason = "route lost during re-estimation";
            return false;
        }
    };

    while (next <= end) {
        net_.sim().run_until(next);
        const VirtualTime t = net_.sim().now();
        ++result.checks;

        if (net_.scenario().lock_mode == LockMode::held_until_expiry && route_capacity_) {
            const Msat locked = locked_probe_funds();
            const bool now_over = locked + current > *route_capacity_;
            if (now_over && !over_budget) {
                std::ostringstream w;
                w << "t=" << t << "us: locked probe funds " << locked << " msat plus estimate " << current
                  << " msat exceed route capacity " << *route_capacity_ << " msat";
                result.warnings.push_back(w.str());
            }
            over_budget = now_over;
        }

        const OutcomeKind o = probe(current);
        if (o == OutcomeKind::no_route) {
            result.halted = true;
            result.halt_reason = "route lost";
            break;
        }
        if (o == OutcomeKind::fail_along_route) {
            if (!rerun(t)) break;
        } else {
            const OutcomeKind up = probe(current + config_.threshold);
            if (up == OutcomeKind::no_route) {
                result.halted = true;
                result.halt_reason = "route lost";
                break;
            }
            if (up == OutcomeKind::fail_at_destination && !rerun(t)) break;
        }
        while (next <= net_.sim().now()) next += interval;
    }
    result.final_estimate = current;
    return result;
}

std::string Prober::probes_csv() const {
    std::ostringstream os;
    os << "time_us,amount_msat,outcome,min_msat,max_msat\n";
    for (const auto& r : log_)
        os << r.time << ',' << r.amount << ',' << to_string(r.outcome) << ',' << r.min_msat << ',' << r.max_msat << '\n';
    return os.str();
}

std::string Prober::monitor_csv(const MonitorResult& result) {
    std::ostringstream os;
    os << "time_us,old_estimate_msat,new_estimate_msat,delta_msat\n";
    for (const auto& r : result.reports)
        os << r.time << ',' << r.old_estimate << ',' << r.new_estimate << ',' << r.delta << '\n';
    return os.str();
}

}  // namespace pcnsim
