// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "oracles/bisection.hpp"
#include "pcnsim/battery.hpp"
#include "pcnsim/experiment.hpp"
#include "pcnsim/network.hpp"
#include "pcnsim/probe.hpp"
#include "pcnsim/timing.hpp"
#include "property/properties.hpp"

using namespace pcnsim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& title, bool pass, const std::string& detail) {
    std::printf("%s  criterion %2d  %-28s %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    if (!pass) ++failures;
}

void guarded(int id, const std::string& title, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, title, false, std::string("exception: ") + e.what());
    }
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Scenario fig2() { return load_scenario(testutil::scenario_dir() + "/fig2.scenario"); }

Prober fig2_prober(Network& net, Msat threshold = 1000) {
    const auto& s = net.scenario();
    return Prober(net, make_probe_target(net, s.node("3"), s.node("4"), s.channel("c24")), {threshold, 1.0});
}

void set_split(Scenario& s, const std::string& channel, Msat ab) {
    auto& c = s.channels[s.channel(channel).value];
    c.balance_ab = ab;
    c.balance_ba = c.capacity - ab;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        out[fs::relative(e.path(), root).string()] = os.str();
    }
    return out;
}

// 1. Probe convergence on the four-node chain.
void probe_convergence() {
    const auto t0 = std::chrono::steady_clock::now();
    Network net(fig2());
    Prober p = fig2_prober(net);
    const BalanceEstimate e = p.find_init_max();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const Msat err = 100'000'000 - e.estimate;
    const bool pass = err >= 0 && err < 1000 && e.probes_used <= 18 && wall < 1.0;
    report(1, "probe convergence", pass,
           fmt("estimate=%lld error=%lld msat probes=%d (budget %d) wall=%.3f s", (long long)e.estimate,
               (long long)err, e.probes_used, probe_budget(200'000'000, 1000), wall));
}

// 2. Monitoring detects a 50M payment over the observed channel, then a routed 30M one.
void payment_detection() {
    const Scenario s = fig2();
    Network net(s);
    Prober p = fig2_prober(net);
    const auto init = p.find_init_max();
    for (const auto& pay : s.payments) net.schedule_payment(pay.at, pay.from, pay.to, pay.amount);
    const MonitorResult m = p.monitor(init.estimate, s.probe->monitor_interval, s.probe->monitor_duration);
    bool pass = m.reports.size() == 2 && !m.halted;
    Msat d1 = 0, e2 = 0;
    if (m.reports.size() >= 2) {
        d1 = m.reports[0].delta;
        e2 = m.reports[1].new_estimate;
        pass = pass && std::llabs(d1 - 50'000'000) <= 2000 && std::llabs(e2 - 20'000'000) <= 2000;
    }
    report(2, "payment detection", pass,
           fmt("reports=%zu first delta=%lld re-estimate=%lld msat", m.reports.size(), (long long)d1, (long long)e2));
}

// 3. Threshold sweep: probes_used tracks ceil(log2(ceiling/threshold)) within one.
void threshold_sweep() {
    bool pass = true;
    std::string detail;
    int prev = -1;
    for (Msat t : {1'000'000LL, 100'000LL, 10'000LL, 1'000LL}) {
        Network net(fig2());
        Prober p = fig2_prober(net, t);
        const auto e = p.find_init_max();
        const int expect = static_cast<int>(std::ceil(std::log2(200'000'000.0 / static_cast<double>(t))));
        pass = pass && std::abs(e.probes_used - expect) <= 1 && e.probes_used > prev;
        pass = pass && 100'000'000 - e.estimate < t;
        prev = e.probes_used;
        detail += fmt("t=%lld:%d(%d) ", (long long)t, e.probes_used, expect);
    }
    // the exact +1 per halving, on power-of-two-aligned ceilings
    for (Msat t = 1 << 12; t >= 4; t /= 2)
        for (Msat b : {Msat{0}, Msat{5'000'000}, Msat{1} << 24})
            pass = pass && oracle::bisect(Msat{1} << 24, t / 2, b).amounts.size() ==
                               oracle::bisect(Msat{1} << 24, t, b).amounts.size() + 1;
    report(3, "accuracy/duration trade-off", pass, detail + "halving:+1");
}

// 4. The estimate is the route bottleneck, not the target channel.
void bottleneck() {
    Scenario s = fig2();
    set_split(s, "c12", 30'000'000);
    Network net(s);
    const auto e = fig2_prober(net).find_init_max();
    const Msat err = 30'000'000 - e.estimate;
    report(4, "bottleneck property", err >= 0 && err < 1000 && net.channel(s.channel("c24")).balance_ab() == 100'000'000,
           fmt("target=100000000 intermediate=30000000 estimate=%lld", (long long)e.estimate));
}

// 5. Held-until-expiry locks reproduce the route lockup.
void lockup() {
    Scenario s = fig2();
    s.lock_mode = LockMode::held_until_expiry;
    set_split(s, "c31", 150'000'000);
    set_split(s, "c12", 150'000'000);
    Network net(s);
    std::size_t events = 0, violations = 0;
    net.sim().set_after_event([&] {
        ++events;
        if (!net.conserved()) ++violations;
    });
    Prober p = fig2_prober(net);
    const ChannelId c24 = s.channel("c24");
    const Msat a = 30'000'000, balance = 100'000'000;
    int k = 0;
    bool pass = true;
    while (static_cast<Msat>(k) * a <= balance - a) {
        pass = pass && p.probe(a) == OutcomeKind::fail_at_destination;
        ++k;
    }
    const auto& ch = net.channel(c24);
    const bool balance_unchanged = ch.balance_ab() + ch.locked(Direction::AtoB) == balance;
    const OutcomeKind blocked = p.probe(a);
    pass = pass && blocked == OutcomeKind::fail_along_route && balance_unchanged;

    BlockHeight latest = 0;
    for (const auto& h : net.all_htlcs()) latest = std::max(latest, h.expiry);
    net.sim().run_until((latest + 1) * net.sim().block_interval());
    const bool released = net.channel(c24).balance_ab() == balance && net.channel(c24).locked_total() == 0;
    const OutcomeKind after = p.probe(a);
    pass = pass && released && after == OutcomeKind::fail_at_destination && violations == 0 && net.conserved();
    report(5, "lockup reproduction", pass,
           fmt("k=%d probes of %lld, next=%s, after expiry (height %lld)=%s, conservation checks=%zu violations=%zu", k,
               (long long)a, to_string(blocked), (long long)latest, to_string(after), events, violations));
}

// 6. A payment ending at the victim and one forwarded through it privately look identical.
void forwarding_ambiguity() {
    auto run = [](bool forwarded) {
        Scenario s = fig2();
        s.payments.clear();
        if (forwarded) {
            // defined last so every existing id and RNG stream is unchanged
            s.nodes.push_back({"P", kMillisecond});
            ChannelSpec priv;
            priv.name = "c4p";
            priv.a = s.node("4");
            priv.b = s.node("P");
            priv.capacity = 200'000'000;
            priv.balance_ab = 100'000'000;
            priv.balance_ba = 100'000'000;
            priv.policy_ab = priv.policy_ba = FeePolicy{0, 0};
            priv.is_private = true;
            s.channels.push_back(priv);
            s.links.push_back(LinkSpec{priv.a, priv.b, 1 * kMillisecond, 0});
        }
        Network net(s);
        // gossip to P finishes slightly later; start both worlds at the same instant
        net.sim().run_until(1 * kSecond);
        Prober p = fig2_prober(net);
        const auto init = p.find_init_max();
        net.schedule_payment(7 * kSecond, s.node("2"), s.node(forwarded ? "P" : "4"), 25'000'000);
        const MonitorResult m = p.monitor(init.estimate, 5 * kSecond, 20 * kSecond);
        bool paid = false;
        for (const auto& sp : net.scheduled())
            paid = sp.payment && net.outcome(*sp.payment).kind == OutcomeKind::success;
        return std::make_pair(m, paid);
    };
    const auto [direct, ok1] = run(false);
    const auto [forwarded, ok2] = run(true);
    const bool pass = ok1 && ok2 && !direct.reports.empty() && direct.reports == forwarded.reports;
    std::string detail = fmt("reports %zu vs %zu", direct.reports.size(), forwarded.reports.size());
    if (!direct.reports.empty())
        detail += fmt(", first: t=%lld delta=%lld", (long long)direct.reports[0].time, (long long)direct.reports[0].delta);
    report(6, "forwarding ambiguity", pass, detail);
}

// 7. Observed deltas equal the trace-derived downstream RTTs plus processing, exactly.
void timing_exactness() {
    testutil::Builder b(3);
    std::vector<NodeId> n;
    for (int i = 0; i < 6; ++i) n.push_back(b.node("n" + std::to_string(i), (i + 1) * 700));
    const VirtualTime lat[] = {3'001, 17'333, 41'007, 8'999, 123'457};
    for (int i = 0; i < 5; ++i) b.channel(n[i], n[i + 1], 1'000'000'000, 1'000'000'000, FeePolicy{1, 10}, false, lat[i]);
    const Scenario s = b.build();
    Network net(s);
    for (int i = 0; i < 20; ++i) {
        net.pay(n[0], net.create_invoice(n[5], 1000 + i, "exact"));
        net.sim().run_until(net.sim().now() + kSecond);
    }
    std::size_t checked = 0, mismatched = 0;
    const auto& recs = net.trace().records();
    for (int obs = 0; obs < 5; ++obs) {
        for (const auto& smp : record(n[obs], net.trace())) {
            // follow the HTLC chain downstream through the trace
            VirtualTime expect = 0;
            HtlcId cur = smp.htlc;
            NodeId at = n[obs];
            while (true) {
                const TraceRecord* add = nullptr;
                const TraceRecord* ful = nullptr;
                for (const auto& r : recs) {
                    if (r.htlc != cur) continue;
                    if (r.kind == MessageKind::update_add_htlc) add = &r;
                    if (r.kind == MessageKind::update_fulfill_htlc) ful = &r;
                }
                if (!add || !ful) break;
                expect += (add->received_at - add->sent_at) + (ful->received_at - ful->sent_at);
                expect += s.nodes[add->to.value].processing_delay;
                at = add->to;
                // next hop's add is the one sent by `at` at the time it received this one
                const TraceRecord* next = nullptr;
                for (const auto& r : recs)
                    if (r.kind == MessageKind::update_add_htlc && r.from == at && r.sent_at == add->received_at) next = &r;
                if (!next) break;
                cur = next->htlc;
            }
            ++checked;
            if (expect != smp.delta()) ++mismatched;
        }
    }
    report(7, "timing exactness", checked == 100 && mismatched == 0,
           fmt("samples checked=%zu mismatched=%zu (integer microseconds)", checked, mismatched));
}

// 8. 414 ms scenario: sample mean and hop composition.
void timing_statistics() {
    const Scenario s = load_scenario(testutil::scenario_dir() + "/timing414.scenario");
    const auto runs = run_seeds_serial(s, AttackKind::timing, {}, {s.seed});
    const auto& r = runs.front();
    if (!r.ok) {
        report(8, "timing statistics", false, r.error);
        return;
    }
    const auto& t = *r.timing;
    LatencyCalibration cal;
    cal.classes = {{"local", 0.180, 0.0}, {"network", 0.234, 0.0}};
    const auto est = estimate_remaining_hops(t.summary.mean, cal);
    const bool pass = t.summary.n == 25 && std::abs(t.summary.mean - 0.414) <= 3 * 0.050 / 5 &&
                      est.best == std::vector<int>{1, 1};
    report(8, "timing statistics", pass,
           format_summary(t.summary) + ", |μ-0.414|=" + fmt("%.4f", std::abs(t.summary.mean - 0.414)) +
               " (bound 0.030), best fit " + format_composition(est.best, cal));
}

// 9. Hop-estimator battery with and without the fulfill-delay countermeasure.
void battery() {
    BatteryConfig c;
    c.classes = {LinkClass{"local", 49'500, 2 * kMillisecond, kMillisecond},
                 LinkClass{"network", 124'500, 2 * kMillisecond, kMillisecond}};
    c.runs = 100;
    c.min_hops = 1;
    c.max_hops = 4;
    c.seed = 17;
    const auto cal = battery_calibration(c);
    const double separation = cal.classes[1].mean - cal.classes[0].mean;
    const double combined = std::sqrt(cal.classes[0].stddev * cal.classes[0].stddev +
                                      cal.classes[1].stddev * cal.classes[1].stddev);
    const auto plain = run_battery_parallel(c);
    const double acc = battery_accuracy(plain);

    BatteryConfig cm = c;
    cm.fulfill_delay = DelayRange{0, 400 * kMillisecond};  // wider than the 150 ms class spacing
    const double acc_cm = battery_accuracy(run_battery_parallel(cm));
    const bool same_as_serial = plain == run_battery_serial(c);
    report(9, "hop-estimator battery", separation > 6 * combined && acc >= 0.95 && acc_cm < 0.5 && same_as_serial,
           fmt("separation=%.1f combined σ (need >6), accuracy=%.2f, with countermeasure=%.2f, serial==parallel:%s",
               separation / combined, acc, acc_cm, same_as_serial ? "yes" : "no"));
}

// 10. Byte-identical reruns; distinct seeds give distinct traces.
void determinism() {
    const fs::path root = fs::temp_directory_path() / "pcnsim-acceptance";
    fs::remove_all(root);
    auto run = [&](const std::string& dir, std::vector<std::uint64_t> seeds, bool parallel) {
        ExperimentSpec spec;
        spec.scenario_path = testutil::scenario_dir() + "/fig2.scenario";
        spec.attack = AttackKind::both;
        spec.seeds = std::move(seeds);
        spec.out_dir = root / dir;
        spec.parallel = parallel;
        const auto rep = run_experiment(spec);
        return std::make_pair(rep, read_tree(spec.out_dir));
    };
    std::vector<std::uint64_t> ten;
    for (std::uint64_t i = 1; i <= 10; ++i) ten.push_back(i);
    const auto [rep_a, a] = run("a", ten, true);
    const auto [rep_b, b] = run("b", ten, false);
    const bool identical = a == b && !a.empty();
    std::set<std::string> traces;
    for (std::uint64_t i = 1; i <= 10; ++i) traces.insert(a.at("seed-" + std::to_string(i) + "/trace.csv"));
    std::size_t csvs = 0;
    for (const auto& [name, _] : a) csvs += name.ends_with(".csv") ? 1 : 0;
    report(10, "determinism", identical && traces.size() == 10 && !rep_a.any_error(),
           fmt("%zu files (%zu CSV) byte-identical across reruns: %s; distinct traces: %zu/10", a.size(), csvs,
               identical ? "yes" : "no", traces.size()));
}

// 11. Property suites.
void properties() {
    const auto c1 = props::conservation(LockMode::release_on_fail, 11);
    const auto c2 = props::conservation(LockMode::held_until_expiry, 12);
    const auto blind = props::balance_blindness(5, 30, 10);
    const auto brute = props::router_vs_bruteforce(2024, 100);
    const bool pass = c1.events >= 10'000 && c2.events >= 10'000 && c1.violations + c2.violations == 0 &&
                      blind.mismatches == 0 && brute.mismatches == 0 && brute.compared + brute.no_route == 100;
    report(11, "property suites", pass,
           fmt("conservation: %zu+%zu events, %zu violations; balance-blind: %d queries, %d changed; brute force: "
               "%d/100 compared (%d no-route), %d mismatches",
               c1.events, c2.events, c1.violations + c2.violations, blind.queries, blind.mismatches, brute.compared,
               brute.no_route, brute.mismatches));
}

}  // namespace

int main() {
    guarded(1, "probe convergence", probe_convergence);
    guarded(2, "payment detection", payment_detection);
    guarded(3, "accuracy/duration trade-off", threshold_sweep);
    guarded(4, "bottleneck property", bottleneck);
    guarded(5, "lockup reproduction", lockup);
    guarded(6, "forwarding ambiguity", forwarding_ambiguity);
    guarded(7, "timing exactness", timing_exactness);
    guarded(8, "timing statistics", timing_statistics);
    guarded(9, "hop-estimator battery", battery);
    guarded(10, "determinism", determinism);
    guarded(11, "property suites", properties);
    std::printf("%s: %d criterion failure(s)\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
