#include <algorithm>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles/bisection.hpp"
#include "pcnsim/probe.hpp"

using namespace pcnsim;

namespace {

Scenario fig2() { return load_scenario(testutil::scenario_dir() + "/fig2.scenario"); }

Prober make_prober(Network& net, Msat threshold = 1000) {
    const auto& s = net.scenario();
    return Prober(net, make_probe_target(net, s.node("3"), s.node("4"), s.channel("c24")), {threshold, 1.0});
}

void set_balance(Scenario& s, const std::string& channel, Msat ab) {
    auto& c = s.channels[s.channel(channel).value];
    c.balance_ab = ab;
    c.balance_ba = c.capacity - ab;
}

}  // namespace

TEST_CASE("probe budget") {
    CHECK(probe_budget(200'000'000, 1000) == 19);
    CHECK(probe_budget(1024, 1) == 11);
    CHECK(probe_budget(1025, 1) == 12);
    CHECK(probe_budget(10, 20) == 0);
}

TEST_CASE("bisection on fig2 follows the oracle") {
    Network net(fig2());
    Prober p = make_prober(net);
    CHECK(p.target().capacity_ceiling == 200'000'000);
    const BalanceEstimate e = p.find_init_max();
    const auto expect = oracle::bisect(200'000'000, 1000, 100'000'000);
    CHECK(e.estimate == expect.estimate);
    CHECK(e.estimate > 99'999'000);
    CHECK(e.estimate <= 100'000'000);
    CHECK(e.probes_used <= 18);
    CHECK(e.max_msat - e.min_msat < 1000);
    REQUIRE(p.log().size() == expect.amounts.size());
    for (std::size_t i = 0; i < expect.amounts.size(); ++i) CHECK(p.log()[i].amount == expect.amounts[i]);
    CHECK(p.log().front().outcome == OutcomeKind::fail_at_destination);
    CHECK(net.conserved());
}

TEST_CASE("the last hop is pinned to the observed channel") {
    Scenario s = fig2();
    // a second, richer channel 1-4 must not be used
    ChannelSpec extra = s.channels[0];
    extra.name = "c14";
    extra.a = s.node("1");
    extra.b = s.node("4");
    s.channels.push_back(extra);
    s.links.push_back(LinkSpec{extra.a, extra.b, 10 * kMillisecond, 0});
    set_balance(s, "c24", 12'345'678);
    Network net(s);
    Prober p = make_prober(net);
    CHECK(p.excluded_channels().count(s.channel("c14")) == 1);
    const auto e = p.find_init_max();
    CHECK(12'345'678 - e.estimate < 1000);
    CHECK(12'345'678 - e.estimate >= 0);
}

TEST_CASE("bounds: empty and full channels") {
    Scenario empty = fig2();
    set_balance(empty, "c24", 0);
    Network n0(empty);
    CHECK(make_prober(n0).find_init_max().estimate < 1000);

    Scenario full = fig2();
    for (const char* c : {"c31", "c12", "c24"}) set_balance(full, c, 200'000'000);
    Network n1(full);
    const auto e = make_prober(n1).find_init_max();
    CHECK(e.estimate > 200'000'000 - 1000);
}

TEST_CASE("victim reachable only privately") {
    Scenario s = fig2();
    s.channels[s.channel("c24").value].is_private = true;
    Network net(s);
    CHECK_THROWS_AS(make_probe_target(net, s.node("3"), s.node("4"), s.channel("c24")), Error);
    // even with a known ceiling, probing cannot find a route
    Prober p(net, ProbeTarget{s.node("3"), s.node("4"), s.channel("c24"), 200'000'000});
    CHECK(p.probe(1000) == OutcomeKind::no_route);
    CHECK_THROWS_AS(p.find_init_max(), NoRouteError);
}

TEST_CASE("threshold below 2 is rejected") {
    Network net(fig2());
    CHECK_THROWS_AS(make_prober(net, 1), Error);
}

TEST_CASE("monitor detects payments over the observed channel") {
    const Scenario s = fig2();
    Network net(s);
    Prober p = make_prober(net);
    const auto init = p.find_init_max();
    for (const auto& pay : s.payments) net.schedule_payment(pay.at, pay.from, pay.to, pay.amount);
    const MonitorResult m = p.monitor(init.estimate, 5 * kSecond, 60 * kSecond);
    CHECK_FALSE(m.halted);
    CHECK(m.checks == 12);
    REQUIRE(m.reports.size() == 2);
    CHECK(std::abs(m.reports[0].delta - 50'000'000) <= 2000);
    CHECK(std::abs(m.reports[1].new_estimate - 20'000'000) <= 2000);
    CHECK(m.reports[0].delta == m.reports[0].old_estimate - m.reports[0].new_estimate);
    CHECK(m.final_estimate == m.reports[1].new_estimate);
    for (const auto& sp : net.scheduled()) {
        REQUIRE(sp.payment);
        CHECK(net.outcome(*sp.payment).kind == OutcomeKind::success);
    }
}

TEST_CASE("opposite transfers within one interval cancel out") {
    const Scenario s = fig2();
    Network net(s);
    Prober p = make_prober(net);
    const auto init = p.find_init_max();
    net.schedule_payment(6 * kSecond, s.node("2"), s.node("4"), 10'000'000);
    net.schedule_payment(7 * kSecond, s.node("4"), s.node("2"), 10'000'000);
    const MonitorResult m = p.monitor(init.estimate, 5 * kSecond, 20 * kSecond);
    CHECK(m.reports.empty());
    CHECK(m.final_estimate == init.estimate);
}

TEST_CASE("monitor halts when the route disappears") {
    Scenario s = fig2();
    Network net(s);
    Prober p = make_prober(net);
    const auto init = p.find_init_max();
    // a target channel that does not exist excludes every real channel into the victim
    Prober blind(net, ProbeTarget{s.node("3"), s.node("4"), ChannelId{99}, 200'000'000});
    const MonitorResult m = blind.monitor(init.estimate, 5 * kSecond, 10 * kSecond);
    CHECK(m.halted);
    CHECK_FALSE(m.halt_reason.empty());
}

TEST_CASE("held mode: locked probes warn and block") {
    Scenario s = fig2();
    s.lock_mode = LockMode::held_until_expiry;
    Network net(s);
    Prober p = make_prober(net);
    for (int i = 0; i < 3; ++i) CHECK(p.probe(30'000'000) == OutcomeKind::fail_at_destination);
    CHECK(p.locked_probe_funds() == 90'000'000);
    // 90M locked + 120M estimate exceeds the 200M route capacity
    const MonitorResult m = p.monitor(120'000'000, 5 * kSecond, 5 * kSecond);
    CHECK_FALSE(m.warnings.empty());
}

TEST_CASE("probe and monitor CSVs") {
    Network net(fig2());
    Prober p = make_prober(net);
    p.find_init_max();
    const std::string csv = p.probes_csv();
    CHECK(csv.rfind("time_us,amount_msat,outcome,min_msat,max_msat\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(p.log().size() + 1));
    MonitorResult m;
    m.reports.push_back({1, 10, 4, 6});
    CHECK(Prober::monitor_csv(m) == "time_us,old_estimate_msat,new_estimate_msat,delta_msat\n1,10,4,6\n");
}
