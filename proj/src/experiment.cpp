#include "pcnsim/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "pcnsim/network.hpp"

namespace pcnsim {

AttackKind parse_attack_kind(const std::string& text) {
    if (text == "probe") return AttackKind::probe;
    if (text == "timing") return AttackKind::timing;
    if (text == "both") return AttackKind::both;
    throw Error("unknown attack '" + text + "' (expected probe, timing or both)");
}

const char* to_string(AttackKind k) {
    switch (k) {
        case AttackKind::probe: return "probe";
        case AttackKind::timing: return "timing";
        case AttackKind::both: return "both";
    }
    return "?";
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            const auto dash = item.find('-');
            if (dash == std::string::npos) {
                out.push_back(std::stoull(item));
            } else {
                const auto lo = std::stoull(item.substr(0, dash));
                const auto hi = std::stoull(item.substr(dash + 1));
                if (hi < lo) throw Error("descending seed range '" + item + "'");
                for (auto s = lo; s <= hi; ++s) out.push_back(s);
            }
        } catch (const std::logic_error&) {
            throw Error("bad seed list entry '" + item + "'");
        }
    }
    if (out.empty()) throw Error("seed list is empty");
    return out;
}

Msat route_bottleneck(const Network& net, NodeId source, NodeId destination, const std::set<ChannelId>& excluded) {
    RouteQuery q;
    q.source = source;
    q.destination = destination;
    q.amount = 1;
    q.excluded_channels = excluded;
    const PublicGraph view = net.routing_view(source);
    Route probe_route;
    try {
        probe_route = getroute(q, view);
    } catch (const NoRouteError&) {
        return 0;
    }
    std::vector<ChannelId> path;
    for (const auto& h : probe_route.hops) path.push_back(h.channel);

    auto fits = [&](Msat amount) {
        const Route r = build_route(source, path, amount, view, 0, 0);
        for (const auto& h : r.hops) {
            const DirectedChannel& ch = net.channel(h.channel);
            if (ch.balance(ch.direction_from(h.from)) < h.forward_amount) return false;
        }
        return true;
    };
    Msat lo = 0;  // fits (trivially)
    Msat hi = view.find(path.back())->capacity + 1;
    for (const auto& c : path) hi = std::min(hi, view.find(c)->capacity + 1);
    while (hi - lo > 1) {
        const Msat mid = lo + (hi - lo) / 2;
        if (fits(mid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

Scenario apply_overrides(Scenario s, const ExperimentOverrides& o, std::uint64_t seed) {
    s.seed = seed;
    if (s.probe) {
        if (o.threshold) s.probe->threshold = *o.threshold;
        if (o.monitor_interval) s.probe->monitor_interval = *o.monitor_interval;
    }
    if (o.lock_mode) s.lock_mode = *o.lock_mode;
    if (o.fulfill_delay) s.fulfill_delay = *o.fulfill_delay;
    if (o.jitter)
        for (auto& l : s.links) l.jitter_stddev = *o.jitter;
    s.validate();
    return s;
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

ProbeRunResult run_probe(const Scenario& s, std::string& trace_csv) {
    if (!s.probe) throw Error("scenario has no attack.probe section");
    const ProbeAttackSpec& spec = *s.probe;
    Network net(s);
    Prober prober(net, make_probe_target(net, spec.attacker, spec.victim, spec.observed_channel),
                  ProberConfig{spec.threshold, spec.riskfactor});
    ProbeRunResult r;
    r.initial = prober.find_init_max();
    r.true_initial = route_bottleneck(net, spec.attacker, spec.victim, prober.excluded_channels());
    for (const auto& p : s.payments) net.schedule_payment(p.at, p.from, p.to, p.amount);
    r.monitor = prober.monitor(r.initial.estimate, spec.monitor_interval, spec.monitor_duration);
    r.true_final = route_bottleneck(net, spec.attacker, spec.victim, prober.excluded_channels());
    r.probes_csv = prober.probes_csv();
    r.monitor_csv = Prober::monitor_csv(r.monitor);
    trace_csv = net.trace().to_csv([&](NodeId n) { return net.node_name(n); });
    if (!net.conserved()) throw Error("conservation violated during probe run");
    return r;
}

std::vector<TimingSample> timed_batch(Network& net, const TimingAttackSpec& spec, Msat amount) {
    std::set<HtlcId> seen;
    for (const auto& s : record(spec.observer, net.trace())) seen.insert(s.htlc);
    for (int i = 0; i < spec.payments; ++i) {
        const Invoice inv = net.create_invoice(spec.destination, amount, "timing-" + std::to_string(i));
        net.pay(spec.sender, inv);
        net.sim().run_until(net.sim().now() + spec.spacing);
    }
    std::vector<TimingSample> out;
    for (const auto& s : record(spec.observer, net.trace()))
        if (!seen.count(s.htlc)) out.push_back(s);
    return out;
}

TimingRunResult run_timing(const Scenario& s, std::string& trace_csv) {
    if (!s.timing) throw Error("scenario has no attack.timing section");
    const TimingAttackSpec& spec = *s.timing;
    Network net(s);
    TimingRunResult r;
    r.calibration.max_hops = spec.max_hops;
    for (const auto& c : spec.calibration) {
        if (c.mean_s) {
            r.calibration.classes.push_back(HopClass{c.name, *c.mean_s, c.stddev_s});
        } else {
            r.calibration.source = LatencyCalibration::Source::measured;
            r.calibration.classes.push_back(measure_hop_class(net, c.name, *c.measure_from, *c.measure_to,
                                                              c.measure_count, spec.amount, spec.spacing));
        }
    }
    r.samples = timed_batch(net, spec, spec.amount);
    if (r.samples.empty()) throw Error("timing observer recorded no samples");
    r.summary = summarize(r.samples);
    if (spec.large_amount) r.independence = independence_check(r.samples, timed_batch(net, spec, *spec.large_amount));

    std::ostringstream est;
    est << "htlc,delta_s,best_hops,composition,interval_min,interval_max,residual_s\n";
    if (!r.calibration.classes.empty()) {
        r.mean_estimate = estimate_remaining_hops(r.summary.mean, r.calibration);
        for (const auto& smp : r.samples) {
            const HopEstimate e = estimate_remaining_hops(smp.delta_seconds(), r.calibration);
            est << smp.htlc.value << ',' << fixed(smp.delta_seconds(), 6) << ',' << e.best_hops << ','
                << format_composition(e.best, r.calibration) << ',' << e.interval_min << ',' << e.interval_max << ','
                << fixed(e.residual, 6) << '\n';
        }
    }
    r.samples_csv = samples_csv(r.samples);
    r.estimates_csv = est.str();
    trace_csv = net.trace().to_csv([&](NodeId n) { return net.node_name(n); });
    return r;
}

}  // namespace

SeedRun run_seed(const Scenario& base, AttackKind attack, const ExperimentOverrides& overrides, std::uint64_t seed) {
    SeedRun run;
    run.seed = seed;
    try {
        const Scenario s = apply_overrides(base, overrides, seed);
        std::ostringstream traces;
        if (attack != AttackKind::timing) {
            std::string t;
            run.probe = run_probe(s, t);
            traces << t;
        }
        if (attack != AttackKind::probe) {
            std::string t;
            run.timing = run_timing(s, t);
            if (!traces.str().empty()) t = t.substr(t.find('\n') + 1);
            traces << t;
        }
        run.trace_csv = traces.str();
    } catch (const std::exception& e) {
        run.ok = false;
        run.error = e.what();
    }
    return run;
}

std::vector<SeedRun> run_seeds_serial(const Scenario& base, AttackKind attack, const ExperimentOverrides& overrides,
                                      const std::vector<std::uint64_t>& seeds) {
    std::vector<SeedRun> out;
    out.reserve(seeds.size());
    for (auto seed : seeds) out.push_back(run_seed(base, attack, overrides, seed));
    return out;
}

std::vector<SeedRun> run_seeds_parallel(const Scenario& base, AttackKind attack,
                                        const ExperimentOverrides& overrides,
                                        const std::vector<std::uint64_t>& seeds) {
    std::vector<SeedRun> out(seeds.size());
    const auto n = static_cast<long>(seeds.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) out[i] = run_seed(base, attack, overrides, seeds[i]);
    return out;
}

bool ExperimentReport::any_error() const {
    return std::any_of(runs.begin(), runs.end(), [](const SeedRun& r) { return !r.ok; });
}

std::string summary_text(const ExperimentReport& report) {
    std::ostringstream os;
    os << "scenario " << report.scenario_name << ", attack " << to_string(report.attack) << ", " << report.runs.size()
       << " seed(s)\n";
    std::vector<double> init_err, final_err, probes, latency_means;
    for (const auto& r : report.runs) {
        os << "\nseed " << r.seed << (r.ok ? "" : " FAILED: " + r.error) << '\n';
        if (r.probe) {
            const auto& p = *r.probe;
            os << "  probe: initial estimate " << p.initial.estimate << " msat (true " << p.true_initial << ", error "
               << p.true_initial - p.initial.estimate << " msat) after " << p.initial.probes_used << " probes in "
               << fixed(static_cast<double>(p.initial.duration) / kSecond, 3) << " s\n";
            os << "  probe: " << p.monitor.checks << " monitor checks, " << p.monitor.reports.size()
               << " report(s), final estimate " << p.monitor.final_estimate << " msat (true " << p.true_final
               << ", error " << p.true_final - p.monitor.final_estimate << " msat)"
               << (p.monitor.halted ? ", halted: " + p.monitor.halt_reason : "") << '\n';
            for (const auto& m : p.monitor.reports)
                os << "    t=" << fixed(static_cast<double>(m.time) / kSecond, 3) << " s: " << m.old_estimate << " -> "
                   << m.new_estimate << " (delta " << m.delta << " msat)\n";
            for (const auto& w : p.monitor.warnings) os << "    warning: " << w << '\n';
            init_err.push_back(static_cast<double>(p.true_initial - p.initial.estimate));
            final_err.push_back(static_cast<double>(p.true_final - p.monitor.final_estimate));
            probes.push_back(p.initial.probes_used);
        }
        if (r.timing) {
            const auto& t = *r.timing;
            os << "  timing: settlement latency " << format_summary(t.summary) << '\n';
            if (!t.calibration.classes.empty())
                os << "  timing: best fit " << format_composition(t.mean_estimate.best, t.calibration) << " ("
                   << t.mean_estimate.best_hops << " hops, plausible " << t.mean_estimate.interval_min << '-'
                   << t.mean_estimate.interval_max << ", residual " << fixed(t.mean_estimate.residual, 4) << " s)\n";
            if (t.independence)
                os << "  timing: amount independence small " << format_summary(t.independence->small) << " / large "
                   << format_summary(t.independence->large) << (t.independence->flagged ? " FLAGGED" : " consistent")
                   << '\n';
            latency_means.push_back(t.summary.mean);
        }
    }
    os << "\naggregate\n";
    if (!init_err.empty()) {
        os << "  probe initial error msat: " << format_summary(summarize(init_err)) << '\n';
        os << "  probe final error msat: " << format_summary(summarize(final_err)) << '\n';
        os << "  probes used: " << format_summary(summarize(probes)) << '\n';
    }
    if (!latency_means.empty()) os << "  timing mean latency s: " << format_summary(summarize(latency_means)) << '\n';
    return os.str();
}

std::string summary_jsonl(const ExperimentReport& report) {
    std::ostringstream os;
    auto line = [&](std::uint64_t seed, const std::string& metric, const nlohmann::json& value) {
        nlohmann::json j;
        j["seed"] = seed;
        j["metric"] = metric;
        j["value"] = value;
        os << j.dump() << '\n';
    };
    for (const auto& r : report.runs) {
        line(r.seed, "ok", r.ok);
        if (!r.ok) line(r.seed, "error", r.error);
        if (r.probe) {
            const auto& p = *r.probe;
            line(r.seed, "probe.initial_estimate_msat", p.initial.estimate);
            line(r.seed, "probe.initial_true_msat", p.true_initial);
            line(r.seed, "probe.initial_error_msat", p.true_initial - p.initial.estimate);
            line(r.seed, "probe.probes_used", p.initial.probes_used);
            line(r.seed, "probe.duration_us", p.initial.duration);
            line(r.seed, "probe.monitor_reports", p.monitor.reports.size());
            line(r.seed, "probe.final_estimate_msat", p.monitor.final_estimate);
            line(r.seed, "probe.final_true_msat", p.true_final);
            line(r.seed, "probe.monitor_halted", p.monitor.halted);
        }
        if (r.timing) {
            const auto& t = *r.timing;
            line(r.seed, "timing.mean_s", t.summary.mean);
            line(r.seed, "timing.stddev_s", t.summary.stddev);
            line(r.seed, "timing.n", t.summary.n);
            if (!t.calibration.classes.empty()) {
                line(r.seed, "timing.best_hops", t.mean_estimate.best_hops);
                line(r.seed, "timing.best_composition", t.mean_estimate.best);
            }
            if (t.independence) line(r.seed, "timing.independence_flagged", t.independence->flagged);
        }
    }
    return os.str();
}

std::map<std::string, std::string> report_files(const ExperimentReport& report) {
    std::map<std::string, std::string> files;
    for (const auto& r : report.runs) {
        const std::string dir = "seed-" + std::to_string(r.seed) + "/";
        if (!r.ok) files[dir + "error.txt"] = r.error + "\n";
        if (r.probe) {
            files[dir + "probes.csv"] = r.probe->probes_csv;
            files[dir + "monitor.csv"] = r.probe->monitor_csv;
        }
        if (r.timing) {
            files[dir + "samples.csv"] = r.timing->samples_csv;
            files[dir + "estimates.csv"] = r.timing->estimates_csv;
        }
        if (!r.trace_csv.empty()) files[dir + "trace.csv"] = r.trace_csv;
    }
    files["summary.txt"] = summary_text(report);
    files["summary.jsonl"] = summary_jsonl(report);
    files["index.json"] = index_json(report);
    return files;
}

std::string index_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["scenario"] = report.scenario_name;
    j["attack"] = to_string(report.attack);
    j["any_error"] = report.any_error();
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : report.runs) {
        nlohmann::json e;
        e["seed"] = r.seed;
        e["ok"] = r.ok;
        if (!r.ok) e["error"] = r.error;
        const std::string dir = "seed-" + std::to_string(r.seed) + "/";
        std::vector<std::string> files;
        if (!r.ok) files.push_back(dir + "error.txt");
        if (r.probe) {
            files.push_back(dir + "probes.csv");
            files.push_back(dir + "monitor.csv");
        }
        if (r.timing) {
            files.push_back(dir + "samples.csv");
            files.push_back(dir + "estimates.csv");
        }
        if (!r.trace_csv.empty()) files.push_back(dir + "trace.csv");
        e["files"] = files;
        runs.push_back(e);
    }
    j["runs"] = runs;
    return j.dump(2) + "\n";
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
    const Scenario base = load_scenario(spec.scenario_path);
    ExperimentReport report;
    report.scenario_name = base.name;
    report.attack = spec.attack;
    const std::vector<std::uint64_t> seeds = spec.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : spec.seeds;
    report.runs = spec.parallel ? run_seeds_parallel(base, spec.attack, spec.overrides, seeds)
                                : run_seeds_serial(base, spec.attack, spec.overrides, seeds);

    namespace fs = std::filesystem;
    for (const auto& [rel, content] : report_files(report)) {
        const fs::path path = spec.out_dir / rel;
        fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path.string());
        out << content;
    }
    return report;
}

}  // namespace pcnsim
