#include "pcnsim/timing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace pcnsim {

std::vector<TimingSample> record(NodeId node, const Trace& trace) {
    std::map<HtlcId, TimingSample> open;
    std::vector<TimingSample> out;
    for (const LocalLogEntry& e : trace.local_log(node)) {
        if (e.kind == MessageKind::update_add_htlc && e.outgoing) {
            open[e.htlc] = TimingSample{e.htlc, e.at, 0, e.amount};
        } else if (e.kind == MessageKind::update_fulfill_htlc && !e.outgoing) {
            auto it = open.find(e.htlc);
            if (it == open.end()) continue;
            it->second.t_fulfill_received = e.at;
            out.push_back(it->second);
            open.erase(it);
        } else if (e.kind == MessageKind::update_fail_htlc && !e.outgoing) {
            open.erase(e.htlc);
        }
    }
    return out;
}

LatencySummary summarize(std::span<const double> values) {
    if (values.empty()) throw Error("summarize: no samples");
    LatencySummary s;
    s.n = values.size();
    // shifted by the first value: identical inputs give exactly (x, 0)
    const double x0 = values.front();
    double shift = 0.0;
    for (double v : values) shift += v - x0;
    const double shift_mean = shift / static_cast<double>(s.n);
    s.mean = x0 + shift_mean;
    if (s.n > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - x0 - shift_mean) * (v - x0 - shift_mean);
        s.stddev = std::sqrt(sq / static_cast<double>(s.n - 1));
    }
    return s;
}

LatencySummary summarize(const std::vector<TimingSample>& samples) {
    std::vector<double> d;
    d.reserve(samples.size());
    for (const auto& s : samples) d.push_back(s.delta_seconds());
    return summarize(d);
}

std::string format_summary(const LatencySummary& s) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "μ = %.4f, σ = %.4f, n = %zu", s.mean, s.stddev, s.n);
    return buf;
}

HopEstimate estimate_remaining_hops(double delta_seconds, const LatencyCalibration& calibration) {
    const auto& classes = calibration.classes;
    if (classes.empty()) throw Error("calibration has no hop classes");
    for (const auto& c : classes)
        if (!(c.mean > 0.0)) throw Error("calibration class means must be positive");
    if (calibration.max_hops < 1) throw Error("max_hops must be at least 1");

    HopEstimate est;
    bool have_best = false;
    std::vector<int> counts(classes.size(), 0);

    auto visit = [&](const std::vector<int>& c, int total) {
        double mean = 0.0;
        double var = 0.0;
        for (std::size_t i = 0; i < classes.size(); ++i) {
            mean += c[i] * classes[i].mean;
            var += c[i] * classes[i].stddev * classes[i].stddev;
        }
        const double residual = std::abs(delta_seconds - mean);
        // Residuals closer than the clock resolution are ties (sums of class means
        // differ in the last bits); ties go to fewer hops, then to larger counts
        // of earlier classes.
        constexpr double kTie = 1e-9;
        const bool tie = have_best && std::abs(residual - est.residual) <= kTie;
        if (!have_best || (!tie && residual < est.residual) ||
            (tie && (total < est.best_hops || (total == est.best_hops && c > est.best)))) {
            est.best = c;
            est.best_hops = total;
            est.residual = residual;
            have_best = true;
        }
        if (residual <= 3.0 * std::sqrt(var)) est.plausible.push_back(c);
    };

    std::function<void(std::size_t, int)> enumerate = [&](std::size_t cls, int remaining) {
        if (cls + 1 == classes.size()) {
            for (int k = 0; k <= remaining; ++k) {
                counts[cls] = k;
                int total = 0;
                for (int v : counts) total += v;
                if (total >= 1) visit(counts, total);
            }
            counts[cls] = 0;
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            counts[cls] = k;
            enumerate(cls + 1, remaining - k);
        }
        counts[cls] = 0;
    };
    enumerate(0, calibration.max_hops);

    est.interval_min = est.best_hops;
    est.interval_max = est.best_hops;
    for (const auto& c : est.plausible) {
        int total = 0;
        for (int v : c) total += v;
        est.interval_min = std::min(est.interval_min, total);
        est.interval_max = std::max(est.interval_max, total);
    }
    return est;
}

std::string format_composition(const std::vector<int>& counts, const LatencyCalibration& calibration) {
    std::ostringstream os;
    bool first = true;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) continue;
        if (!first) os << " + ";
        os << counts[i] << ' ' << calibration.classes.at(i).name;
        first = false;
    }
    return first ? std::string("0") : os.str();
}

HopClass measure_hop_class(Network& net, const std::string& name, NodeId from, NodeId to, int count, Msat amount,
                           VirtualTime spacing) {
    if (count < 1) throw Error("measurement needs at least one payment");
    std::vector<double> deltas;
    std::set<HtlcId> seen;
    for (const auto& s : record(from, net.trace())) seen.insert(s.htlc);
    for (int i = 0; i < count; ++i) {
        const Invoice inv = net.create_invoice(to, amount, "calibration-" + name);
        const PaymentOutcome o = net.pay(from, inv);
        if (o.kind != OutcomeKind::success) throw Error("calibration payment for class '" + name + "' failed");
        for (const auto& s : record(from, net.trace()))
            if (seen.insert(s.htlc).second) deltas.push_back(s.delta_seconds());
        net.sim().run_until(net.sim().now() + spacing);
    }
    const LatencySummary s = summarize(deltas);
    return HopClass{name, s.mean, s.stddev};
}

IndependenceReport independence_check(const LatencySummary& small, const LatencySummary& large) {
    if (small.n == 0 || large.n == 0) throw Error("independence_check: empty sample set");
    IndependenceReport r;
    r.small = small;
    r.large = large;
    r.standard_error = std::sqrt(small.stddev * small.stddev / static_cast<double>(small.n) +
                                 large.stddev * large.stddev / static_cast<double>(large.n));
    r.flagged = std::abs(small.mean - large.mean) > 3.0 * r.standard_error;
    return r;
}

IndependenceReport independence_check(const std::vector<TimingSample>& small, const std::vector<TimingSample>& large) {
    if (small.empty() || large.empty()) throw Error("independence_check: empty sample set");
    Msat lo = small.front().amount;
    Msat hi = large.front().amount;
    for (const auto& s : small) lo = std::max(lo, s.amount);
    for (const auto& s : large) hi = std::min(hi, s.amount);
    if (static_cast<__int128>(hi) < static_cast<__int128>(lo) * 100'000)
        throw Error("independence_check: amounts must differ by at least 10^5x");
    return independence_check(summarize(small), summarize(large));
}

std::string samples_csv(const std::vector<TimingSample>& samples) {
    std::ostringstream os;
    os << "htlc,t_add_us,t_fulfill_us,delta_us\n";
    for (const auto& s : samples)
        os << s.htlc.value << ',' << s.t_add_forwarded << ',' << s.t_fulfill_received << ',' << s.delta() << '\n';
    return os.str();
}

}  // namespace pcnsim
