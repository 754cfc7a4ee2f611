#include "pcnsim/simnet.hpp"

#include <algorithm>
#include <cmath>

namespace pcnsim {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the pair
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

VirtualTime sample_latency(const LinkSpec& link, Rng& rng) {
    if (link.jitter_stddev == 0) return std::max(kMicrosecond, link.one_way_latency);
    std::normal_distribution<double> dist(static_cast<double>(link.one_way_latency),
                                          static_cast<double>(link.jitter_stddev));
    const auto draw = static_cast<VirtualTime>(std::llround(dist(rng)));
    return std::max(kMicrosecond, draw);
}

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::message: return "message";
        case EventKind::timer: return "timer";
        case EventKind::block_tick: return "block_tick";
    }
    return "?";
}

Simulator::Simulator(VirtualTime block_interval) : block_interval_(block_interval) {
    if (block_interval <= 0) throw Error("block interval must be positive");
}

void Simulator::schedule(VirtualTime fire_at, EventKind kind, Action action) {
    if (fire_at < now_) throw Error("cannot schedule an event in the past");
    queue_.push(Pending{fire_at, next_sequence_++, kind, std::move(action)});
}

bool Simulator::step() {
    if (queue_.empty()) return false;
    Pending ev = queue_.top();
    queue_.pop();
    now_ = ev.fire_at;
    if (record_fired_) fired_.push_back({ev.fire_at, ev.sequence, ev.kind});
    ev.action();
    if (after_event_) after_event_();
    return true;
}

void Simulator::run_until(VirtualTime t) {
    while (!queue_.empty() && queue_.top().fire_at <= t) step();
    if (t > now_) now_ = t;
}

bool Simulator::run_until(const std::function<bool()>& done) {
    while (!done()) {
        if (!step()) break;
    }
    return done();
}

void Simulator::run() {
    while (step()) {
    }
}

}  // namespace pcnsim
