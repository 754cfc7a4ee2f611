// Deterministic discrete-event core: a virtual clock, a stable event queue and
// seeded link latency.

#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <vector>

#include "pcnsim/core.hpp"

namespace pcnsim {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a scenario seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct LinkSpec {
    NodeId a;
    NodeId b;
    VirtualTime one_way_latency = 1 * kMillisecond;
    VirtualTime jitter_stddev = 0;

    bool connects(NodeId x, NodeId y) const { return (a == x && b == y) || (a == y && b == x); }
};

/// max(1us, Normal(one_way_latency, jitter_stddev)), rounded to the microsecond.
VirtualTime sample_latency(const LinkSpec& link, Rng& rng);

enum class EventKind : std::uint8_t { message, timer, block_tick };
const char* to_string(EventKind k);

struct FiredEvent {
    VirtualTime fire_at = 0;
    std::uint64_t sequence = 0;
    EventKind kind = EventKind::timer;
};

class Simulator {
public:
    using Action = std::function<void()>;

    explicit Simulator(VirtualTime block_interval = 600 * kSecond);

    VirtualTime now() const { return now_; }
    VirtualTime block_interval() const { return block_interval_; }
    BlockHeight block_height() const { return now_ / block_interval_; }

    /// Throws if `fire_at` lies in the past.
    void schedule(VirtualTime fire_at, EventKind kind, Action action);
    void schedule_after(VirtualTime delay, EventKind kind, Action action) {
        schedule(now_ + delay, kind, std::move(action));
    }

    /// Fires the earliest pending event. Returns false when the queue is empty.
    bool step();
    /// Fires every event with fire_at <= t, then advances the clock to t.
    void run_until(VirtualTime t);
    /// Fires events until `done()` holds or the queue empties. Returns done().
    bool run_until(const std::function<bool()>& done);
    void run();

    std::size_t pending() const { return queue_.size(); }
    const std::vector<FiredEvent>& fired() const { return fired_; }
    void set_record_fired(bool on) { record_fired_ = on; }

    /// Called after every fired event (property checks hook in here).
    void set_after_event(Action hook) { after_event_ = std::move(hook); }

private:
    struct Pending {
        VirtualTime fire_at;
        std::uint64_t sequence;
        EventKind kind;
        Action action;
    };
    struct Later {
        bool operator()(const Pending& x, const Pending& y) const {
            if (x.fire_at != y.fire_at) return x.fire_at > y.fire_at;
            return x.sequence > y.sequence;
        }
    };

    VirtualTime now_ = 0;
    VirtualTime block_interval_;
    std::uint64_t next_sequence_ = 0;
    std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
    std::vector<FiredEvent> fired_;
    bool record_fired_ = true;
    Action after_event_;
};

}  // namespace pcnsim
