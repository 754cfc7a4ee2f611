// Domain types and balance arithmetic shared by every module.
//
// All money is integer millisatoshi. A DirectedChannel owns the two secret
// per-direction balances of one channel plus the HTLC amounts currently locked
// in it; balance_ab + balance_ba + locked == capacity at all times.

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcnsim {

using Msat = std::int64_t;
using BlockHeight = std::int64_t;

/// Virtual time in microseconds.
using VirtualTime = std::int64_t;

inline constexpr VirtualTime kMicrosecond = 1;
inline constexpr VirtualTime kMillisecond = 1000;
inline constexpr VirtualTime kSecond = 1000 * kMillisecond;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InsufficientFunds : public Error {
public:
    using Error::Error;
};

struct NodeId {
    std::uint32_t value = 0;
    auto operator<=>(const NodeId&) const = default;
};

struct ChannelId {
    std::uint32_t value = 0;
    auto operator<=>(const ChannelId&) const = default;
};

struct HtlcId {
    std::uint64_t value = 0;
    auto operator<=>(const HtlcId&) const = default;
};

/// Abstract payment hash. The preimage model is symbolic: revealing the
/// "preimage" of a hash means presenting the same token.
struct PaymentHash {
    std::uint64_t value = 0;
    auto operator<=>(const PaymentHash&) const = default;
};

struct FeePolicy {
    Msat fee_base = 0;
    std::int64_t fee_ppm = 0;
    std::int32_t cltv_delta = 12;

    bool operator==(const FeePolicy&) const = default;
    bool valid() const { return fee_base >= 0 && fee_ppm >= 0 && cltv_delta >= 0; }
};

/// fee_base + floor(amount * fee_ppm / 1e6).
Msat compute_fee(Msat amount, const FeePolicy& policy);

enum class Direction : std::uint8_t { AtoB = 0, BtoA = 1 };

constexpr Direction opposite(Direction d) {
    return d == Direction::AtoB ? Direction::BtoA : Direction::AtoB;
}
constexpr std::size_t index_of(Direction d) { return static_cast<std::size_t>(d); }
const char* to_string(Direction d);

struct HtlcLock {
    HtlcId htlc;
    Direction direction = Direction::AtoB;
    Msat amount = 0;
};

class DirectedChannel {
public:
    DirectedChannel(ChannelId id, NodeId a, NodeId b, Msat capacity, Msat balance_ab,
                    Msat balance_ba, FeePolicy policy_ab = {}, FeePolicy policy_ba = {},
                    bool is_private = false);

    ChannelId id() const { return id_; }
    NodeId node_a() const { return a_; }
    NodeId node_b() const { return b_; }
    Msat capacity() const { return capacity_; }
    bool is_private() const { return private_; }

    Msat balance(Direction d) const { return balance_[index_of(d)]; }
    Msat balance_ab() const { return balance(Direction::AtoB); }
    Msat balance_ba() const { return balance(Direction::BtoA); }

    const FeePolicy& policy(Direction d) const { return policy_[index_of(d)]; }
    void set_policy(Direction d, const FeePolicy& p);

    bool has_endpoint(NodeId n) const { return n == a_ || n == b_; }
    /// Direction of travel for funds leaving `from`. Throws if `from` is not an endpoint.
    Direction direction_from(NodeId from) const;
    NodeId peer_of(NodeId n) const;
    NodeId sender_of(Direction d) const { return d == Direction::AtoB ? a_ : b_; }
    NodeId receiver_of(Direction d) const { return d == Direction::AtoB ? b_ : a_; }

    const std::vector<HtlcLock>& locks() const { return locks_; }
    Msat locked_total() const;
    Msat locked(Direction d) const;

    bool can_lock(Direction d, Msat amount) const { return amount >= 0 && balance(d) >= amount; }
    /// Moves `amount` from the offering side's balance into a lock. Throws InsufficientFunds.
    void lock(HtlcId htlc, Direction d, Msat amount);
    /// Fulfilled HTLC: the locked amount lands on the receiving side.
    Msat settle(HtlcId htlc);
    /// Failed or expired HTLC: the locked amount returns to the offering side.
    Msat release(HtlcId htlc);

    /// Direct balance shift (an already fulfilled HTLC of `amount` in direction `d`).
    void transfer(Direction d, Msat amount);

    bool conserved() const;

private:
    std::vector<HtlcLock>::iterator find_lock(HtlcId htlc);

    ChannelId id_;
    NodeId a_;
    NodeId b_;
    Msat capacity_ = 0;
    Msat balance_[2] = {0, 0};
    FeePolicy policy_[2];
    std::vector<HtlcLock> locks_;
    bool private_ = false;
};

/// Value-semantics settlement: returns the channel after moving `amount` in direction `d`.
DirectedChannel apply_settlement(DirectedChannel channel, Direction d, Msat amount);

enum class HtlcState { offered, fulfilled, failed, expired };
const char* to_string(HtlcState s);

struct Htlc {
    HtlcId id;
    ChannelId channel;
    Direction direction = Direction::AtoB;
    Msat amount = 0;
    PaymentHash payment_hash;
    BlockHeight expiry = 0;
    HtlcState state = HtlcState::offered;
    NodeId upstream;    // offering node
    NodeId downstream;  // receiving node

    /// Enforces offered -> {fulfilled, failed, expired}.
    void transition(HtlcState next);
};

}  // namespace pcnsim

template <>
struct std::hash<pcnsim::NodeId> {
    std::size_t operator()(pcnsim::NodeId n) const noexcept { return std::hash<std::uint32_t>{}(n.value); }
};
template <>
struct std::hash<pcnsim::ChannelId> {
    std::size_t operator()(pcnsim::ChannelId c) const noexcept {
        return std::hash<std::uint32_t>{}(c.value);
    }
};
template <>
struct std::hash<pcnsim::HtlcId> {
    std::size_t operator()(pcnsim::HtlcId h) const noexcept { return std::hash<std::uint64_t>{}(h.value); }
};
