#include "pcnsim/core.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace pcnsim {

Msat compute_fee(Msat amount, const FeePolicy& policy) {
    if (amount < 0) throw Error("compute_fee: negative amount");
    const __int128 proportional = static_cast<__int128>(amount) * policy.fee_ppm / 1'000'000;
    return policy.fee_base + static_cast<Msat>(proportional);
}

const char* to_string(Direction d) { return d == Direction::AtoB ? "ab" : "ba"; }

const char* to_string(HtlcState s) {
    switch (s) {
        case HtlcState::offered: return "offered";
        case HtlcState::fulfilled: return "fulfilled";
        case HtlcState::failed: return "failed";
        case HtlcState::expired: return "expired";
    }
    return "?";
}

DirectedChannel::DirectedChannel(ChannelId id, NodeId a, NodeId b, Msat capacity, Msat balance_ab,
                                 Msat balance_ba, FeePolicy policy_ab, FeePolicy policy_ba,
                                 bool is_private)
    : id_(id), a_(a), b_(b), capacity_(capacity), policy_{policy_ab, policy_ba}, private_(is_private) {
    if (a == b) throw Error("channel endpoints must be distinct");
    if (balance_ab < 0 || balance_ba < 0) throw Error("channel balances must be non-negative");
    if (balance_ab + balance_ba != capacity)
        throw Error("channel balances must sum to capacity (conservation)");
    if (!policy_ab.valid() || !policy_ba.valid()) throw Error("fee policy fields must be non-negative");
    balance_[0] = balance_ab;
    balance_[1] = balance_ba;
}

void DirectedChannel::set_policy(Direction d, const FeePolicy& p) {
    if (!p.valid()) throw Error("fee policy fields must be non-negative");
    policy_[index_of(d)] = p;
}

Direction DirectedChannel::direction_from(NodeId from) const {
    if (from == a_) return Direction::AtoB;
    if (from == b_) return Direction::BtoA;
    throw Error("node " + std::to_string(from.value) + " is not an endpoint of channel " +
                std::to_string(id_.value));
}

NodeId DirectedChannel::peer_of(NodeId n) const {
    return direction_from(n) == Direction::AtoB ? b_ : a_;
}

Msat DirectedChannel::locked_total() const {
    return std::accumulate(locks_.begin(), locks_.end(), Msat{0},
                           [](Msat acc, const HtlcLock& l) { return acc + l.amount; });
}

Msat DirectedChannel::locked(Direction d) const {
    Msat total = 0;
    for (const auto& l : locks_)
        if (l.direction == d) total += l.amount;
    return total;
}

void DirectedChannel::lock(HtlcId htlc, Direction d, Msat amount) {
    if (amount <= 0) throw Error("HTLC amount must be positive");
    if (find_lock(htlc) != locks_.end()) throw Error("HTLC already locked on channel");
    if (!can_lock(d, amount)) throw InsufficientFunds("insufficient balance to lock HTLC");
    balance_[index_of(d)] -= amount;
    locks_.push_back({htlc, d, amount});
}

std::vector<HtlcLock>::iterator DirectedChannel::find_lock(HtlcId htlc) {
    return std::find_if(locks_.begin(), locks_.end(), [&](const HtlcLock& l) { return l.htlc == htlc; });
}

Msat DirectedChannel::settle(HtlcId htlc) {
    auto it = find_lock(htlc);
    if (it == locks_.end()) throw Error("settle: no such HTLC lock");
    const HtlcLock l = *it;
    locks_.erase(it);
    balance_[index_of(opposite(l.direction))] += l.amount;
    return l.amount;
}

Msat DirectedChannel::release(HtlcId htlc) {
    auto it = find_lock(htlc);
    if (it == locks_.end()) throw Error("release: no such HTLC lock");
    const HtlcLock l = *it;
    locks_.erase(it);
    balance_[index_of(l.direction)] += l.amount;
    return l.amount;
}

void DirectedChannel::transfer(Direction d, Msat amount) {
    if (amount < 0) throw Error("transfer: negative amount");
    if (balance(d) < amount) throw InsufficientFunds("transfer would drive balance negative");
    balance_[index_of(d)] -= amount;
    balance_[index_of(opposite(d))] += amount;
}

bool DirectedChannel::conserved() const {
    if (balance_[0] < 0 || balance_[1] < 0) return false;
    for (const auto& l : locks_)
        if (l.amount <= 0) return false;
    return balance_[0] + balance_[1] + locked_total() == capacity_;
}

DirectedChannel apply_settlement(DirectedChannel channel, Direction d, Msat amount) {
    channel.transfer(d, amount);
    return channel;
}

void Htlc::transition(HtlcState next) {
    if (state != HtlcState::offered || next == HtlcState::offered)
        throw Error(std::string("illegal HTLC transition ") + to_string(state) + " -> " + to_string(next));
    state = next;
}

}  // namespace pcnsim
