// Structural onion packet: one payload per hop, peeled one layer at a time.
// The packet always reports the same nominal size, and a holder can read only
// the outermost layer, so the number of remaining hops is not observable.

#pragma once

#include <array>
#include <cstddef>
#include <optional>

#include "pcnsim/core.hpp"

namespace pcnsim {

struct Route;

struct HopPayload {
    ChannelId next_channel;       // unset meaning for the final layer
    Msat forward_amount = 0;      // amount to forward (final: amount to receive)
    BlockHeight outgoing_expiry = 0;
    bool final = false;

    bool operator==(const HopPayload&) const = default;
};

class OnionPacket {
public:
    static constexpr std::size_t kMaxHops = 20;
    static constexpr std::size_t kPacketBytes = 1366;

    /// Packet for the first hop's receiver. Throws for routes longer than kMaxHops.
    static OnionPacket build(const Route& route);

    struct Peeled;
    /// This holder's payload plus the packet to hand to the next hop.
    Peeled peel() const;

    std::size_t size_bytes() const { return kPacketBytes; }

private:
    std::array<std::optional<HopPayload>, kMaxHops> layers_{};
};

struct OnionPacket::Peeled {
    HopPayload payload;
    OnionPacket next;
};

}  // namespace pcnsim
