#include "pcnsim/onion.hpp"

#include "pcnsim/routing.hpp"

namespace pcnsim {

OnionPacket OnionPacket::build(const Route& route) {
    if (route.hops.empty()) throw Error("cannot build onion for an empty route");
    if (route.hops.size() > kMaxHops) throw Error("route exceeds maximum onion hop count");
    OnionPacket packet;
    const std::size_t n = route.hops.size();
    for (std::size_t i = 0; i < n; ++i) {
        HopPayload p;
        if (i + 1 < n) {
            const RouteHop& next = route.hops[i + 1];
            p.next_channel = next.channel;
            p.forward_amount = next.forward_amount;
            p.outgoing_expiry = next.expiry;
        } else {
            p.forward_amount = route.hops[i].forward_amount;
            p.outgoing_expiry = route.hops[i].expiry;
            p.final = true;
        }
        packet.layers_[i] = p;
    }
    return packet;
}

OnionPacket::Peeled OnionPacket::peel() const {
    if (!layers_[0]) throw Error("onion has no layer for this hop");
    Peeled out{*layers_[0], OnionPacket{}};
    // shift left; the vacated tail is zero padding
    for (std::size_t i = 1; i < kMaxHops; ++i) out.next.layers_[i - 1] = layers_[i];
    return out;
}

}  // namespace pcnsim
