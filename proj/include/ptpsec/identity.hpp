#pragma once

// Clock identities derived from network addresses, and the binding check
// between a message's claimed clock ID and the address it arrived from.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "ptpsec/wire.hpp"

namespace ptpsec {

struct NetworkAddress {
    enum class Kind : std::uint8_t { Mac6, Ipv4 };

    Kind kind = Kind::Ipv4;
    std::array<std::uint8_t, 6> octets{};  // Ipv4 uses the first four
    std::uint16_t port = 319;

    static NetworkAddress ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d,
                               std::uint16_t port = 319) {
        NetworkAddress n;
        n.kind = Kind::Ipv4;
        n.octets = {a, b, c, d, 0, 0};
        n.port = port;
        return n;
    }

    static NetworkAddress mac(const std::array<std::uint8_t, 6>& o, std::uint16_t port = 319) {
        NetworkAddress n;
        n.kind = Kind::Mac6;
        n.octets = o;
        n.port = port;
        return n;
    }

    // "10.0.0.7" or "00:11:22:33:44:55".
    static std::optional<NetworkAddress> parse(std::string_view text);

    [[nodiscard]] bool same_host(const NetworkAddress& o) const noexcept {
        return kind == o.kind && octets == o.octets;
    }

    friend bool operator==(const NetworkAddress&, const NetworkAddress&) = default;
    friend auto operator<=>(const NetworkAddress&, const NetworkAddress&) = default;
};

inline std::string to_string(const NetworkAddress& a);

// Mac6 a:b:c:d:e:f  -> a b c FF FE d e f
// Ipv4 w.x.y.z      -> 00 w x FF FE y z 00
inline ClockIdentity clock_id_from_network(const NetworkAddress& addr) {
    const auto& o = addr.octets;
    ClockIdentity id;
    if (addr.kind == NetworkAddress::Kind::Mac6) {
        id.octets = {o[0], o[1], o[2], 0xFF, 0xFE, o[3], o[4], o[5]};
    } else {
        id.octets = {0x00, o[0], o[1], 0xFF, 0xFE, o[2], o[3], 0x00};
    }
    return id;
}

// Inverse of clock_id_from_network, used by slaves to address the master.
inline std::optional<NetworkAddress> network_from_clock_id(const ClockIdentity& id,
                                                           NetworkAddress::Kind kind,
                                                           std::uint16_t port = 319) {
    const auto& c = id.octets;
    if (c[3] != 0xFF || c[4] != 0xFE) return std::nullopt;
    if (kind == NetworkAddress::Kind::Mac6) {
        return NetworkAddress::mac({c[0], c[1], c[2], c[5], c[6], c[7]}, port);
    }
    if (c[0] != 0 || c[7] != 0) return std::nullopt;
    return NetworkAddress::ipv4(c[1], c[2], c[5], c[6], port);
}

// The port does not take part in the binding.
inline bool verify_binding(const ClockIdentity& msgSourceClockId, const NetworkAddress& observedAddr) {
    return clock_id_from_network(observedAddr) == msgSourceClockId;
}

inline std::optional<NetworkAddress> NetworkAddress::parse(std::string_view text) {
    auto parse_parts = [&](char sep, int base, std::size_t count) -> std::optional<std::array<std::uint8_t, 6>> {
        std::array<std::uint8_t, 6> out{};
        std::size_t idx = 0;
        std::size_t pos = 0;
        while (true) {
            const auto next = text.find(sep, pos);
            const auto part = text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
            if (part.empty() || part.size() > 3 || idx >= count) return std::nullopt;
            unsigned value = 0;
            for (char ch : part) {
                int d;
                if (ch >= '0' && ch <= '9') d = ch - '0';
                else if (base == 16 && ch >= 'a' && ch <= 'f') d = ch - 'a' + 10;
                else if (base == 16 && ch >= 'A' && ch <= 'F') d = ch - 'A' + 10;
                else return std::nullopt;
                value = value * static_cast<unsigned>(base) + static_cast<unsigned>(d);
            }
            if (value > 255) return std::nullopt;
            out[idx++] = static_cast<std::uint8_t>(value);
            if (next == std::string_view::npos) break;
            pos = next + 1;
        }
        if (idx != count) return std::nullopt;
        return out;
    };
    if (text.find(':') != std::string_view::npos) {
        auto o = parse_parts(':', 16, 6);
        if (!o) return std::nullopt;
        return mac(*o);
    }
    auto o = parse_parts('.', 10, 4);
    if (!o) return std::nullopt;
    return ipv4((*o)[0], (*o)[1], (*o)[2], (*o)[3]);
}

inline std::string to_string(const NetworkAddress& a) {
    std::string s;
    if (a.kind == NetworkAddress::Kind::Ipv4) {
        for (int i = 0; i < 4; ++i) {
            if (i) s.push_back('.');
            s += std::to_string(a.octets[static_cast<std::size_t>(i)]);
        }
        return s;
    }
    static constexpr char digits[] = "0123456789abcdef";
    for (int i = 0; i < 6; ++i) {
        if (i) s.push_back(':');
        s.push_back(digits[a.octets[static_cast<std::size_t>(i)] >> 4]);
        s.push_back(digits[a.octets[static_cast<std::size_t>(i)] & 0x0F]);
    }
    return s;
}

}  // namespace ptpsec
