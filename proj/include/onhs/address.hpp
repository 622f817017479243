#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "onhs/error.hpp"

namespace onhs {

// Network addresses a handle can resolve to. IPv4 resolution is the
// foundational service; UDP endpoints and URLs are the higher-level address
// kinds the registry also accepts.
//
// Text forms: "192.0.2.7", "udp:192.0.2.7:53", "url:https://example.org/x".
enum class AddressKind : std::uint8_t { IPv4, UdpEndpoint, Url };

struct Address {
    AddressKind kind = AddressKind::IPv4;
    std::uint32_t ip = 0;     // IPv4 and UdpEndpoint
    std::uint16_t port = 0;   // UdpEndpoint
    std::string url;          // Url

    std::string text() const;
    static Result<Address> parse(std::string_view text);

    static Address ipv4(std::uint32_t value) {
        return Address{AddressKind::IPv4, value, 0, {}};
    }

    friend bool operator==(const Address&, const Address&) = default;
};

// Dotted-quad helpers shared with the reference model.
std::optional<std::uint32_t> parse_dotted_quad(std::string_view text);
std::string format_dotted_quad(std::uint32_t value);

}  // namespace onhs
