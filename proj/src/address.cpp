#include "onhs/address.hpp"

#include "onhs/hex.hpp"

namespace onhs {

std::optional<std::uint32_t> parse_dotted_quad(std::string_view text) {
    std::uint32_t value = 0;
    int parts = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t dot = text.find('.', start);
        std::string_view part = text.substr(
            start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        auto n = parse_decimal(part);
        if (!n || *n > 255 || ++parts > 4) return std::nullopt;
        value = (value << 8) | static_cast<std::uint32_t>(*n);
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    if (parts != 4) return std::nullopt;
    return value;
}

std::string format_dotted_quad(std::uint32_t value) {
    return std::to_string((value >> 24) & 0xff) + "." + std::to_string((value >> 16) & 0xff) +
           "." + std::to_string((value >> 8) & 0xff) + "." + std::to_string(value & 0xff);
}

std::string Address::text() const {
    switch (kind) {
        case AddressKind::IPv4:
            return format_dotted_quad(ip);
        case AddressKind::UdpEndpoint:
            return "udp:" + format_dotted_quad(ip) + ":" + std::to_string(port);
        case AddressKind::Url:
            return "url:" + url;
    }
    return {};
}

Result<Address> Address::parse(std::string_view text) {
    auto fail = [&](std::string_view why) {
        return Result<Address>::failure(Err::BadAddress,
                                        std::string(why) + ": " + std::string(text));
    };
    if (text.starts_with("udp:")) {
        std::string_view rest = text.substr(4);
        std::size_t colon = rest.rfind(':');
        if (colon == std::string_view::npos) return fail("missing port");
        auto ip = parse_dotted_quad(rest.substr(0, colon));
        auto port = parse_decimal(rest.substr(colon + 1));
        if (!ip || !port || *port > 65535) return fail("bad udp endpoint");
        return Address{AddressKind::UdpEndpoint, *ip, static_cast<std::uint16_t>(*port), {}};
    }
    if (text.starts_with("url:")) {
        std::string_view rest = text.substr(4);
        if (rest.empty()) return fail("empty url");
        for (char c : rest) {
            if (c <= 0x20 || c == 0x7f || c == '|') return fail("url with unsafe character");
        }
        return Address{AddressKind::Url, 0, 0, std::string(rest)};
    }
    auto ip = parse_dotted_quad(text);
    if (!ip) return fail("bad address");
    return Address::ipv4(*ip);
}

}  // namespace onhs
