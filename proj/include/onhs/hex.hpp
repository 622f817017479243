#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace onhs {

using Bytes = std::vector<std::uint8_t>;

std::string to_hex_lower(const Bytes& data);
std::string to_hex_upper(const Bytes& data);

// Strict decode: even length, hex digits only. `require_lower` additionally
// rejects uppercase digits (the wire protocol carries lowercase hex only).
std::optional<Bytes> from_hex(std::string_view text, bool require_lower = false);

bool is_hex_digit(char c);
bool is_upper_hex(std::string_view text);

// Strict canonical decimal: digits only, no sign, no leading zero except "0".
std::optional<std::uint64_t> parse_decimal(std::string_view text);

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

}  // namespace onhs
