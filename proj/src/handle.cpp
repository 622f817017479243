#include "onhs/handle.hpp"

#include <algorithm>
#include <cctype>

#include "onhs/hex.hpp"

namespace onhs {
namespace {

bool is_hex_char(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

char upper_hex(char c) {
    if (c >= 'a' && c <= 'f') return static_cast<char>(c - 'a' + 'A');
    return c;
}

Result<std::string> read_digest(std::string_view raw, std::size_t min_len,
                                std::size_t max_len) {
    if (raw.size() < min_len || raw.size() > max_len) {
        return Result<std::string>::failure(
            Err::BadHandle, "digest length " + std::to_string(raw.size()) +
                                " outside " + std::to_string(min_len) + ".." +
                                std::to_string(max_len));
    }
    std::string digest;
    digest.reserve(raw.size());
    for (char c : raw) {
        if (!is_hex_char(c)) {
            return Result<std::string>::failure(Err::BadHandle,
                                                "non-hex digest character");
        }
        digest.push_back(upper_hex(c));
    }
    return digest;
}

}  // namespace

Result<Handle> parse_handle(std::string_view text) {
    if (text.size() < 2 || text[0] != 'h') {
        return Result<Handle>::failure(Err::BadHandle, "missing h prefix");
    }
    if (text.size() > kDnsLabelMax) {
        return Result<Handle>::failure(Err::BadHandle, "longer than a DNS label");
    }

    const char type_code = text[1];
    std::string_view rest = text.substr(2);

    if (type_code == '1') {
        if (rest.empty() || rest[0] != 'g') {
            return Result<Handle>::failure(Err::BadHandle, "expected algorithm marker g");
        }
        rest.remove_prefix(1);
        std::size_t k = rest.find('k');
        if (k == std::string_view::npos || k == 0) {
            return Result<Handle>::failure(Err::BadHandle, "expected key marker k");
        }
        std::uint64_t alg = 0;
        for (char c : rest.substr(0, k)) {
            if (c < '0' || c > '9') {
                return Result<Handle>::failure(Err::BadHandle, "non-decimal algorithm code");
            }
            alg = alg * 10 + static_cast<std::uint64_t>(c - '0');
            if (alg > UINT32_MAX) {
                return Result<Handle>::failure(Err::BadHandle, "algorithm code overflow");
            }
        }
        if (alg == 0) {
            return Result<Handle>::failure(Err::BadHandle, "algorithm code must be positive");
        }
        auto digest = read_digest(rest.substr(k + 1), kPublicKeyDigestMin,
                                  kPublicKeyDigestMax);
        if (!digest) return digest.error();
        return Handle{AuthType::PublicKey, static_cast<std::uint32_t>(alg),
                      std::move(digest).take()};
    }

    if (type_code == '0') {
        auto digest = read_digest(rest, kPasswordDigestMin, kPasswordDigestMax);
        if (!digest) return digest.error();
        return Handle{AuthType::SponsorPassword, 0, std::move(digest).take()};
    }

    return Result<Handle>::failure(Err::BadHandle, "unknown auth type code");
}

std::string format_handle(const Handle& h) {
    std::string out;
    if (h.auth_type == AuthType::PublicKey) {
        out = "h1g";
        out += std::to_string(h.alg_code);
        out += 'k';
    } else {
        out = "h0";
    }
    for (char c : h.digest_hex) out.push_back(upper_hex(c));
    return out;
}

Result<void> validate_handle(const Handle& h) {
    const std::size_t min_len = h.auth_type == AuthType::PublicKey
                                    ? kPublicKeyDigestMin
                                    : kPasswordDigestMin;
    const std::size_t max_len = h.auth_type == AuthType::PublicKey
                                    ? kPublicKeyDigestMax
                                    : kPasswordDigestMax;
    if (h.digest_hex.size() < min_len || h.digest_hex.size() > max_len) {
        return Result<void>::failure(Err::BadHandle, "digest length out of bounds");
    }
    if (!is_upper_hex(h.digest_hex)) {
        return Result<void>::failure(Err::BadHandle, "digest not uppercase hex");
    }
    if (h.auth_type == AuthType::PublicKey && h.alg_code == 0) {
        return Result<void>::failure(Err::BadHandle, "algorithm code must be positive");
    }
    if (format_handle(h).size() > kDnsLabelMax) {
        return Result<void>::failure(Err::BadHandle, "longer than a DNS label");
    }
    return {};
}

bool valid_dns_label(std::string_view label) {
    if (label.empty() || label.size() > kDnsLabelMax) return false;
    if (label.front() < 'a' || label.front() > 'z') return false;
    for (char c : label) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
        if (!ok) return false;
    }
    return label.back() != '-';
}

std::string HandleFqdn::text() const {
    std::string out;
    for (const auto& label : labels) {
        out += label;
        out += '.';
    }
    out += format_handle(handle);
    out += '.';
    out += root;
    return out;
}

namespace {

// Roots are ordinary domain suffixes ("handleroot.nicesponsor.org"). The
// label rules are looser than for owner subdomains: digits may lead.
bool valid_root(std::string_view root) {
    if (root.empty() || root.front() == '.' || root.back() == '.') return false;
    std::size_t start = 0;
    while (start <= root.size()) {
        std::size_t dot = root.find('.', start);
        std::string_view part = root.substr(
            start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        if (part.empty() || part.size() > kDnsLabelMax) return false;
        for (char c : part) {
            bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
            if (!ok) return false;
        }
        if (part.front() == '-' || part.back() == '-') return false;
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return true;
}

}  // namespace

Result<HandleFqdn> embed_fqdn(const Handle& h, std::vector<std::string> labels,
                              std::string root) {
    if (auto v = validate_handle(h); !v) return v.error();
    for (const auto& label : labels) {
        if (!valid_dns_label(label)) {
            return Result<HandleFqdn>::failure(Err::BadLabel, "bad label: " + label);
        }
    }
    if (!valid_root(root)) {
        return Result<HandleFqdn>::failure(Err::BadLabel, "bad root: " + root);
    }
    return HandleFqdn{std::move(labels), h, std::move(root)};
}

Result<HandleFqdn> extract_fqdn(std::string_view text, std::string_view root) {
    if (!text.empty() && text.back() == '.') text.remove_suffix(1);
    if (!root.empty() && root.back() == '.') root.remove_suffix(1);
    if (!valid_root(root)) {
        return Result<HandleFqdn>::failure(Err::BadLabel, "bad root");
    }
    if (text.size() <= root.size() + 1 || !text.ends_with(root) ||
        text[text.size() - root.size() - 1] != '.') {
        return Result<HandleFqdn>::failure(Err::WrongRoot,
                                           "name not under " + std::string(root));
    }

    std::string_view prefix = text.substr(0, text.size() - root.size() - 1);
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= prefix.size()) {
        std::size_t dot = prefix.find('.', start);
        std::string_view part = prefix.substr(
            start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        parts.emplace_back(part);
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }

    auto handle = parse_handle(parts.back());
    if (!handle) return handle.error();
    parts.pop_back();
    for (const auto& label : parts) {
        if (!valid_dns_label(label)) {
            return Result<HandleFqdn>::failure(Err::BadLabel, "bad label: " + label);
        }
    }
    return HandleFqdn{std::move(parts), std::move(handle).take(), std::string(root)};
}

std::string label_path_token(const std::vector<std::string>& labels) {
    if (labels.empty()) return "-";
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i > 0) out += '.';
        out += labels[i];
    }
    return out;
}

Result<std::vector<std::string>> parse_label_path(std::string_view token) {
    std::vector<std::string> labels;
    if (token == "-") return labels;
    std::size_t start = 0;
    while (start <= token.size()) {
        std::size_t dot = token.find('.', start);
        std::string_view part = token.substr(
            start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        if (!valid_dns_label(part)) {
            return Result<std::vector<std::string>>::failure(
                Err::BadLabel, "bad label in path: " + std::string(part));
        }
        labels.emplace_back(part);
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return labels;
}

}  // namespace onhs
