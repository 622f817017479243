#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "onhs/error.hpp"

namespace onhs {

// A handle is a permanent, meaning-free token for a network agent. Its text
// form is a single DNS label: it starts with the letter "h", then one
// character selecting the authentication scheme, then scheme parameters.
//
//   h1g<alg>k<digest>   public-key handle; <alg> is the IANA signature
//                       algorithm number in decimal, <digest> is 8..40 hex
//                       digits taken from the end of the hash of the owner's
//                       public key
//   h0<digest>          sponsor-assigned handle authenticated by password;
//                       <digest> is 15..40 random hex digits
//
// Canonical form: structural characters lowercase, digest uppercase. Parsing
// accepts either hex case but is case-sensitive for structure.
enum class AuthType : std::uint8_t {
    PublicKey,        // type code '1'
    SponsorPassword,  // type code '0'
};

struct Handle {
    AuthType auth_type = AuthType::SponsorPassword;
    std::uint32_t alg_code = 0;  // meaningful for PublicKey handles only
    std::string digest_hex;      // uppercase hex

    friend bool operator==(const Handle&, const Handle&) = default;
};

inline constexpr std::size_t kDnsLabelMax = 63;
inline constexpr std::size_t kPublicKeyDigestMin = 8;
inline constexpr std::size_t kPublicKeyDigestMax = 40;
inline constexpr std::size_t kPasswordDigestMin = 15;
inline constexpr std::size_t kPasswordDigestMax = 40;

// Total parse of the handle grammar. Never throws on arbitrary input; every
// string either yields exactly one Handle or Err::BadHandle.
Result<Handle> parse_handle(std::string_view text);

// Canonical text form. Case is canonicalized (digest forced uppercase);
// structural validity is the caller's contract, see validate_handle.
std::string format_handle(const Handle& h);

// Checks the type invariants: digest charset and length bounds, algorithm
// code presence, canonical form within the DNS label limit.
Result<void> validate_handle(const Handle& h);

// One subdomain label: [a-z]([a-z0-9-]*[a-z0-9])?, at most 63 characters.
bool valid_dns_label(std::string_view label);

// A handle embedded in the DNS: optional owner-chosen subdomain labels, then
// the handle label, then the handle domain, dot-separated.
struct HandleFqdn {
    std::vector<std::string> labels;  // leftmost first, possibly empty
    Handle handle;
    std::string root;

    std::string text() const;

    friend bool operator==(const HandleFqdn&, const HandleFqdn&) = default;
};

Result<HandleFqdn> embed_fqdn(const Handle& h, std::vector<std::string> labels,
                              std::string root);

// Inverse of embed_fqdn. `text` may carry one trailing dot (zone file owner
// syntax). Fails with Err::WrongRoot when `text` is not under `root`.
Result<HandleFqdn> extract_fqdn(std::string_view text, std::string_view root);

// Joins subdomain labels into the label-path token used by the registry and
// the wire protocol: "-" for the handle itself, "a.b" for subdomains.
std::string label_path_token(const std::vector<std::string>& labels);
Result<std::vector<std::string>> parse_label_path(std::string_view token);

}  // namespace onhs
