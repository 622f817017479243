#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "onhs/registry.hpp"
#include "onhs/resolver.hpp"

namespace onhs::wire {

// Line-oriented text protocol, UTF-8, "\n" terminated, one response line per
// request. Verbs: CREATE, ASSIGN, DELEGATE, CANCEL, TRANSFER, COMPROMISE,
// RESOLVE, EXPORT-ZONE. Fields are single-space separated; signatures and
// keys travel as lowercase hex.
//
//   CREATE <handle> <sig> <key>          self-assigned public-key handle
//   CREATE 0 <password>                  sponsor mints a password handle
//   ASSIGN <handle> <seq> <labelpath> <address> <ttl> <expiry> <auth..>
//   DELEGATE <handle> <seq> <target> <expiry> <auth..>
//   CANCEL <handle> <seq> <auth..>
//   TRANSFER <handle> <seq> <target> <auth..>
//   COMPROMISE <handle> <seq> <auth..>
//   RESOLVE <handle> <nlabels> <label>... [unsafe]
//   EXPORT-ZONE <origin>
//
// <auth..> is "<sig> <key>" for public-key handles, "<password>" for
// sponsor-password handles. Responses: "OK ..." or "ERR <CODE> <detail>".
inline constexpr std::size_t kMaxRequestBytes = 8192;

// Serves one request line (no terminator) and returns one response line.
// Never throws on arbitrary input.
std::string handle_request_line(Registry& registry, Rng& rng, std::string_view line,
                                Timestamp now);

std::string error_response(const Error& e);

// RESOLVE response:
//   OK <address> ttl=<t> chain=<k> verified=<0|1> [compromised=1] proof=<hex>[,<hex>...]
// The proof list carries one hop proof per chain edge, then the terminal
// assign proof, each hex-encoded. Every byte of the response is either
// structural or covered by client-side verification.
std::string format_resolve_response(const ResolutionResult& r);

// Client-side request builders. Signed builders produce the canonical
// message, sign it, and emit the request line.
Result<std::string> build_create(const Handle& handle, const KeyPair& kp);
std::string build_create_sponsored(std::string_view password);
Result<std::string> build_signed_request(UpdateRequest req, const KeyPair& kp);
Result<std::string> build_password_request(UpdateRequest req, std::string_view password);
std::string build_resolve(const Handle& handle, std::string_view label_path, bool unsafe);
std::string build_export_zone(std::string_view origin);

// Strictly parsed RESOLVE response.
struct ResolveReply {
    Address address;
    std::int64_t ttl = 0;
    std::size_t chain = 0;
    bool verified_flag = false;
    bool compromised = false;
    std::vector<std::string> proof_lines;  // hex-decoded
};

Result<ResolveReply> parse_resolve_reply(std::string_view line);

// Reconstructs the resolution from a reply and verifies it end to end: the
// chain is rebuilt from the hop proofs, the terminal proof must name the
// terminal handle and the response address, its key must hash to the
// handle's digest, and for single-hop chains the response ttl must equal the
// proven binding ttl. `verified` in the returned result is the client's own
// verdict; a reply the server itself marked unverified stays unverified.
Result<ResolutionResult> check_reply(const ResolveReply& reply, const Handle& queried,
                                     std::string_view label_path, Timestamp now,
                                     bool strict);

// Convenience: parse plus check; any parse failure is a failed verification.
bool reply_verifies(std::string_view line, const Handle& queried,
                    std::string_view label_path, Timestamp now, bool strict = false);

// EXPORT-ZONE response payload ("OK <hex>") back to zone text.
Result<std::string> parse_export_zone_reply(std::string_view line);

// Generic "OK <handle> seq=<n>" mutation replies.
Result<std::pair<Handle, std::uint64_t>> parse_mutation_reply(std::string_view line);

}  // namespace onhs::wire
