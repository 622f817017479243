#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "onhs/address.hpp"
#include "onhs/crypto.hpp"
#include "onhs/error.hpp"
#include "onhs/handle.hpp"

namespace onhs {

using Timestamp = std::int64_t;  // epoch seconds; always injected, never read

// An address bound below a handle. The label path token is "-" for the
// handle itself or dotted subdomain labels. A binding is live while
// now < expiry; ttl_seconds is the cache lifetime advertised to resolvers.
struct Binding {
    std::string label_path = "-";
    Address address;
    std::int64_t ttl_seconds = 0;
    Timestamp expiry = 0;
    std::string proof_line;  // the accepted update line that installed this binding

    bool live(Timestamp now) const { return now < expiry; }

    friend bool operator==(const Binding&, const Binding&) = default;
};

// Lifecycle states. Everything but Active is terminal: the record is kept
// forever (tombstone) and no further update is accepted.
enum class RecordState : std::uint8_t { Active, Cancelled, Transferred, Compromised };

std::string_view record_state_name(RecordState s);

struct Delegation {
    Handle target;
    Timestamp expiry = 0;
    std::string proof_line;

    bool live(Timestamp now) const { return now < expiry; }

    friend bool operator==(const Delegation&, const Delegation&) = default;
};

struct HandleRecord {
    Handle handle;
    RecordState state = RecordState::Active;
    std::optional<Handle> transfer_target;        // set when Transferred
    std::string transfer_proof;
    Bytes owner_pub;                              // public-key handles
    std::optional<PasswordVerifier> password;     // sponsor-password handles
    std::uint64_t seq = 0;
    std::map<std::string, Binding> bindings;      // keyed by label path token
    std::optional<Delegation> delegation;
    Timestamp created_at = 0;
    Timestamp updated_at = 0;

    bool terminal() const { return state != RecordState::Active; }

    friend bool operator==(const HandleRecord&, const HandleRecord&) = default;
};

enum class OpCode : std::uint8_t { Create, Assign, Delegate, Cancel, Transfer, Compromise };

std::string_view op_name(OpCode op);
bool op_from_name(std::string_view name, OpCode& out);

struct UpdateAuth {
    Bytes signature;                      // public-key handles
    Bytes public_key;
    std::optional<std::string> password;  // sponsor-password handles
};

// One lifecycle update. The signed bytes are exactly canonical_message(req)
// in UTF-8; see that function for the field order per operation.
struct UpdateRequest {
    OpCode op = OpCode::Create;
    Handle handle;
    std::uint64_t seq = 0;

    // Assign
    std::string label_path = "-";
    Address address;
    std::int64_t ttl_seconds = 0;

    // Assign and Delegate
    Timestamp expiry = 0;

    // Delegate and Transfer
    std::optional<Handle> target;

    // Create of a sponsor-password handle (filled by the registry)
    std::string verifier_encoded;

    UpdateAuth auth;
};

// Canonical serialization signed by the owner and stored in the log:
//   ONHSv1|<OP>|<handle>|<seq>|<field>|...
// Field order: CREATE key-hex (or verifier for password handles);
// ASSIGN label-path address ttl expiry; DELEGATE target expiry;
// TRANSFER target; CANCEL and COMPROMISE have no fields.
std::string canonical_message(const UpdateRequest& req);

// Proof line: the canonical message followed by the signature and public key
// in lowercase hex. This is what resolvers receive as verification material.
// Password-authenticated updates carry "-" in both columns (the password
// itself is never stored).
std::string proof_line(const UpdateRequest& req);

// Full log line: the proof line plus the acceptance timestamp, which makes
// log replay reproduce record timestamps exactly.
std::string log_line(const UpdateRequest& req, Timestamp now);

// Parsers for the two line forms. `canonical_out` receives the exact signed
// byte range for re-verification.
Result<UpdateRequest> parse_log_line(std::string_view line, Timestamp& ts_out,
                                     std::string& canonical_out);
Result<UpdateRequest> parse_proof_line(std::string_view line, std::string& canonical_out);

struct RegistryConfig {
    std::uint32_t pbkdf2_iterations = 60000;
    int sponsored_digest_len = 15;  // "h0" plus this many random hex digits
};

// The sponsor-side authoritative store. Updates are linearized through an
// exclusive lock; reads take a shared lock and copy the record out.
class Registry {
public:
    explicit Registry(RegistryConfig cfg = {});

    // Applies one of the six lifecycle operations. On success the accepted
    // line is appended to the log and handed to the log sink, if set.
    Result<HandleRecord> apply(const UpdateRequest& req, Timestamp now);

    // Sponsor-side creation of a password-authenticated handle: mints a
    // fresh random handle and stores a PBKDF2 verifier for `password`.
    Result<Handle> create_sponsored(std::string_view password, Timestamp now, Rng& rng);

    std::optional<HandleRecord> lookup(const Handle& h) const;
    std::vector<HandleRecord> all_records() const;  // sorted by handle text
    std::size_t size() const;

    // Append-only log.
    std::vector<std::string> log_lines() const;
    void set_log_sink(std::function<void(const std::string&)> sink);

    // Replays a log into this (empty) registry. Signature-authenticated
    // entries are re-verified; any entry the state machine would have
    // rejected fails with Err::CorruptLog.
    Result<void> load_log(std::istream& in);
    Result<void> load_log_lines(const std::vector<std::string>& lines);

    // Canonical snapshot: sorted records plus a trailing state hash line.
    std::string snapshot() const;
    Result<void> load_snapshot_text(std::string_view text);
    std::string state_hash() const;

    const RegistryConfig& config() const { return cfg_; }

private:
    Result<HandleRecord> apply_locked(const UpdateRequest& req, Timestamp now,
                                      bool trusted_replay, const std::string* raw_line);
    Result<void> check_auth(const HandleRecord& rec, const UpdateRequest& req) const;
    void append_log(const std::string& line);
    std::string snapshot_body_locked() const;

    mutable std::shared_mutex mu_;
    RegistryConfig cfg_;
    std::map<std::string, HandleRecord> records_;
    std::vector<std::string> log_;
    std::function<void(const std::string&)> sink_;
};

}  // namespace onhs
