#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "onhs/registry.hpp"

namespace onhs {

// Outcome of resolving a handle. The proof material lets a querier check the
// answer against the handle's embedded key digest, so the registry operator
// is a facilitator, not a trusted party.
struct ResolutionResult {
    Address address;
    std::vector<Handle> chain;            // first entry is the queried handle
    std::string label_path = "-";         // as queried
    std::string binding_proof;            // accepted assign line for the terminal hop
    std::vector<std::string> hop_proofs;  // delegate/transfer lines, one per chain edge
    bool verified = false;
    bool compromised = false;             // carried when resolved with `unsafe`
    std::int64_t ttl_seconds = 0;         // minimum across the chain
};

struct ResolveOptions {
    int max_depth = 16;   // maximum chain edges followed
    bool unsafe = false;  // return the last binding of a compromised handle
    bool strict = false;  // verify every hop proof, not just the terminal one
};

// Follows transfers and live delegations to the terminal Active record and
// returns its live binding for `label_path`, falling back to the handle's
// root binding when no labeled one exists. Fills the chain, attaches the
// stored proof lines, and runs verification.
Result<ResolutionResult> resolve(const Registry& registry, const Handle& handle,
                                 std::string_view label_path, Timestamp now,
                                 ResolveOptions opts = {});

// End-to-end check of a result, independent of the registry: the terminal
// proof's key must hash to the terminal handle's digest, its signature must
// cover the canonical assign line, and the proven address must equal the
// result address. With `strict`, every hop proof is checked the same way and
// delegation hops must be unexpired at `now`.
bool verify_result(const ResolutionResult& r, Timestamp now, bool strict = false);

// Client-side cache keyed by (handle, label path). Entries are served only
// while now < inserted_at + ttl; errors are never cached.
class ResolverCache {
public:
    struct Stats {
        std::uint64_t hits = 0;
        std::uint64_t authoritative = 0;
    };

    Result<ResolutionResult> cached_resolve(const Registry& registry, const Handle& handle,
                                            std::string_view label_path, Timestamp now,
                                            ResolveOptions opts = {});

    Stats stats() const;
    void clear();

private:
    struct Entry {
        ResolutionResult result;
        Timestamp inserted_at = 0;
    };

    mutable std::mutex mu_;
    std::map<std::pair<std::string, std::string>, Entry> entries_;
    Stats stats_;
};

}  // namespace onhs
