#include "onhs/resolver.hpp"

#include <algorithm>
#include <set>

namespace onhs {
namespace {

// Proof lines are registry log lines; a parsed view of one hop.
struct ProofView {
    UpdateRequest req;
    std::string canonical;
};

bool parse_proof(const std::string& line, ProofView& out) {
    auto req = parse_proof_line(line, out.canonical);
    if (!req) return false;
    out.req = std::move(req).take();
    return true;
}

bool hop_signature_ok(const ProofView& proof) {
    if (proof.req.handle.auth_type != AuthType::PublicKey) return false;
    if (!digest_matches(proof.req.handle, proof.req.auth.public_key)) return false;
    Signature sig{proof.req.handle.alg_code, proof.req.auth.signature};
    auto ok = verify(to_bytes(proof.canonical), sig, proof.req.auth.public_key);
    return ok.ok() && ok.value();
}

}  // namespace

Result<ResolutionResult> resolve(const Registry& registry, const Handle& handle,
                                 std::string_view label_path, Timestamp now,
                                 ResolveOptions opts) {
    using R = Result<ResolutionResult>;

    ResolutionResult result;
    result.label_path = label_path.empty() ? "-" : std::string(label_path);
    if (result.label_path != "-" && !parse_label_path(result.label_path)) {
        return R::failure(Err::BadLabel, result.label_path);
    }

    std::set<std::string> visited;
    Handle current = handle;
    std::int64_t ttl = INT64_MAX;
    int edges = 0;

    for (;;) {
        const std::string key = format_handle(current);
        if (!visited.insert(key).second) {
            return R::failure(Err::Cycle, "revisited " + key);
        }
        result.chain.push_back(current);

        auto rec = registry.lookup(current);
        if (!rec) {
            // report the partial chain up to the missing hop
            std::string path;
            for (const auto& h : result.chain) {
                if (!path.empty()) path += ">";
                path += format_handle(h);
            }
            return R::failure(Err::NotFound,
                              result.chain.size() == 1 ? key : key + " via " + path);
        }

        if (rec->state == RecordState::Cancelled) {
            return R::failure(Err::Cancelled, key);
        }
        if (rec->state == RecordState::Compromised) {
            if (!opts.unsafe) {
                return R::failure(Err::Compromised, key);
            }
            result.compromised = true;  // marker always accompanies unsafe data
        }

        std::optional<Handle> next;
        std::string hop_proof;
        if (rec->state == RecordState::Transferred) {
            next = rec->transfer_target;
            hop_proof = rec->transfer_proof;
        } else if (rec->delegation && rec->delegation->live(now)) {
            next = rec->delegation->target;
            hop_proof = rec->delegation->proof_line;
            ttl = std::min(ttl, rec->delegation->expiry - now);
        }

        if (next) {
            if (++edges > opts.max_depth) {
                return R::failure(Err::ChainTooLong,
                                  "more than " + std::to_string(opts.max_depth) + " hops");
            }
            result.hop_proofs.push_back(std::move(hop_proof));
            current = *next;
            continue;
        }

        // Terminal record: pick its binding.
        auto it = rec->bindings.find(result.label_path);
        if (it == rec->bindings.end() && result.label_path != "-") {
            it = rec->bindings.find("-");  // owner default
        }
        if (it == rec->bindings.end()) {
            return R::failure(Err::NoBinding, key);
        }
        const Binding& b = it->second;
        if (!b.live(now)) {
            return R::failure(Err::Expired, key + " binding expired");
        }

        result.address = b.address;
        result.binding_proof = b.proof_line;
        result.ttl_seconds = std::min(ttl, b.ttl_seconds);
        result.verified = verify_result(result, now, opts.strict);
        return result;
    }
}

bool verify_result(const ResolutionResult& r, Timestamp now, bool strict) {
    if (r.chain.empty() || r.binding_proof.empty()) return false;
    if (r.hop_proofs.size() + 1 != r.chain.size()) return false;

    const Handle& terminal = r.chain.back();
    if (terminal.auth_type != AuthType::PublicKey) return false;

    ProofView proof;
    if (!parse_proof(r.binding_proof, proof)) return false;
    if (proof.req.op != OpCode::Assign) return false;
    if (proof.req.handle != terminal) return false;
    // The proven binding must be the one asked for, or the owner default.
    if (proof.req.label_path != r.label_path && proof.req.label_path != "-") return false;
    if (!(proof.req.address == r.address)) return false;
    if (!hop_signature_ok(proof)) return false;

    if (strict) {
        for (std::size_t i = 0; i < r.hop_proofs.size(); ++i) {
            ProofView hop;
            if (!parse_proof(r.hop_proofs[i], hop)) return false;
            if (hop.req.handle != r.chain[i]) return false;
            if (hop.req.op == OpCode::Delegate) {
                if (now >= hop.req.expiry) return false;
            } else if (hop.req.op != OpCode::Transfer) {
                return false;
            }
            if (!hop.req.target || !(*hop.req.target == r.chain[i + 1])) return false;
            if (!hop_signature_ok(hop)) return false;
        }
    }
    return true;
}

Result<ResolutionResult> ResolverCache::cached_resolve(const Registry& registry,
                                                       const Handle& handle,
                                                       std::string_view label_path,
                                                       Timestamp now, ResolveOptions opts) {
    const auto key = std::make_pair(format_handle(handle),
                                    label_path.empty() ? std::string("-")
                                                       : std::string(label_path));
    {
        std::lock_guard lock(mu_);
        auto it = entries_.find(key);
        if (it != entries_.end() &&
            now < it->second.inserted_at + it->second.result.ttl_seconds) {
            ++stats_.hits;
            return it->second.result;
        }
    }

    auto fresh = resolve(registry, handle, label_path, now, opts);
    {
        std::lock_guard lock(mu_);
        ++stats_.authoritative;
        if (fresh) {
            entries_[key] = Entry{fresh.value(), now};  // last writer wins
        }
    }
    return fresh;
}

ResolverCache::Stats ResolverCache::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

void ResolverCache::clear() {
    std::lock_guard lock(mu_);
    entries_.clear();
    stats_ = {};
}

}  // namespace onhs
