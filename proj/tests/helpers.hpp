#pragma once

// Shared fixtures for the test suites: seeded key owners and signed update
// builders that go through the same canonical serialization as production
// clients.

#include <string>

#include "onhs/registry.hpp"

namespace onhs::test {

struct Owner {
    KeyPair kp;
    Handle handle;
};

inline Owner make_owner(std::string_view seed, std::size_t digest_len = 16) {
    SeededRng rng(seed);
    Owner o;
    o.kp = generate_keypair(kAlgRsaSha1, rng, 512).take();
    o.handle = derive_handle(o.kp.public_key, kAlgRsaSha1, digest_len).take();
    return o;
}

inline void sign_request(UpdateRequest& req, const KeyPair& kp) {
    req.auth.public_key = kp.public_key;
    req.auth.signature = sign(to_bytes(canonical_message(req)), kp).take().bytes;
}

inline UpdateRequest create_req(const Owner& o) {
    UpdateRequest req;
    req.op = OpCode::Create;
    req.handle = o.handle;
    req.seq = 0;
    req.auth.public_key = o.kp.public_key;
    sign_request(req, o.kp);
    return req;
}

inline UpdateRequest assign_req(const Owner& o, std::uint64_t seq,
                                const std::string& label_path, const std::string& addr,
                                std::int64_t ttl, Timestamp expiry) {
    UpdateRequest req;
    req.op = OpCode::Assign;
    req.handle = o.handle;
    req.seq = seq;
    req.label_path = label_path;
    req.address = Address::parse(addr).take();
    req.ttl_seconds = ttl;
    req.expiry = expiry;
    sign_request(req, o.kp);
    return req;
}

inline UpdateRequest delegate_req(const Owner& o, std::uint64_t seq, const Handle& target,
                                  Timestamp expiry) {
    UpdateRequest req;
    req.op = OpCode::Delegate;
    req.handle = o.handle;
    req.seq = seq;
    req.target = target;
    req.expiry = expiry;
    sign_request(req, o.kp);
    return req;
}

inline UpdateRequest transfer_req(const Owner& o, std::uint64_t seq, const Handle& target) {
    UpdateRequest req;
    req.op = OpCode::Transfer;
    req.handle = o.handle;
    req.seq = seq;
    req.target = target;
    sign_request(req, o.kp);
    return req;
}

inline UpdateRequest simple_req(OpCode op, const Owner& o, std::uint64_t seq) {
    UpdateRequest req;
    req.op = op;
    req.handle = o.handle;
    req.seq = seq;
    sign_request(req, o.kp);
    return req;
}

}  // namespace onhs::test
