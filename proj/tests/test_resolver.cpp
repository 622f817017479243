#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "helpers.hpp"
#include "onhs/resolver.hpp"

using namespace onhs;
using namespace onhs::test;

namespace {

// One active handle bound at the root.
struct Single {
    Registry reg;
    Owner o = make_owner("single");

    Single() {
        REQUIRE(reg.apply(create_req(o), 10).ok());
        REQUIRE(reg.apply(assign_req(o, 1, "-", "192.0.2.7", 3600, 100'000), 11).ok());
    }
};

}  // namespace

TEST_CASE("a bound handle resolves to its address with a verified proof") {
    Single s;
    auto r = resolve(s.reg, s.o.handle, "-", 50);
    REQUIRE(r.ok());
    CHECK(r.value().address.text() == "192.0.2.7");
    CHECK(r.value().chain.size() == 1);
    CHECK(r.value().ttl_seconds == 3600);
    CHECK(r.value().verified);
    CHECK(verify_result(r.value(), 50));
    CHECK(verify_result(r.value(), 50, true));
}

TEST_CASE("resolution errors: missing, unbound, expired") {
    Single s;
    Owner ghost = make_owner("ghost");
    CHECK(resolve(s.reg, ghost.handle, "-", 50).code() == Err::NotFound);

    Owner bare = make_owner("bare");
    REQUIRE(s.reg.apply(create_req(bare), 12).ok());
    CHECK(resolve(s.reg, bare.handle, "-", 50).code() == Err::NoBinding);

    // binding expiry passed
    CHECK(resolve(s.reg, s.o.handle, "-", 100'000).code() == Err::Expired);
    CHECK(resolve(s.reg, s.o.handle, "-", 99'999).ok());
}

TEST_CASE("labeled bindings are preferred with fallback to the root") {
    Single s;
    REQUIRE(s.reg.apply(assign_req(s.o, 2, "chocolate", "192.0.2.9", 60, 100'000), 12)
                .ok());

    auto labeled = resolve(s.reg, s.o.handle, "chocolate", 50);
    REQUIRE(labeled.ok());
    CHECK(labeled.value().address.text() == "192.0.2.9");
    CHECK(labeled.value().verified);

    auto fallback = resolve(s.reg, s.o.handle, "halvah", 50);
    REQUIRE(fallback.ok());
    CHECK(fallback.value().address.text() == "192.0.2.7");
    CHECK(fallback.value().verified);
}

TEST_CASE("delegation chains resolve transitively") {
    Registry reg;
    Owner a = make_owner("ch-a");
    Owner b = make_owner("ch-b");
    Owner c = make_owner("ch-c");
    for (const Owner* o : {&a, &b, &c}) REQUIRE(reg.apply(create_req(*o), 1).ok());
    REQUIRE(reg.apply(delegate_req(a, 1, b.handle, 10'000), 2).ok());
    REQUIRE(reg.apply(delegate_req(b, 1, c.handle, 20'000), 3).ok());
    REQUIRE(reg.apply(assign_req(c, 1, "-", "203.0.113.5", 600, 30'000), 4).ok());

    auto r = resolve(reg, a.handle, "-", 100);
    REQUIRE(r.ok());
    CHECK(r.value().address.text() == "203.0.113.5");
    REQUIRE(r.value().chain.size() == 3);
    CHECK(r.value().chain[0] == a.handle);
    CHECK(r.value().chain[1] == b.handle);
    CHECK(r.value().chain[2] == c.handle);
    CHECK(r.value().hop_proofs.size() == 2);
    CHECK(r.value().verified);
    CHECK(verify_result(r.value(), 100, true));

    // effective ttl is the minimum across the chain: the terminal binding's
    // own ttl here, the shrinking delegation window when queried late
    CHECK(r.value().ttl_seconds == 600);
    auto late = resolve(reg, a.handle, "-", 9'500);
    REQUIRE(late.ok());
    CHECK(late.value().ttl_seconds == 500);

    // delegation expiry falls back to the handle's own binding
    REQUIRE(reg.apply(assign_req(a, 2, "-", "198.51.100.1", 60, 99'999), 5).ok());
    auto after = resolve(reg, a.handle, "-", 15'000);
    REQUIRE(after.ok());
    CHECK(after.value().address.text() == "198.51.100.1");
    CHECK(after.value().chain.size() == 1);
}

TEST_CASE("transfer redirects permanently and reports the chain") {
    Registry reg;
    Owner old_o = make_owner("tr-old");
    Owner new_o = make_owner("tr-new");
    REQUIRE(reg.apply(create_req(old_o), 1).ok());
    REQUIRE(reg.apply(create_req(new_o), 2).ok());
    REQUIRE(reg.apply(transfer_req(old_o, 1, new_o.handle), 3).ok());
    REQUIRE(reg.apply(assign_req(new_o, 1, "-", "192.0.2.77", 60, 1'000'000), 4).ok());

    auto r = resolve(reg, old_o.handle, "-", 500'000);
    REQUIRE(r.ok());
    CHECK(r.value().address.text() == "192.0.2.77");
    CHECK(r.value().chain.size() == 2);
    CHECK(r.value().verified);

    // dangling transfer target reports NOT_FOUND at the target hop
    Owner lone = make_owner("tr-lone");
    Owner nowhere = make_owner("tr-nowhere");
    REQUIRE(reg.apply(create_req(lone), 5).ok());
    REQUIRE(reg.apply(transfer_req(lone, 1, nowhere.handle), 6).ok());
    auto dangling = resolve(reg, lone.handle, "-", 10);
    CHECK(dangling.code() == Err::NotFound);
    // the missing hop and the partial chain are both reported
    CHECK(dangling.error().detail.starts_with(format_handle(nowhere.handle)));
    CHECK(dangling.error().detail.find(format_handle(lone.handle) + ">" +
                                       format_handle(nowhere.handle)) !=
          std::string::npos);
}

TEST_CASE("cycles and overlong chains terminate") {
    Registry reg;
    std::vector<Owner> owners;
    for (int i = 0; i < 20; ++i) owners.push_back(make_owner("ring-" + std::to_string(i)));
    for (auto& o : owners) REQUIRE(reg.apply(create_req(o), 1).ok());

    // rings of length 2..8
    for (int len = 2; len <= 8; ++len) {
        Registry ring;
        for (int i = 0; i < len; ++i) REQUIRE(ring.apply(create_req(owners[i]), 1).ok());
        for (int i = 0; i < len; ++i) {
            REQUIRE(ring.apply(
                            delegate_req(owners[i], 1, owners[(i + 1) % len].handle, 99'999),
                            2)
                        .ok());
        }
        CHECK(resolve(ring, owners[0].handle, "-", 10).code() == Err::Cycle);
    }

    // a 17-hop delegation chain exceeds the default depth
    for (int i = 0; i < 17; ++i) {
        REQUIRE(reg.apply(delegate_req(owners[i], 1, owners[i + 1].handle, 99'999), 2)
                    .ok());
    }
    REQUIRE(reg.apply(assign_req(owners[17], 1, "-", "192.0.2.50", 60, 99'999), 3).ok());
    CHECK(resolve(reg, owners[0].handle, "-", 10).code() == Err::ChainTooLong);

    // 16 hops is within the default depth
    auto from_second = resolve(reg, owners[1].handle, "-", 10);
    REQUIRE(from_second.ok());
    CHECK(from_second.value().chain.size() == 17);

    // raising the depth makes the full chain resolvable
    ResolveOptions deep;
    deep.max_depth = 17;
    CHECK(resolve(reg, owners[0].handle, "-", 10, deep).ok());
}

TEST_CASE("resolution terminates on adversarial delegation graphs") {
    std::mt19937_64 gen(666);
    for (int trial = 0; trial < 20; ++trial) {
        Registry reg;
        std::vector<Owner> owners;
        for (int i = 0; i < 10; ++i) {
            owners.push_back(make_owner("adv-" + std::to_string(trial) + "-" +
                                        std::to_string(i)));
            REQUIRE(reg.apply(create_req(owners.back()), 1).ok());
        }
        // random redirect structure: delegations, transfers, dangling targets
        for (auto& o : owners) {
            switch (gen() % 4) {
                case 0: {
                    auto& t = owners[gen() % owners.size()];
                    if (!(t.handle == o.handle)) {
                        REQUIRE(reg.apply(delegate_req(o, 1, t.handle, 99'999), 2).ok());
                    }
                    break;
                }
                case 1: {
                    Owner ghost = make_owner("adv-ghost-" + std::to_string(gen() % 5));
                    REQUIRE(reg.apply(delegate_req(o, 1, ghost.handle, 99'999), 2).ok());
                    break;
                }
                case 2: {
                    auto& t = owners[gen() % owners.size()];
                    if (!(t.handle == o.handle)) {
                        REQUIRE(reg.apply(transfer_req(o, 1, t.handle), 2).ok());
                    }
                    break;
                }
                default:
                    REQUIRE(reg.apply(assign_req(o, 1, "-", "10.7.0.1", 60, 99'999), 2)
                                .ok());
                    break;
            }
        }
        // every query returns, success or a structured error, within bounds
        for (const auto& o : owners) {
            auto r = resolve(reg, o.handle, "-", 10);
            if (r.ok()) {
                CHECK(r.value().chain.size() <= 17);
            } else {
                CHECK((r.code() == Err::Cycle || r.code() == Err::ChainTooLong ||
                       r.code() == Err::NotFound || r.code() == Err::NoBinding ||
                       r.code() == Err::Expired));
            }
        }
    }
}

TEST_CASE("compromise fails closed, taints chains, and is overridable") {
    Registry reg;
    Owner a = make_owner("cmp-a");
    Owner b = make_owner("cmp-b");
    REQUIRE(reg.apply(create_req(a), 1).ok());
    REQUIRE(reg.apply(create_req(b), 2).ok());
    REQUIRE(reg.apply(assign_req(b, 1, "-", "192.0.2.66", 60, 99'999), 3).ok());
    REQUIRE(reg.apply(delegate_req(a, 1, b.handle, 99'999), 4).ok());
    REQUIRE(reg.apply(simple_req(OpCode::Compromise, b, 2), 5).ok());

    CHECK(resolve(reg, b.handle, "-", 10).code() == Err::Compromised);
    // taint propagates through the delegation
    CHECK(resolve(reg, a.handle, "-", 10).code() == Err::Compromised);

    ResolveOptions unsafe;
    unsafe.unsafe = true;
    auto forensic = resolve(reg, b.handle, "-", 10, unsafe);
    REQUIRE(forensic.ok());
    CHECK(forensic.value().address.text() == "192.0.2.66");
    CHECK(forensic.value().compromised);  // marker always carried

    auto tainted = resolve(reg, a.handle, "-", 10, unsafe);
    REQUIRE(tainted.ok());
    CHECK(tainted.value().compromised);
}

TEST_CASE("cancelled handles resolve to CANCELLED") {
    Single s;
    REQUIRE(s.reg.apply(simple_req(OpCode::Cancel, s.o, 2), 20).ok());
    CHECK(resolve(s.reg, s.o.handle, "-", 30).code() == Err::Cancelled);
    ResolveOptions unsafe;
    unsafe.unsafe = true;
    CHECK(resolve(s.reg, s.o.handle, "-", 30, unsafe).code() == Err::Cancelled);
}

TEST_CASE("verification detects tampering with any proof component") {
    Single s;
    auto r = resolve(s.reg, s.o.handle, "-", 50).take();
    REQUIRE(verify_result(r, 50));

    // address swapped by a defrauding intermediary
    ResolutionResult swapped = r;
    swapped.address = Address::parse("203.0.113.1").take();
    CHECK_FALSE(verify_result(swapped, 50));

    // proof key replaced by an attacker key
    Owner attacker = make_owner("mallory");
    ResolutionResult key_swap = r;
    std::string canonical;
    auto req = parse_proof_line(key_swap.binding_proof, canonical).take();
    req.auth.public_key = attacker.kp.public_key;
    req.auth.signature = sign(to_bytes(canonical), attacker.kp).take().bytes;
    key_swap.binding_proof = proof_line(req);
    CHECK_FALSE(verify_result(key_swap, 50));

    // truncated or empty proofs
    ResolutionResult empty = r;
    empty.binding_proof.clear();
    CHECK_FALSE(verify_result(empty, 50));

    // wrong terminal handle claimed
    ResolutionResult wrong_chain = r;
    wrong_chain.chain = {attacker.handle};
    CHECK_FALSE(verify_result(wrong_chain, 50));

    // single byte flips anywhere in the proof line
    std::mt19937_64 gen(11);
    for (int i = 0; i < 300; ++i) {
        ResolutionResult mut = r;
        std::size_t pos = gen() % mut.binding_proof.size();
        char old = mut.binding_proof[pos];
        char repl;
        do {
            repl = static_cast<char>(gen() % 127 + 1);
        } while (repl == old);
        mut.binding_proof[pos] = repl;
        CHECK_FALSE(verify_result(mut, 50));
    }
}

TEST_CASE("strict verification checks every hop") {
    Registry reg;
    Owner a = make_owner("st-a");
    Owner b = make_owner("st-b");
    REQUIRE(reg.apply(create_req(a), 1).ok());
    REQUIRE(reg.apply(create_req(b), 2).ok());
    REQUIRE(reg.apply(delegate_req(a, 1, b.handle, 10'000), 3).ok());
    REQUIRE(reg.apply(assign_req(b, 1, "-", "192.0.2.31", 60, 99'999), 4).ok());

    auto r = resolve(reg, a.handle, "-", 100).take();
    CHECK(verify_result(r, 100, true));

    // hop proof tampered: default mode does not notice, strict does
    ResolutionResult tampered = r;
    std::string canonical;
    auto hop = parse_proof_line(tampered.hop_proofs[0], canonical).take();
    hop.expiry = 99'999;  // extend delegation without a new signature
    tampered.hop_proofs[0] = proof_line(hop);
    CHECK(verify_result(tampered, 100, false));
    CHECK_FALSE(verify_result(tampered, 100, true));

    // expired delegation hop fails strict verification
    CHECK_FALSE(verify_result(r, 10'001, true));

    // hop count mismatch fails in both modes
    ResolutionResult missing = r;
    missing.hop_proofs.clear();
    CHECK_FALSE(verify_result(missing, 100, false));
}

TEST_CASE("password handles resolve but cannot be end-to-end verified") {
    RegistryConfig cfg;
    cfg.pbkdf2_iterations = 4;
    Registry reg(cfg);
    SystemRng rng;
    auto h = reg.create_sponsored("pw", 1, rng).take();
    UpdateRequest req;
    req.op = OpCode::Assign;
    req.handle = h;
    req.seq = 1;
    req.label_path = "-";
    req.address = Address::parse("192.0.2.99").take();
    req.ttl_seconds = 60;
    req.expiry = 99'999;
    req.auth.password = "pw";
    REQUIRE(reg.apply(req, 2).ok());

    auto r = resolve(reg, h, "-", 10);
    REQUIRE(r.ok());
    CHECK(r.value().address.text() == "192.0.2.99");
    CHECK_FALSE(r.value().verified);
}

TEST_CASE("resolution is independent of who asks") {
    std::mt19937_64 gen(31337);
    Registry reg;
    std::vector<Owner> owners;
    for (int i = 0; i < 8; ++i) {
        owners.push_back(make_owner("ctx-" + std::to_string(i)));
        REQUIRE(reg.apply(create_req(owners.back()), 1).ok());
    }
    std::uint64_t seq = 1;
    for (int i = 0; i < 30; ++i) {
        auto& o = owners[gen() % owners.size()];
        auto rec = reg.lookup(o.handle);
        if (rec->terminal()) continue;
        std::uint64_t next = rec->seq + 1;
        switch (gen() % 3) {
            case 0:
                REQUIRE(reg.apply(assign_req(o, next, "-",
                                             "10.1." + std::to_string(gen() % 200) + "." +
                                                 std::to_string(gen() % 200),
                                             60, 99'999),
                                  seq++)
                            .ok());
                break;
            case 1: {
                auto& target = owners[gen() % owners.size()];
                if (target.handle == o.handle) break;
                REQUIRE(reg.apply(delegate_req(o, next, target.handle, 50'000), seq++)
                            .ok());
                break;
            }
            case 2:
                // occasional terminal transition
                if (gen() % 4 == 0) {
                    REQUIRE(reg.apply(simple_req(OpCode::Cancel, o, next), seq++).ok());
                }
                break;
        }
    }

    // two independent resolver instances agree on every outcome
    for (const auto& o : owners) {
        ResolverCache cache_a, cache_b;
        auto ra = cache_a.cached_resolve(reg, o.handle, "-", 1000);
        auto rb = cache_b.cached_resolve(reg, o.handle, "-", 1000);
        CHECK(ra.ok() == rb.ok());
        if (ra.ok()) {
            CHECK(ra.value().address == rb.value().address);
            CHECK(ra.value().chain.size() == rb.value().chain.size());
        } else {
            CHECK(ra.code() == rb.code());
        }
    }
}

TEST_CASE("cache serves within ttl and refreshes after") {
    Single s;
    ResolverCache cache;

    auto r1 = cache.cached_resolve(s.reg, s.o.handle, "-", 1000);
    REQUIRE(r1.ok());
    auto r2 = cache.cached_resolve(s.reg, s.o.handle, "-", 1500);
    REQUIRE(r2.ok());
    CHECK(cache.stats().authoritative == 1);
    CHECK(cache.stats().hits == 1);

    // rebind at the authority; the stale answer is allowed within ttl
    REQUIRE(s.reg.apply(assign_req(s.o, 2, "-", "192.0.2.8", 3600, 100'000), 12).ok());
    auto stale = cache.cached_resolve(s.reg, s.o.handle, "-", 1000 + 3599);
    REQUIRE(stale.ok());
    CHECK(stale.value().address.text() == "192.0.2.7");

    // after ttl the fresh binding is visible
    auto fresh = cache.cached_resolve(s.reg, s.o.handle, "-", 1000 + 3600);
    REQUIRE(fresh.ok());
    CHECK(fresh.value().address.text() == "192.0.2.8");
    CHECK(cache.stats().authoritative == 2);
}

TEST_CASE("ttl zero disables caching") {
    Registry reg;
    Owner o = make_owner("ttl0");
    REQUIRE(reg.apply(create_req(o), 1).ok());
    REQUIRE(reg.apply(assign_req(o, 1, "-", "192.0.2.40", 0, 99'999), 2).ok());

    ResolverCache cache;
    for (int i = 0; i < 5; ++i) {
        REQUIRE(cache.cached_resolve(reg, o.handle, "-", 100 + i).ok());
    }
    CHECK(cache.stats().authoritative == 5);
    CHECK(cache.stats().hits == 0);
}

TEST_CASE("errors are not cached") {
    Registry reg;
    Owner o = make_owner("err-cache");
    ResolverCache cache;
    CHECK_FALSE(cache.cached_resolve(reg, o.handle, "-", 1).ok());
    REQUIRE(reg.apply(create_req(o), 2).ok());
    REQUIRE(reg.apply(assign_req(o, 1, "-", "192.0.2.41", 60, 99'999), 3).ok());
    CHECK(cache.cached_resolve(reg, o.handle, "-", 4).ok());
}
