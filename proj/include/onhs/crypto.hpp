#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "onhs/error.hpp"
#include "onhs/handle.hpp"
#include "onhs/hex.hpp"

namespace onhs {

// Entropy source. Key generation and sponsored-handle minting draw from one
// of these; everything else in the module is a pure function.
class Rng {
public:
    virtual ~Rng() = default;
    virtual void fill(std::uint8_t* out, std::size_t n) = 0;

    Bytes bytes(std::size_t n);
    std::uint64_t next_u64();
};

// Process-wide CSPRNG (OpenSSL RAND). Safe for concurrent use.
class SystemRng final : public Rng {
public:
    void fill(std::uint8_t* out, std::size_t n) override;
};

// Deterministic stream for reproducible key generation in tests: SHA-256 in
// counter mode over the seed. Not for production keys.
class SeededRng final : public Rng {
public:
    explicit SeededRng(Bytes seed);
    explicit SeededRng(std::string_view seed);
    void fill(std::uint8_t* out, std::size_t n) override;

private:
    Bytes seed_;
    std::uint64_t counter_ = 0;
    Bytes block_;
    std::size_t pos_ = 0;
};

// Signature algorithm registry, keyed by the IANA DNSSEC algorithm numbers.
// Code 5 (RSA/SHA-1) is the mandatory baseline; code 8 (RSA/SHA-256) is the
// supported modern extension. Both use the same key encoding.
inline constexpr std::uint32_t kAlgRsaSha1 = 5;
inline constexpr std::uint32_t kAlgRsaSha256 = 8;

bool algorithm_known(std::uint32_t alg_code);

struct Signature {
    std::uint32_t alg_code = 0;
    Bytes bytes;

    friend bool operator==(const Signature&, const Signature&) = default;
};

// RSA key pair. public_key holds the canonical wire encoding, which is the
// DNSSEC RDATA layout for RSA keys: a 1-byte exponent length (or 0x00 plus a
// 2-byte big-endian length when the exponent exceeds 255 bytes), the
// exponent, then the modulus, all big-endian with no leading zero bytes.
struct KeyPair {
    std::uint32_t alg_code = 0;
    Bytes public_key;
    // Secret material, big-endian. Empty for public-only pairs.
    Bytes modulus;
    Bytes public_exponent;
    Bytes private_exponent;

    bool has_secret() const { return !private_exponent.empty(); }
};

// Generates a fresh pair. Deterministic when `rng` is a SeededRng.
// `modulus_bits` below 512 is rejected; tests use 512 for speed, production
// callers should keep the 2048-bit default.
Result<KeyPair> generate_keypair(std::uint32_t alg_code, Rng& rng,
                                 int modulus_bits = 2048);

// The self-assignment rule: the handle digest is the trailing `digest_len`
// hex digits of the hash of the canonical public key encoding. The hash is
// the one named by the algorithm code (SHA-1 for 5, SHA-256 for 8) over
// exactly the encoding bytes, no framing.
Result<Handle> derive_handle(const Bytes& public_key, std::uint32_t alg_code,
                             std::size_t digest_len);

// True iff the handle's digest equals the derivation from `public_key`.
// PublicKey handles only; misuse on a password handle throws.
bool digest_matches(const Handle& h, const Bytes& public_key);

// PKCS#1 v1.5 signature over `msg` with the algorithm's hash.
Result<Signature> sign(const Bytes& msg, const KeyPair& kp);

// True iff `sig` was produced over exactly `msg` by the private counterpart
// of `public_key`. Malformed keys and signatures yield false, not errors;
// only an unregistered algorithm code is an error.
Result<bool> verify(const Bytes& msg, const Signature& sig, const Bytes& public_key);

// Hash helpers (uppercase hex).
std::string sha1_hex_upper(const Bytes& data);
std::string sha256_hex_lower(const Bytes& data);

// Password verifier for sponsor-assigned handles: PBKDF2-HMAC-SHA256.
// Encoded form: pbkdf2sha256$<iterations>$<salt-hex>$<hash-hex>
struct PasswordVerifier {
    std::uint32_t iterations = 0;
    Bytes salt;
    Bytes hash;

    std::string encode() const;
    static Result<PasswordVerifier> decode(std::string_view text);

    friend bool operator==(const PasswordVerifier&, const PasswordVerifier&) = default;
};

PasswordVerifier make_password_verifier(std::string_view password,
                                        std::uint32_t iterations, Rng& rng);
bool check_password(const PasswordVerifier& v, std::string_view password);

// Key file formats (line-oriented, hex fields). The secret file is written
// with owner-only permissions.
Result<void> save_secret_key(const KeyPair& kp, const std::string& path);
Result<KeyPair> load_secret_key(const std::string& path);
Result<void> save_public_key(const KeyPair& kp, const std::string& path);
Result<std::pair<std::uint32_t, Bytes>> load_public_key(const std::string& path);

}  // namespace onhs
