#include "onhs/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>
#include <sys/stat.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace onhs {

Bytes Rng::bytes(std::size_t n) {
    Bytes out(n);
    if (n > 0) fill(out.data(), n);
    return out;
}

std::uint64_t Rng::next_u64() {
    std::uint8_t buf[8];
    fill(buf, sizeof buf);
    std::uint64_t v = 0;
    for (std::uint8_t b : buf) v = (v << 8) | b;
    return v;
}

void SystemRng::fill(std::uint8_t* out, std::size_t n) {
    if (n == 0) return;
    if (RAND_bytes(out, static_cast<int>(n)) != 1) {
        throw std::runtime_error("system entropy source failed");
    }
}

SeededRng::SeededRng(Bytes seed) : seed_(std::move(seed)) {}
SeededRng::SeededRng(std::string_view seed) : seed_(to_bytes(seed)) {}

namespace {

Bytes evp_digest(const EVP_MD* md, const std::uint8_t* data, std::size_t len) {
    Bytes out(EVP_MAX_MD_SIZE);
    unsigned int out_len = 0;
    if (EVP_Digest(data, len, out.data(), &out_len, md, nullptr) != 1) {
        throw std::runtime_error("digest failed");
    }
    out.resize(out_len);
    return out;
}

Bytes sha256_of(const Bytes& data) {
    return evp_digest(EVP_sha256(), data.data(), data.size());
}

}  // namespace

void SeededRng::fill(std::uint8_t* out, std::size_t n) {
    while (n > 0) {
        if (pos_ >= block_.size()) {
            Bytes input = seed_;
            for (int shift = 56; shift >= 0; shift -= 8) {
                input.push_back(static_cast<std::uint8_t>(counter_ >> shift));
            }
            ++counter_;
            block_ = sha256_of(input);
            pos_ = 0;
        }
        std::size_t take = std::min(n, block_.size() - pos_);
        std::memcpy(out, block_.data() + pos_, take);
        pos_ += take;
        out += take;
        n -= take;
    }
}

namespace {

struct BnDeleter {
    void operator()(BIGNUM* p) const { BN_clear_free(p); }
};
struct CtxDeleter {
    void operator()(BN_CTX* p) const { BN_CTX_free(p); }
};
using Bn = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtx = std::unique_ptr<BN_CTX, CtxDeleter>;

Bn bn_new() { return Bn(BN_new()); }

Bn bn_from_bytes(const Bytes& b) {
    return Bn(BN_bin2bn(b.data(), static_cast<int>(b.size()), nullptr));
}

Bytes bn_to_bytes(const BIGNUM* v) {
    Bytes out(static_cast<std::size_t>(BN_num_bytes(v)));
    BN_bn2bin(v, out.data());
    return out;
}

Bytes bn_to_bytes_padded(const BIGNUM* v, std::size_t len) {
    Bytes out(len);
    if (BN_bn2binpad(v, out.data(), static_cast<int>(len)) < 0) {
        throw std::runtime_error("value wider than pad length");
    }
    return out;
}

struct AlgorithmInfo {
    std::uint32_t code;
    const EVP_MD* (*md)();
    // DER DigestInfo prefix for PKCS#1 v1.5 (RFC 8017 section 9.2 notes).
    const std::uint8_t* digest_info;
    std::size_t digest_info_len;
    std::size_t digest_len;
};

constexpr std::uint8_t kSha1Info[] = {0x30, 0x21, 0x30, 0x09, 0x06, 0x05, 0x2b, 0x0e,
                                      0x03, 0x02, 0x1a, 0x05, 0x00, 0x04, 0x14};
constexpr std::uint8_t kSha256Info[] = {0x30, 0x31, 0x30, 0x0d, 0x06, 0x09, 0x60, 0x86,
                                        0x48, 0x01, 0x65, 0x03, 0x04, 0x02, 0x01, 0x05,
                                        0x00, 0x04, 0x20};

const AlgorithmInfo kAlgorithms[] = {
    {kAlgRsaSha1, EVP_sha1, kSha1Info, sizeof kSha1Info, 20},
    {kAlgRsaSha256, EVP_sha256, kSha256Info, sizeof kSha256Info, 32},
};

const AlgorithmInfo* find_algorithm(std::uint32_t code) {
    for (const auto& alg : kAlgorithms) {
        if (alg.code == code) return &alg;
    }
    return nullptr;
}

// Canonical public key encoding: exponent length prefix, exponent, modulus.
Bytes encode_rsa_public(const Bytes& exponent, const Bytes& modulus) {
    Bytes out;
    if (exponent.size() <= 255) {
        out.push_back(static_cast<std::uint8_t>(exponent.size()));
    } else {
        out.push_back(0);
        out.push_back(static_cast<std::uint8_t>(exponent.size() >> 8));
        out.push_back(static_cast<std::uint8_t>(exponent.size() & 0xff));
    }
    out.insert(out.end(), exponent.begin(), exponent.end());
    out.insert(out.end(), modulus.begin(), modulus.end());
    return out;
}

bool decode_rsa_public(const Bytes& encoded, Bytes& exponent, Bytes& modulus) {
    if (encoded.size() < 3) return false;
    std::size_t exp_len = encoded[0];
    std::size_t offset = 1;
    if (exp_len == 0) {
        exp_len = (static_cast<std::size_t>(encoded[1]) << 8) | encoded[2];
        offset = 3;
        if (exp_len <= 255) return false;  // non-minimal length form
    }
    if (exp_len == 0 || encoded.size() < offset + exp_len + 1) return false;
    exponent.assign(encoded.begin() + offset, encoded.begin() + offset + exp_len);
    modulus.assign(encoded.begin() + offset + exp_len, encoded.end());
    if (exponent[0] == 0 || modulus[0] == 0) return false;  // non-minimal integers
    return true;
}

// EMSA-PKCS1-v1_5 encoding of the message hash, sized to the modulus.
Result<Bytes> build_em(const AlgorithmInfo& alg, const Bytes& msg, std::size_t k) {
    Bytes hash = evp_digest(alg.md(), msg.data(), msg.size());
    std::size_t t_len = alg.digest_info_len + hash.size();
    if (k < t_len + 11) {
        return Result<Bytes>::failure(Err::BadKey, "modulus too small for digest");
    }
    Bytes em(k);
    em[0] = 0x00;
    em[1] = 0x01;
    std::size_t ps_len = k - t_len - 3;
    std::memset(em.data() + 2, 0xff, ps_len);
    em[2 + ps_len] = 0x00;
    std::memcpy(em.data() + 3 + ps_len, alg.digest_info, alg.digest_info_len);
    std::memcpy(em.data() + 3 + ps_len + alg.digest_info_len, hash.data(), hash.size());
    return em;
}

// Draws a prime of exactly `bits` with the top two bits set, rejecting
// candidates that would make the public exponent non-invertible.
Bn generate_prime(int bits, Rng& rng, const BIGNUM* e, BN_CTX* ctx) {
    const std::size_t nbytes = static_cast<std::size_t>(bits) / 8;
    Bn gcd = bn_new();
    Bn pm1 = bn_new();
    for (;;) {
        Bytes buf = rng.bytes(nbytes);
        buf[0] |= 0xc0;              // top two bits set
        buf[nbytes - 1] |= 0x01;     // odd
        Bn candidate = bn_from_bytes(buf);
        if (!candidate) throw std::runtime_error("bignum allocation failed");
        int is_prime = BN_check_prime(candidate.get(), ctx, nullptr);
        if (is_prime < 0) throw std::runtime_error("primality test failed");
        if (is_prime != 1) continue;
        if (!BN_copy(pm1.get(), candidate.get()) || !BN_sub_word(pm1.get(), 1) ||
            !BN_gcd(gcd.get(), pm1.get(), e, ctx)) {
            throw std::runtime_error("bignum arithmetic failed");
        }
        if (!BN_is_one(gcd.get())) continue;
        return candidate;
    }
}

}  // namespace

bool algorithm_known(std::uint32_t alg_code) {
    return find_algorithm(alg_code) != nullptr;
}

Result<KeyPair> generate_keypair(std::uint32_t alg_code, Rng& rng, int modulus_bits) {
    if (!algorithm_known(alg_code)) {
        return Result<KeyPair>::failure(Err::UnknownAlg,
                                        "algorithm " + std::to_string(alg_code));
    }
    if (modulus_bits < 512 || modulus_bits % 16 != 0) {
        return Result<KeyPair>::failure(Err::BadKey,
                                        "modulus bits must be >= 512 and divisible by 16");
    }

    BnCtx ctx(BN_CTX_new());
    Bn e = bn_new();
    BN_set_word(e.get(), 65537);

    const int half = modulus_bits / 2;
    for (;;) {
        Bn p = generate_prime(half, rng, e.get(), ctx.get());
        Bn q = generate_prime(half, rng, e.get(), ctx.get());
        if (BN_cmp(p.get(), q.get()) == 0) continue;

        Bn n = bn_new();
        Bn pm1 = bn_new();
        Bn qm1 = bn_new();
        Bn gcd = bn_new();
        Bn lambda = bn_new();
        Bn tmp = bn_new();
        if (!BN_mul(n.get(), p.get(), q.get(), ctx.get()) ||
            !BN_copy(pm1.get(), p.get()) || !BN_sub_word(pm1.get(), 1) ||
            !BN_copy(qm1.get(), q.get()) || !BN_sub_word(qm1.get(), 1) ||
            !BN_mul(tmp.get(), pm1.get(), qm1.get(), ctx.get()) ||
            !BN_gcd(gcd.get(), pm1.get(), qm1.get(), ctx.get()) ||
            !BN_div(lambda.get(), nullptr, tmp.get(), gcd.get(), ctx.get())) {
            throw std::runtime_error("bignum arithmetic failed");
        }
        Bn d(BN_mod_inverse(nullptr, e.get(), lambda.get(), ctx.get()));
        if (!d) continue;

        KeyPair kp;
        kp.alg_code = alg_code;
        kp.modulus = bn_to_bytes(n.get());
        kp.public_exponent = bn_to_bytes(e.get());
        kp.private_exponent = bn_to_bytes(d.get());
        kp.public_key = encode_rsa_public(kp.public_exponent, kp.modulus);
        return kp;
    }
}

Result<Handle> derive_handle(const Bytes& public_key, std::uint32_t alg_code,
                             std::size_t digest_len) {
    const AlgorithmInfo* alg = find_algorithm(alg_code);
    if (!alg) {
        return Result<Handle>::failure(Err::UnknownAlg,
                                       "algorithm " + std::to_string(alg_code));
    }
    if (digest_len < kPublicKeyDigestMin || digest_len > kPublicKeyDigestMax) {
        return Result<Handle>::failure(Err::BadDigestLen,
                                       "digest length " + std::to_string(digest_len));
    }
    Bytes hash = evp_digest(alg->md(), public_key.data(), public_key.size());
    std::string hex = to_hex_upper(hash);
    std::string suffix = hex.substr(hex.size() - digest_len);
    return Handle{AuthType::PublicKey, alg_code, std::move(suffix)};
}

bool digest_matches(const Handle& h, const Bytes& public_key) {
    if (h.auth_type != AuthType::PublicKey) {
        throw std::invalid_argument("digest_matches requires a public-key handle");
    }
    auto derived = derive_handle(public_key, h.alg_code, h.digest_hex.size());
    if (!derived) return false;
    return derived.value().digest_hex == h.digest_hex;
}

Result<Signature> sign(const Bytes& msg, const KeyPair& kp) {
    const AlgorithmInfo* alg = find_algorithm(kp.alg_code);
    if (!alg) {
        return Result<Signature>::failure(Err::UnknownAlg,
                                          "algorithm " + std::to_string(kp.alg_code));
    }
    if (!kp.has_secret() || kp.modulus.empty()) {
        return Result<Signature>::failure(Err::BadKey, "missing secret material");
    }

    const std::size_t k = kp.modulus.size();
    auto em = build_em(*alg, msg, k);
    if (!em) return em.error();

    BnCtx ctx(BN_CTX_new());
    Bn n = bn_from_bytes(kp.modulus);
    Bn d = bn_from_bytes(kp.private_exponent);
    Bn m = bn_from_bytes(em.value());
    Bn s = bn_new();
    if (!BN_mod_exp(s.get(), m.get(), d.get(), n.get(), ctx.get())) {
        throw std::runtime_error("modular exponentiation failed");
    }
    return Signature{kp.alg_code, bn_to_bytes_padded(s.get(), k)};
}

Result<bool> verify(const Bytes& msg, const Signature& sig, const Bytes& public_key) {
    const AlgorithmInfo* alg = find_algorithm(sig.alg_code);
    if (!alg) {
        return Result<bool>::failure(Err::UnknownAlg,
                                     "algorithm " + std::to_string(sig.alg_code));
    }
    Bytes exponent, modulus;
    if (!decode_rsa_public(public_key, exponent, modulus)) return false;

    const std::size_t k = modulus.size();
    if (sig.bytes.size() != k) return false;

    BnCtx ctx(BN_CTX_new());
    Bn n = bn_from_bytes(modulus);
    Bn e = bn_from_bytes(exponent);
    Bn s = bn_from_bytes(sig.bytes);
    if (BN_cmp(s.get(), n.get()) >= 0) return false;
    Bn m = bn_new();
    if (!BN_mod_exp(m.get(), s.get(), e.get(), n.get(), ctx.get())) return false;

    auto expected = build_em(*alg, msg, k);
    if (!expected) return false;
    Bytes recovered = bn_to_bytes_padded(m.get(), k);
    return CRYPTO_memcmp(recovered.data(), expected.value().data(), k) == 0;
}

std::string sha1_hex_upper(const Bytes& data) {
    return to_hex_upper(evp_digest(EVP_sha1(), data.data(), data.size()));
}

std::string sha256_hex_lower(const Bytes& data) {
    return to_hex_lower(evp_digest(EVP_sha256(), data.data(), data.size()));
}

std::string PasswordVerifier::encode() const {
    return "pbkdf2sha256$" + std::to_string(iterations) + "$" + to_hex_lower(salt) +
           "$" + to_hex_lower(hash);
}

Result<PasswordVerifier> PasswordVerifier::decode(std::string_view text) {
    auto fail = [] {
        return Result<PasswordVerifier>::failure(Err::BadRequest, "bad verifier encoding");
    };
    constexpr std::string_view prefix = "pbkdf2sha256$";
    if (!text.starts_with(prefix)) return fail();
    text.remove_prefix(prefix.size());
    std::size_t d1 = text.find('$');
    if (d1 == std::string_view::npos) return fail();
    std::size_t d2 = text.find('$', d1 + 1);
    if (d2 == std::string_view::npos) return fail();

    auto iters = parse_decimal(text.substr(0, d1));
    auto salt = from_hex(text.substr(d1 + 1, d2 - d1 - 1), true);
    auto hash = from_hex(text.substr(d2 + 1), true);
    if (!iters || *iters == 0 || *iters > UINT32_MAX || !salt || !hash || hash->empty()) {
        return fail();
    }
    return PasswordVerifier{static_cast<std::uint32_t>(*iters), std::move(*salt),
                            std::move(*hash)};
}

namespace {

Bytes pbkdf2_sha256(std::string_view password, const Bytes& salt,
                    std::uint32_t iterations) {
    Bytes out(32);
    if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()),
                          salt.data(), static_cast<int>(salt.size()),
                          static_cast<int>(iterations), EVP_sha256(),
                          static_cast<int>(out.size()), out.data()) != 1) {
        throw std::runtime_error("pbkdf2 failed");
    }
    return out;
}

}  // namespace

PasswordVerifier make_password_verifier(std::string_view password,
                                        std::uint32_t iterations, Rng& rng) {
    PasswordVerifier v;
    v.iterations = iterations == 0 ? 1 : iterations;
    v.salt = rng.bytes(16);
    v.hash = pbkdf2_sha256(password, v.salt, v.iterations);
    return v;
}

bool check_password(const PasswordVerifier& v, std::string_view password) {
    Bytes probe = pbkdf2_sha256(password, v.salt, v.iterations);
    if (probe.size() != v.hash.size()) return false;
    return CRYPTO_memcmp(probe.data(), v.hash.data(), probe.size()) == 0;
}

namespace {

Result<std::string> read_field(std::istream& in, std::string_view key) {
    std::string line;
    if (!std::getline(in, line)) {
        return Result<std::string>::failure(Err::BadKey, "truncated key file");
    }
    if (!line.starts_with(key) || line.size() <= key.size() ||
        line[key.size()] != '=') {
        return Result<std::string>::failure(Err::BadKey,
                                            "expected field " + std::string(key));
    }
    return line.substr(key.size() + 1);
}

}  // namespace

Result<void> save_secret_key(const KeyPair& kp, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) return Result<void>::failure(Err::IoError, "cannot write " + path);
    out << "ONHS-SECRET v1\n";
    out << "alg=" << kp.alg_code << "\n";
    out << "n=" << to_hex_lower(kp.modulus) << "\n";
    out << "e=" << to_hex_lower(kp.public_exponent) << "\n";
    out << "d=" << to_hex_lower(kp.private_exponent) << "\n";
    out.close();
    if (!out) return Result<void>::failure(Err::IoError, "write failed: " + path);
    ::chmod(path.c_str(), S_IRUSR | S_IWUSR);
    return {};
}

Result<KeyPair> load_secret_key(const std::string& path) {
    std::ifstream in(path);
    if (!in) return Result<KeyPair>::failure(Err::IoError, "cannot read " + path);
    std::string header;
    std::getline(in, header);
    if (header != "ONHS-SECRET v1") {
        return Result<KeyPair>::failure(Err::BadKey, "not a secret key file");
    }
    auto alg = read_field(in, "alg");
    if (!alg) return alg.error();
    auto n = read_field(in, "n");
    if (!n) return n.error();
    auto e = read_field(in, "e");
    if (!e) return e.error();
    auto d = read_field(in, "d");
    if (!d) return d.error();

    auto alg_code = parse_decimal(alg.value());
    auto n_bytes = from_hex(n.value(), true);
    auto e_bytes = from_hex(e.value(), true);
    auto d_bytes = from_hex(d.value(), true);
    if (!alg_code || !n_bytes || !e_bytes || !d_bytes) {
        return Result<KeyPair>::failure(Err::BadKey, "malformed key fields");
    }
    KeyPair kp;
    kp.alg_code = static_cast<std::uint32_t>(*alg_code);
    kp.modulus = std::move(*n_bytes);
    kp.public_exponent = std::move(*e_bytes);
    kp.private_exponent = std::move(*d_bytes);
    kp.public_key = encode_rsa_public(kp.public_exponent, kp.modulus);
    return kp;
}

Result<void> save_public_key(const KeyPair& kp, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) return Result<void>::failure(Err::IoError, "cannot write " + path);
    out << "ONHS-PUBLIC v1\n";
    out << "alg=" << kp.alg_code << "\n";
    out << "key=" << to_hex_lower(kp.public_key) << "\n";
    out.close();
    if (!out) return Result<void>::failure(Err::IoError, "write failed: " + path);
    return {};
}

Result<std::pair<std::uint32_t, Bytes>> load_public_key(const std::string& path) {
    using R = Result<std::pair<std::uint32_t, Bytes>>;
    std::ifstream in(path);
    if (!in) return R::failure(Err::IoError, "cannot read " + path);
    std::string header;
    std::getline(in, header);
    if (header != "ONHS-PUBLIC v1") return R::failure(Err::BadKey, "not a public key file");
    auto alg = read_field(in, "alg");
    if (!alg) return alg.error();
    auto key = read_field(in, "key");
    if (!key) return key.error();
    auto alg_code = parse_decimal(alg.value());
    auto key_bytes = from_hex(key.value(), true);
    if (!alg_code || !key_bytes) return R::failure(Err::BadKey, "malformed key fields");
    return std::make_pair(static_cast<std::uint32_t>(*alg_code), std::move(*key_bytes));
}

}  // namespace onhs
