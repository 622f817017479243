#include "onhs/wire.hpp"

#include <algorithm>

#include "onhs/zone.hpp"

namespace onhs::wire {
namespace {

// Strict tokenizer: single spaces only, no empty fields.
bool split_fields(std::string_view line, std::vector<std::string>& out) {
    out.clear();
    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t space = line.find(' ', start);
        std::string_view tok = line.substr(
            start, space == std::string_view::npos ? std::string_view::npos : space - start);
        if (tok.empty()) return false;
        out.emplace_back(tok);
        if (space == std::string_view::npos) break;
        start = space + 1;
    }
    return !out.empty();
}

Error bad_request(std::string detail) {
    return Error{Err::BadRequest, std::move(detail), -1};
}

// Parses the trailing auth fields of a mutating request into `req`.
Result<void> read_auth(const std::vector<std::string>& tokens, std::size_t index,
                       UpdateRequest& req) {
    if (req.handle.auth_type == AuthType::PublicKey) {
        if (tokens.size() != index + 2) {
            return Result<void>(bad_request("want-signature-and-key"));
        }
        auto sig = from_hex(tokens[index], true);
        auto key = from_hex(tokens[index + 1], true);
        if (!sig || sig->empty() || !key || key->empty()) {
            return Result<void>(bad_request("bad-auth-hex"));
        }
        req.auth.signature = std::move(*sig);
        req.auth.public_key = std::move(*key);
    } else {
        if (tokens.size() != index + 1) {
            return Result<void>(bad_request("want-password"));
        }
        req.auth.password = tokens[index];
    }
    return {};
}

Result<Handle> read_handle(const std::string& token) {
    auto h = parse_handle(token);
    if (!h) return h;
    if (format_handle(h.value()) != token) {
        return Result<Handle>::failure(Err::BadHandle, "non-canonical handle");
    }
    return h;
}

std::string ok_mutation(const HandleRecord& rec) {
    return "OK " + format_handle(rec.handle) + " seq=" + std::to_string(rec.seq);
}

std::string serve_mutation(Registry& registry, const UpdateRequest& req, Timestamp now) {
    auto rec = registry.apply(req, now);
    if (!rec) return error_response(rec.error());
    return ok_mutation(rec.value());
}

}  // namespace

std::string error_response(const Error& e) {
    std::string out = "ERR ";
    out += err_name(e.code);
    if (!e.detail.empty()) {
        out += ' ';
        out += e.detail;
    }
    return out;
}

std::string format_resolve_response(const ResolutionResult& r) {
    std::string out = "OK " + r.address.text();
    out += " ttl=" + std::to_string(r.ttl_seconds);
    out += " chain=" + std::to_string(r.chain.size());
    out += " verified=";
    out += r.verified ? '1' : '0';
    if (r.compromised) out += " compromised=1";
    out += " proof=";
    for (std::size_t i = 0; i < r.hop_proofs.size(); ++i) {
        out += to_hex_lower(to_bytes(r.hop_proofs[i]));
        out += ',';
    }
    out += to_hex_lower(to_bytes(r.binding_proof));
    return out;
}

namespace {

std::string dispatch_request(Registry& registry, Rng& rng, std::string_view line,
                             Timestamp now);

}  // namespace

std::string handle_request_line(Registry& registry, Rng& rng, std::string_view line,
                                Timestamp now) {
    try {
        return dispatch_request(registry, rng, line, now);
    } catch (const std::exception&) {
        return error_response(bad_request("internal-error"));
    }
}

namespace {

std::string dispatch_request(Registry& registry, Rng& rng, std::string_view line,
                             Timestamp now) {
    if (line.size() > kMaxRequestBytes) {
        return error_response(bad_request("too-long"));
    }
    std::vector<std::string> tokens;
    if (!split_fields(line, tokens)) {
        return error_response(bad_request("empty-or-malformed"));
    }
    const std::string& verb = tokens[0];

    if (verb == "CREATE") {
        if (tokens.size() == 3 && tokens[1] == "0") {
            auto h = registry.create_sponsored(tokens[2], now, rng);
            if (!h) return error_response(h.error());
            return "OK " + format_handle(h.value()) + " seq=0";
        }
        if (tokens.size() != 4) return error_response(bad_request("want-handle-sig-key"));
        auto h = read_handle(tokens[1]);
        if (!h) return error_response(h.error());
        if (h.value().auth_type != AuthType::PublicKey) {
            return error_response(bad_request("create-0-for-password-handles"));
        }
        UpdateRequest req;
        req.op = OpCode::Create;
        req.handle = h.value();
        req.seq = 0;
        if (auto a = read_auth(tokens, 2, req); !a) return error_response(a.error());
        return serve_mutation(registry, req, now);
    }

    if (verb == "ASSIGN") {
        if (tokens.size() < 7) return error_response(bad_request("too-few-fields"));
        auto h = read_handle(tokens[1]);
        if (!h) return error_response(h.error());
        UpdateRequest req;
        req.op = OpCode::Assign;
        req.handle = h.value();
        auto seq = parse_decimal(tokens[2]);
        if (!seq) return error_response(bad_request("bad-seq"));
        req.seq = *seq;
        if (tokens[3] != "-" && !parse_label_path(tokens[3])) {
            return error_response(Error{Err::BadLabel, tokens[3], -1});
        }
        req.label_path = tokens[3];
        auto addr = Address::parse(tokens[4]);
        if (!addr) return error_response(addr.error());
        if (addr.value().text() != tokens[4]) {
            return error_response(Error{Err::BadAddress, "non-canonical-address", -1});
        }
        req.address = std::move(addr).take();
        auto ttl = parse_decimal(tokens[5]);
        auto expiry = parse_decimal(tokens[6]);
        if (!ttl || *ttl > INT64_MAX || !expiry || *expiry > INT64_MAX) {
            return error_response(bad_request("bad-ttl-or-expiry"));
        }
        req.ttl_seconds = static_cast<std::int64_t>(*ttl);
        req.expiry = static_cast<Timestamp>(*expiry);
        if (auto a = read_auth(tokens, 7, req); !a) return error_response(a.error());
        return serve_mutation(registry, req, now);
    }

    if (verb == "DELEGATE" || verb == "TRANSFER") {
        const bool is_delegate = verb == "DELEGATE";
        const std::size_t fixed = is_delegate ? 5 : 4;
        if (tokens.size() < fixed) return error_response(bad_request("too-few-fields"));
        auto h = read_handle(tokens[1]);
        if (!h) return error_response(h.error());
        UpdateRequest req;
        req.op = is_delegate ? OpCode::Delegate : OpCode::Transfer;
        req.handle = h.value();
        auto seq = parse_decimal(tokens[2]);
        if (!seq) return error_response(bad_request("bad-seq"));
        req.seq = *seq;
        auto target = read_handle(tokens[3]);
        if (!target) return error_response(target.error());
        req.target = target.value();
        if (is_delegate) {
            auto expiry = parse_decimal(tokens[4]);
            if (!expiry || *expiry > INT64_MAX) {
                return error_response(bad_request("bad-expiry"));
            }
            req.expiry = static_cast<Timestamp>(*expiry);
        }
        if (auto a = read_auth(tokens, fixed, req); !a) return error_response(a.error());
        return serve_mutation(registry, req, now);
    }

    if (verb == "CANCEL" || verb == "COMPROMISE") {
        if (tokens.size() < 3) return error_response(bad_request("too-few-fields"));
        auto h = read_handle(tokens[1]);
        if (!h) return error_response(h.error());
        UpdateRequest req;
        req.op = verb == "CANCEL" ? OpCode::Cancel : OpCode::Compromise;
        req.handle = h.value();
        auto seq = parse_decimal(tokens[2]);
        if (!seq) return error_response(bad_request("bad-seq"));
        req.seq = *seq;
        if (auto a = read_auth(tokens, 3, req); !a) return error_response(a.error());
        return serve_mutation(registry, req, now);
    }

    if (verb == "RESOLVE") {
        if (tokens.size() < 3) return error_response(bad_request("too-few-fields"));
        auto h = read_handle(tokens[1]);
        if (!h) return error_response(h.error());
        auto nlabels = parse_decimal(tokens[2]);
        if (!nlabels || *nlabels > 32) return error_response(bad_request("bad-label-count"));
        std::size_t n = static_cast<std::size_t>(*nlabels);
        if (tokens.size() < 3 + n) return error_response(bad_request("missing-labels"));
        std::vector<std::string> labels(tokens.begin() + 3, tokens.begin() + 3 + n);
        for (const auto& label : labels) {
            if (!valid_dns_label(label)) {
                return error_response(Error{Err::BadLabel, label, -1});
            }
        }
        ResolveOptions opts;
        std::size_t rest = 3 + n;
        if (tokens.size() == rest + 1 && tokens[rest] == "unsafe") {
            opts.unsafe = true;
        } else if (tokens.size() != rest) {
            return error_response(bad_request("trailing-fields"));
        }
        auto result = resolve(registry, h.value(), label_path_token(labels), now, opts);
        if (!result) return error_response(result.error());
        return format_resolve_response(result.value());
    }

    if (verb == "EXPORT-ZONE") {
        if (tokens.size() != 2) return error_response(bad_request("want-origin"));
        // Reuse the embedding validator for the origin string.
        Handle probe{AuthType::PublicKey, 5, "0000000000000000"};
        if (!embed_fqdn(probe, {}, tokens[1])) {
            return error_response(bad_request("bad-origin"));
        }
        std::string zone = export_zone(registry, tokens[1], now);
        return "OK " + to_hex_lower(to_bytes(zone));
    }

    return error_response(bad_request("unknown-verb"));
}

}  // namespace

Result<std::string> build_create(const Handle& handle, const KeyPair& kp) {
    UpdateRequest req;
    req.op = OpCode::Create;
    req.handle = handle;
    req.seq = 0;
    req.auth.public_key = kp.public_key;
    auto sig = sign(to_bytes(canonical_message(req)), kp);
    if (!sig) return sig.error();
    return "CREATE " + format_handle(handle) + " " + to_hex_lower(sig.value().bytes) +
           " " + to_hex_lower(kp.public_key);
}

std::string build_create_sponsored(std::string_view password) {
    return "CREATE 0 " + std::string(password);
}

namespace {

std::string request_body(const UpdateRequest& req) {
    std::string out{op_name(req.op)};
    out += ' ';
    out += format_handle(req.handle);
    out += ' ';
    out += std::to_string(req.seq);
    switch (req.op) {
        case OpCode::Assign:
            out += ' ';
            out += req.label_path;
            out += ' ';
            out += req.address.text();
            out += ' ';
            out += std::to_string(req.ttl_seconds);
            out += ' ';
            out += std::to_string(req.expiry);
            break;
        case OpCode::Delegate:
            out += ' ';
            out += format_handle(*req.target);
            out += ' ';
            out += std::to_string(req.expiry);
            break;
        case OpCode::Transfer:
            out += ' ';
            out += format_handle(*req.target);
            break;
        default:
            break;
    }
    return out;
}

}  // namespace

Result<std::string> build_signed_request(UpdateRequest req, const KeyPair& kp) {
    req.auth.public_key = kp.public_key;
    auto sig = sign(to_bytes(canonical_message(req)), kp);
    if (!sig) return sig.error();
    return request_body(req) + " " + to_hex_lower(sig.value().bytes) + " " +
           to_hex_lower(kp.public_key);
}

Result<std::string> build_password_request(UpdateRequest req, std::string_view password) {
    if (password.empty() || password.find(' ') != std::string_view::npos) {
        return Result<std::string>::failure(Err::BadRequest,
                                            "password must be one non-empty token");
    }
    return request_body(req) + " " + std::string(password);
}

std::string build_resolve(const Handle& handle, std::string_view label_path, bool unsafe) {
    std::string out = "RESOLVE " + format_handle(handle);
    auto labels = parse_label_path(label_path.empty() ? "-" : label_path);
    const auto& list = labels ? labels.value() : std::vector<std::string>{};
    out += ' ';
    out += std::to_string(list.size());
    for (const auto& label : list) {
        out += ' ';
        out += label;
    }
    if (unsafe) out += " unsafe";
    return out;
}

std::string build_export_zone(std::string_view origin) {
    return "EXPORT-ZONE " + std::string(origin);
}

Result<ResolveReply> parse_resolve_reply(std::string_view line) {
    using R = Result<ResolveReply>;
    auto fail = [](std::string detail) {
        return R::failure(Err::BadResponse, std::move(detail));
    };

    std::vector<std::string> tokens;
    if (!split_fields(line, tokens)) return fail("malformed response");
    if (tokens[0] != "OK") {
        if (tokens[0] == "ERR" && tokens.size() >= 2) {
            Err code;
            if (err_from_name(tokens[1], code)) {
                std::string detail;
                for (std::size_t i = 2; i < tokens.size(); ++i) {
                    if (i > 2) detail += ' ';
                    detail += tokens[i];
                }
                return R::failure(code, detail);
            }
        }
        return fail("not an OK response");
    }
    if (tokens.size() < 6 || tokens.size() > 7) return fail("wrong field count");

    ResolveReply reply;
    auto addr = Address::parse(tokens[1]);
    if (!addr || addr.value().text() != tokens[1]) return fail("bad address");
    reply.address = std::move(addr).take();

    if (!tokens[2].starts_with("ttl=")) return fail("missing ttl");
    auto ttl = parse_decimal(std::string_view(tokens[2]).substr(4));
    if (!ttl || *ttl > INT64_MAX) return fail("bad ttl");
    reply.ttl = static_cast<std::int64_t>(*ttl);

    if (!tokens[3].starts_with("chain=")) return fail("missing chain");
    auto chain = parse_decimal(std::string_view(tokens[3]).substr(6));
    if (!chain || *chain == 0 || *chain > 64) return fail("bad chain length");
    reply.chain = static_cast<std::size_t>(*chain);

    if (tokens[4] == "verified=1") {
        reply.verified_flag = true;
    } else if (tokens[4] != "verified=0") {
        return fail("bad verified flag");
    }

    std::size_t next = 5;
    if (tokens.size() == 7) {
        if (tokens[5] != "compromised=1") return fail("bad compromised flag");
        reply.compromised = true;
        next = 6;
    }

    std::string_view proof{tokens[next]};
    if (!proof.starts_with("proof=")) return fail("missing proof");
    proof.remove_prefix(6);
    std::size_t start = 0;
    while (start <= proof.size()) {
        std::size_t comma = proof.find(',', start);
        std::string_view chunk = proof.substr(
            start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        auto decoded = from_hex(chunk, true);
        if (!decoded || decoded->empty()) return fail("bad proof hex");
        reply.proof_lines.emplace_back(decoded->begin(), decoded->end());
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (reply.proof_lines.size() != reply.chain) return fail("proof count mismatch");
    return reply;
}

Result<ResolutionResult> check_reply(const ResolveReply& reply, const Handle& queried,
                                     std::string_view label_path, Timestamp now,
                                     bool strict) {
    using R = Result<ResolutionResult>;
    auto fail = [](std::string detail) {
        return R::failure(Err::BadResponse, std::move(detail));
    };

    ResolutionResult result;
    result.address = reply.address;
    result.label_path = label_path.empty() ? "-" : std::string(label_path);
    result.ttl_seconds = reply.ttl;
    result.compromised = reply.compromised;

    // Rebuild the chain from the hop proofs; the first handle is what we
    // asked for, every later one is the previous hop's recorded target.
    result.chain.push_back(queried);
    for (std::size_t i = 0; i + 1 < reply.proof_lines.size(); ++i) {
        std::string canonical;
        auto hop = parse_proof_line(reply.proof_lines[i], canonical);
        if (!hop) return fail("bad hop proof");
        if (hop.value().op != OpCode::Delegate && hop.value().op != OpCode::Transfer) {
            return fail("hop proof is not a redirect");
        }
        if (!(hop.value().handle == result.chain.back())) {
            return fail("hop proof names the wrong handle");
        }
        result.chain.push_back(*hop.value().target);
        result.hop_proofs.push_back(reply.proof_lines[i]);
    }
    result.binding_proof = reply.proof_lines.back();

    // Single-hop replies are fully pinned: the proven binding ttl must be
    // the advertised ttl. Longer chains may only shorten it.
    std::string canonical;
    auto terminal = parse_proof_line(result.binding_proof, canonical);
    if (!terminal) return fail("bad terminal proof");
    if (reply.chain == 1 && terminal.value().ttl_seconds != reply.ttl) {
        return fail("ttl does not match proof");
    }
    if (reply.chain > 1 && reply.ttl > terminal.value().ttl_seconds) {
        return fail("ttl exceeds proof");
    }

    result.verified = reply.verified_flag && verify_result(result, now, strict);
    return result;
}

bool reply_verifies(std::string_view line, const Handle& queried,
                    std::string_view label_path, Timestamp now, bool strict) {
    auto reply = parse_resolve_reply(line);
    if (!reply) return false;
    auto checked = check_reply(reply.value(), queried, label_path, now, strict);
    return checked.ok() && checked.value().verified;
}

Result<std::string> parse_export_zone_reply(std::string_view line) {
    if (!line.starts_with("OK ")) {
        return Result<std::string>::failure(Err::BadResponse, "not an OK response");
    }
    auto bytes = from_hex(line.substr(3), true);
    if (!bytes) {
        return Result<std::string>::failure(Err::BadResponse, "bad zone hex");
    }
    return std::string(bytes->begin(), bytes->end());
}

Result<std::pair<Handle, std::uint64_t>> parse_mutation_reply(std::string_view line) {
    using R = Result<std::pair<Handle, std::uint64_t>>;
    std::vector<std::string> tokens;
    if (!split_fields(line, tokens) || tokens.size() != 3 || tokens[0] != "OK") {
        return R::failure(Err::BadResponse, std::string(line));
    }
    auto h = parse_handle(tokens[1]);
    if (!h) return h.error();
    if (!tokens[2].starts_with("seq=")) return R::failure(Err::BadResponse, "missing seq");
    auto seq = parse_decimal(std::string_view(tokens[2]).substr(4));
    if (!seq) return R::failure(Err::BadResponse, "bad seq");
    return std::make_pair(h.value(), *seq);
}

}  // namespace onhs::wire
