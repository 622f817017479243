#include "onhs/registry.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

namespace onhs {

std::string_view record_state_name(RecordState s) {
    switch (s) {
        case RecordState::Active: return "active";
        case RecordState::Cancelled: return "cancelled";
        case RecordState::Transferred: return "transferred";
        case RecordState::Compromised: return "compromised";
    }
    return "?";
}

std::string_view op_name(OpCode op) {
    switch (op) {
        case OpCode::Create: return "CREATE";
        case OpCode::Assign: return "ASSIGN";
        case OpCode::Delegate: return "DELEGATE";
        case OpCode::Cancel: return "CANCEL";
        case OpCode::Transfer: return "TRANSFER";
        case OpCode::Compromise: return "COMPROMISE";
    }
    return "?";
}

bool op_from_name(std::string_view name, OpCode& out) {
    for (OpCode op : {OpCode::Create, OpCode::Assign, OpCode::Delegate, OpCode::Cancel,
                      OpCode::Transfer, OpCode::Compromise}) {
        if (op_name(op) == name) {
            out = op;
            return true;
        }
    }
    return false;
}

std::string canonical_message(const UpdateRequest& req) {
    std::string msg = "ONHSv1|";
    msg += op_name(req.op);
    msg += '|';
    msg += format_handle(req.handle);
    msg += '|';
    msg += std::to_string(req.seq);
    switch (req.op) {
        case OpCode::Create:
            msg += '|';
            msg += req.handle.auth_type == AuthType::PublicKey
                       ? to_hex_lower(req.auth.public_key)
                       : req.verifier_encoded;
            break;
        case OpCode::Assign:
            msg += '|';
            msg += req.label_path;
            msg += '|';
            msg += req.address.text();
            msg += '|';
            msg += std::to_string(req.ttl_seconds);
            msg += '|';
            msg += std::to_string(req.expiry);
            break;
        case OpCode::Delegate:
            msg += '|';
            msg += format_handle(*req.target);
            msg += '|';
            msg += std::to_string(req.expiry);
            break;
        case OpCode::Transfer:
            msg += '|';
            msg += format_handle(*req.target);
            break;
        case OpCode::Cancel:
        case OpCode::Compromise:
            break;
    }
    return msg;
}

std::string proof_line(const UpdateRequest& req) {
    std::string line = canonical_message(req);
    if (req.handle.auth_type == AuthType::PublicKey) {
        line += '|';
        line += to_hex_lower(req.auth.signature);
        line += '|';
        line += to_hex_lower(req.auth.public_key);
    } else {
        line += "|-|-";
    }
    return line;
}

std::string log_line(const UpdateRequest& req, Timestamp now) {
    return proof_line(req) + "|ts=" + std::to_string(now);
}

namespace {

std::vector<std::string> split_pipes(std::string_view line) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t bar = line.find('|', start);
        parts.emplace_back(line.substr(
            start, bar == std::string_view::npos ? std::string_view::npos : bar - start));
        if (bar == std::string_view::npos) break;
        start = bar + 1;
    }
    return parts;
}

std::size_t op_field_count(OpCode op) {
    switch (op) {
        case OpCode::Create: return 1;
        case OpCode::Assign: return 4;
        case OpCode::Delegate: return 2;
        case OpCode::Cancel: return 0;
        case OpCode::Transfer: return 1;
        case OpCode::Compromise: return 0;
    }
    return 0;
}

Result<Handle> parse_canonical_handle(std::string_view token) {
    auto h = parse_handle(token);
    if (!h) return h;
    if (format_handle(h.value()) != token) {
        return Result<Handle>::failure(Err::BadHandle, "non-canonical handle text");
    }
    return h;
}

}  // namespace

namespace {

Result<UpdateRequest> parse_update_line(std::string_view line, bool with_ts,
                                        Timestamp& ts_out, std::string& canonical_out) {
    using R = Result<UpdateRequest>;
    auto fail = [](std::string detail) {
        return R::failure(Err::CorruptLog, std::move(detail));
    };

    const std::size_t trailer = with_ts ? 3 : 2;  // sig, key, optional ts
    auto parts = split_pipes(line);
    if (parts.size() < 4 + trailer || parts[0] != "ONHSv1") return fail("bad line framing");

    UpdateRequest req;
    if (!op_from_name(parts[1], req.op)) return fail("unknown op " + parts[1]);
    if (parts.size() != 4 + trailer + op_field_count(req.op)) {
        return fail("wrong field count");
    }

    auto handle = parse_canonical_handle(parts[2]);
    if (!handle) return fail("bad handle: " + handle.error().to_string());
    req.handle = std::move(handle).take();

    auto seq = parse_decimal(parts[3]);
    if (!seq) return fail("bad sequence number");
    req.seq = *seq;

    std::size_t i = 4;
    switch (req.op) {
        case OpCode::Create:
            if (req.handle.auth_type == AuthType::SponsorPassword) {
                auto v = PasswordVerifier::decode(parts[i]);
                if (!v) return fail("bad verifier");
                req.verifier_encoded = parts[i];
            } else {
                // field must repeat the key column, checked below
                req.verifier_encoded.clear();
            }
            i += 1;
            break;
        case OpCode::Assign: {
            if (parts[i] != "-" && !parse_label_path(parts[i])) return fail("bad label path");
            req.label_path = parts[i];
            auto addr = Address::parse(parts[i + 1]);
            if (!addr || addr.value().text() != parts[i + 1]) return fail("bad address");
            req.address = std::move(addr).take();
            auto ttl = parse_decimal(parts[i + 2]);
            auto expiry = parse_decimal(parts[i + 3]);
            if (!ttl || *ttl > INT64_MAX || !expiry || *expiry > INT64_MAX) {
                return fail("bad ttl or expiry");
            }
            req.ttl_seconds = static_cast<std::int64_t>(*ttl);
            req.expiry = static_cast<Timestamp>(*expiry);
            i += 4;
            break;
        }
        case OpCode::Delegate: {
            auto target = parse_canonical_handle(parts[i]);
            if (!target) return fail("bad delegation target");
            req.target = std::move(target).take();
            auto expiry = parse_decimal(parts[i + 1]);
            if (!expiry || *expiry > INT64_MAX) return fail("bad expiry");
            req.expiry = static_cast<Timestamp>(*expiry);
            i += 2;
            break;
        }
        case OpCode::Transfer: {
            auto target = parse_canonical_handle(parts[i]);
            if (!target) return fail("bad transfer target");
            req.target = std::move(target).take();
            i += 1;
            break;
        }
        case OpCode::Cancel:
        case OpCode::Compromise:
            break;
    }

    const std::string& sig_col = parts[i];
    const std::string& key_col = parts[i + 1];

    if (req.handle.auth_type == AuthType::PublicKey) {
        auto sig = from_hex(sig_col, true);
        auto key = from_hex(key_col, true);
        if (!sig || sig->empty() || !key || key->empty()) return fail("bad signature columns");
        req.auth.signature = std::move(*sig);
        req.auth.public_key = std::move(*key);
        if (req.op == OpCode::Create && parts[4] != key_col) {
            return fail("create key field does not match key column");
        }
    } else {
        if (sig_col != "-" || key_col != "-") return fail("password line with signature");
    }

    if (with_ts) {
        const std::string& ts_col = parts[i + 2];
        if (!ts_col.starts_with("ts=")) return fail("missing timestamp");
        auto ts = parse_decimal(std::string_view(ts_col).substr(3));
        if (!ts || *ts > INT64_MAX) return fail("bad timestamp");
        ts_out = static_cast<Timestamp>(*ts);
    }

    canonical_out.clear();
    for (std::size_t j = 0; j < i; ++j) {
        if (j > 0) canonical_out += '|';
        canonical_out += parts[j];
    }
    return req;
}

}  // namespace

Result<UpdateRequest> parse_log_line(std::string_view line, Timestamp& ts_out,
                                     std::string& canonical_out) {
    return parse_update_line(line, true, ts_out, canonical_out);
}

Result<UpdateRequest> parse_proof_line(std::string_view line, std::string& canonical_out) {
    Timestamp ignored = 0;
    return parse_update_line(line, false, ignored, canonical_out);
}

Registry::Registry(RegistryConfig cfg) : cfg_(cfg) {}

Result<void> Registry::check_auth(const HandleRecord& rec, const UpdateRequest& req) const {
    if (rec.handle.auth_type == AuthType::PublicKey) {
        if (req.auth.public_key != rec.owner_pub) {
            return Result<void>::failure(Err::KeyMismatch, "key is not the record owner");
        }
        Signature sig{rec.handle.alg_code, req.auth.signature};
        auto ok = verify(to_bytes(canonical_message(req)), sig, rec.owner_pub);
        if (!ok) return ok.error();
        if (!ok.value()) {
            return Result<void>::failure(Err::BadSignature, "signature check failed");
        }
        return {};
    }
    if (!rec.password || !req.auth.password ||
        !check_password(*rec.password, *req.auth.password)) {
        return Result<void>::failure(Err::BadSignature, "password check failed");
    }
    return {};
}

Result<HandleRecord> Registry::apply_locked(const UpdateRequest& req, Timestamp now,
                                            bool trusted_replay,
                                            const std::string* raw_line) {
    using R = Result<HandleRecord>;
    if (auto v = validate_handle(req.handle); !v) return v.error();

    const std::string key = format_handle(req.handle);
    const std::string line = raw_line ? *raw_line : log_line(req, now);
    const std::string proof = proof_line(req);

    if (req.op == OpCode::Create) {
        if (auto it = records_.find(key); it != records_.end()) {
            // Tombstones absorb re-creation attempts just like any other
            // update; a live record reports the name collision.
            if (it->second.terminal()) {
                return R::failure(Err::StateFinal,
                                  std::string(record_state_name(it->second.state)));
            }
            return R::failure(Err::HandleExists, key);
        }
        if (req.seq != 0) {
            return R::failure(Err::BadRequest, "create must carry sequence 0");
        }
        HandleRecord rec;
        rec.handle = req.handle;
        rec.seq = 0;
        rec.created_at = now;
        rec.updated_at = now;
        if (req.handle.auth_type == AuthType::PublicKey) {
            if (!algorithm_known(req.handle.alg_code)) {
                return R::failure(Err::UnknownAlg,
                                  "algorithm " + std::to_string(req.handle.alg_code));
            }
            if (req.auth.public_key.empty() ||
                !digest_matches(req.handle, req.auth.public_key)) {
                return R::failure(Err::KeyMismatch, "key digest does not match handle");
            }
            Signature sig{req.handle.alg_code, req.auth.signature};
            auto ok = verify(to_bytes(canonical_message(req)), sig, req.auth.public_key);
            if (!ok) return ok.error();
            if (!ok.value()) return R::failure(Err::BadSignature, "signature check failed");
            rec.owner_pub = req.auth.public_key;
        } else {
            auto verifier = PasswordVerifier::decode(req.verifier_encoded);
            if (!verifier) return R::failure(Err::BadRequest, "bad password verifier");
            rec.password = std::move(verifier).take();
        }
        append_log(line);
        records_.emplace(key, rec);
        return rec;
    }

    auto it = records_.find(key);
    if (it == records_.end()) {
        return R::failure(Err::NotFound, key);
    }
    HandleRecord& rec = it->second;
    if (rec.terminal()) {
        return R::failure(Err::StateFinal, std::string(record_state_name(rec.state)));
    }
    if (req.seq <= rec.seq) {
        return R::failure(Err::SeqReplay, "last=" + std::to_string(rec.seq),
                          static_cast<long>(rec.seq));
    }
    if (!(trusted_replay && rec.handle.auth_type == AuthType::SponsorPassword)) {
        if (auto a = check_auth(rec, req); !a) return a.error();
    }

    switch (req.op) {
        case OpCode::Assign: {
            if (req.label_path != "-" && !parse_label_path(req.label_path)) {
                return R::failure(Err::BadLabel, req.label_path);
            }
            if (req.ttl_seconds < 0) {
                return R::failure(Err::BadRequest, "negative ttl");
            }
            Binding b;
            b.label_path = req.label_path;
            b.address = req.address;
            b.ttl_seconds = req.ttl_seconds;
            b.expiry = req.expiry;
            b.proof_line = proof;
            rec.bindings[req.label_path] = std::move(b);
            break;
        }
        case OpCode::Delegate:
            if (*req.target == req.handle) {
                return R::failure(Err::SelfDelegation, key);
            }
            rec.delegation = Delegation{*req.target, req.expiry, proof};
            break;
        case OpCode::Cancel:
            rec.state = RecordState::Cancelled;
            break;
        case OpCode::Transfer:
            if (*req.target == req.handle) {
                return R::failure(Err::SelfTransfer, key);
            }
            rec.state = RecordState::Transferred;
            rec.transfer_target = *req.target;
            rec.transfer_proof = proof;
            break;
        case OpCode::Compromise:
            rec.state = RecordState::Compromised;
            break;
        case OpCode::Create:
            break;  // handled above
    }

    rec.seq = req.seq;
    rec.updated_at = now;
    append_log(line);
    return rec;
}

Result<HandleRecord> Registry::apply(const UpdateRequest& req, Timestamp now) {
    std::unique_lock lock(mu_);
    return apply_locked(req, now, false, nullptr);
}

Result<Handle> Registry::create_sponsored(std::string_view password, Timestamp now,
                                          Rng& rng) {
    std::unique_lock lock(mu_);
    const int len = cfg_.sponsored_digest_len;
    for (;;) {
        Bytes raw = rng.bytes(static_cast<std::size_t>(len + 1) / 2);
        std::string digest = to_hex_upper(raw).substr(0, static_cast<std::size_t>(len));
        Handle h{AuthType::SponsorPassword, 0, digest};
        if (records_.contains(format_handle(h))) continue;

        UpdateRequest req;
        req.op = OpCode::Create;
        req.handle = h;
        req.seq = 0;
        req.verifier_encoded =
            make_password_verifier(password, cfg_.pbkdf2_iterations, rng).encode();
        auto rec = apply_locked(req, now, false, nullptr);
        if (!rec) return rec.error();
        return h;
    }
}

std::optional<HandleRecord> Registry::lookup(const Handle& h) const {
    std::shared_lock lock(mu_);
    auto it = records_.find(format_handle(h));
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

std::vector<HandleRecord> Registry::all_records() const {
    std::shared_lock lock(mu_);
    std::vector<HandleRecord> out;
    out.reserve(records_.size());
    for (const auto& [key, rec] : records_) out.push_back(rec);
    return out;
}

std::size_t Registry::size() const {
    std::shared_lock lock(mu_);
    return records_.size();
}

std::vector<std::string> Registry::log_lines() const {
    std::shared_lock lock(mu_);
    return log_;
}

void Registry::set_log_sink(std::function<void(const std::string&)> sink) {
    std::unique_lock lock(mu_);
    sink_ = std::move(sink);
}

void Registry::append_log(const std::string& line) {
    log_.push_back(line);
    if (sink_) sink_(line);
}

Result<void> Registry::load_log(std::istream& in) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        lines.push_back(line);
    }
    return load_log_lines(lines);
}

Result<void> Registry::load_log_lines(const std::vector<std::string>& lines) {
    std::unique_lock lock(mu_);
    if (!records_.empty()) {
        return Result<void>::failure(Err::BadRequest, "registry not empty");
    }
    std::size_t lineno = 0;
    for (const auto& raw : lines) {
        ++lineno;
        Timestamp ts = 0;
        std::string canonical;
        auto req = parse_log_line(raw, ts, canonical);
        if (!req) {
            return Result<void>::failure(
                Err::CorruptLog,
                "line " + std::to_string(lineno) + ": " + req.error().detail);
        }
        auto applied = apply_locked(req.value(), ts, true, &raw);
        if (!applied) {
            return Result<void>::failure(Err::CorruptLog,
                                         "line " + std::to_string(lineno) + ": " +
                                             applied.error().to_string());
        }
    }
    return {};
}

namespace {

std::string hex_or_dash(const std::string& s) {
    return s.empty() ? "-" : to_hex_lower(to_bytes(s));
}

Result<std::string> unhex_or_empty(const std::string& s) {
    if (s == "-") return std::string{};
    auto b = from_hex(s, true);
    if (!b) return Result<std::string>::failure(Err::CorruptSnapshot, "bad hex field");
    return std::string(b->begin(), b->end());
}

}  // namespace

std::string Registry::snapshot_body_locked() const {
    std::ostringstream out;
    out << "ONHS-SNAPSHOT v1\n";
    for (const auto& [key, rec] : records_) {
        out << "R|" << key << '|' << record_state_name(rec.state) << '|'
            << (rec.transfer_target ? format_handle(*rec.transfer_target) : "-") << '|'
            << hex_or_dash(rec.transfer_proof) << '|';
        if (rec.handle.auth_type == AuthType::PublicKey) {
            out << "key=" << to_hex_lower(rec.owner_pub);
        } else {
            out << "pw=" << (rec.password ? rec.password->encode() : "-");
        }
        out << '|' << rec.seq << '|' << rec.created_at << '|' << rec.updated_at << '|';
        if (rec.delegation) {
            out << format_handle(rec.delegation->target) << ':' << rec.delegation->expiry
                << ':' << hex_or_dash(rec.delegation->proof_line);
        } else {
            out << '-';
        }
        out << '\n';
        for (const auto& [path, b] : rec.bindings) {
            out << "B|" << key << '|' << path << '|' << b.address.text() << '|'
                << b.ttl_seconds << '|' << b.expiry << '|' << hex_or_dash(b.proof_line)
                << '\n';
        }
    }
    return out.str();
}

std::string Registry::snapshot() const {
    std::shared_lock lock(mu_);
    std::string body = snapshot_body_locked();
    return body + "H|sha256=" + sha256_hex_lower(to_bytes(body)) + "\n";
}

std::string Registry::state_hash() const {
    std::shared_lock lock(mu_);
    return sha256_hex_lower(to_bytes(snapshot_body_locked()));
}

Result<void> Registry::load_snapshot_text(std::string_view text) {
    auto fail = [](std::string detail) {
        return Result<void>::failure(Err::CorruptSnapshot, std::move(detail));
    };
    std::unique_lock lock(mu_);
    if (!records_.empty()) {
        return Result<void>::failure(Err::BadRequest, "registry not empty");
    }

    std::size_t hash_pos = text.rfind("H|sha256=");
    if (hash_pos == std::string_view::npos) return fail("missing hash line");
    std::string_view body = text.substr(0, hash_pos);
    std::string_view hash_line = text.substr(hash_pos);
    if (!hash_line.ends_with("\n")) return fail("unterminated hash line");
    std::string_view stored = hash_line.substr(9, hash_line.size() - 10);
    if (sha256_hex_lower(Bytes(body.begin(), body.end())) != stored) {
        return fail("state hash mismatch");
    }

    std::istringstream in{std::string(body)};
    std::string line;
    if (!std::getline(in, line) || line != "ONHS-SNAPSHOT v1") return fail("bad header");

    HandleRecord* current = nullptr;
    while (std::getline(in, line)) {
        auto parts = split_pipes(line);
        if (parts.empty()) return fail("empty line");
        if (parts[0] == "R") {
            if (parts.size() != 10) return fail("bad record line");
            auto h = parse_canonical_handle(parts[1]);
            if (!h) return fail("bad handle");
            HandleRecord rec;
            rec.handle = h.value();
            bool state_ok = false;
            for (RecordState s : {RecordState::Active, RecordState::Cancelled,
                                  RecordState::Transferred, RecordState::Compromised}) {
                if (record_state_name(s) == parts[2]) {
                    rec.state = s;
                    state_ok = true;
                }
            }
            if (!state_ok) return fail("bad state");
            if (parts[3] != "-") {
                auto t = parse_canonical_handle(parts[3]);
                if (!t) return fail("bad transfer target");
                rec.transfer_target = t.value();
            }
            auto tproof = unhex_or_empty(parts[4]);
            if (!tproof) return tproof.error();
            rec.transfer_proof = tproof.value();
            if (parts[5].starts_with("key=")) {
                auto key = from_hex(std::string_view(parts[5]).substr(4), true);
                if (!key) return fail("bad owner key");
                rec.owner_pub = std::move(*key);
            } else if (parts[5].starts_with("pw=")) {
                auto v = PasswordVerifier::decode(std::string_view(parts[5]).substr(3));
                if (!v) return fail("bad verifier");
                rec.password = std::move(v).take();
            } else {
                return fail("bad auth column");
            }
            auto seq = parse_decimal(parts[6]);
            auto created = parse_decimal(parts[7]);
            auto updated = parse_decimal(parts[8]);
            if (!seq || !created || !updated) return fail("bad counters");
            rec.seq = *seq;
            rec.created_at = static_cast<Timestamp>(*created);
            rec.updated_at = static_cast<Timestamp>(*updated);
            if (parts[9] != "-") {
                std::size_t c1 = parts[9].find(':');
                std::size_t c2 = parts[9].find(':', c1 + 1);
                if (c1 == std::string::npos || c2 == std::string::npos) {
                    return fail("bad delegation column");
                }
                auto t = parse_canonical_handle(std::string_view(parts[9]).substr(0, c1));
                auto expiry = parse_decimal(
                    std::string_view(parts[9]).substr(c1 + 1, c2 - c1 - 1));
                auto proof = unhex_or_empty(parts[9].substr(c2 + 1));
                if (!t || !expiry || !proof) return fail("bad delegation column");
                rec.delegation =
                    Delegation{t.value(), static_cast<Timestamp>(*expiry), proof.value()};
            }
            auto [it, inserted] = records_.emplace(format_handle(rec.handle), rec);
            if (!inserted) return fail("duplicate record");
            current = &it->second;
        } else if (parts[0] == "B") {
            if (parts.size() != 7 || current == nullptr ||
                format_handle(current->handle) != parts[1]) {
                return fail("orphan binding line");
            }
            Binding b;
            if (parts[2] != "-" && !parse_label_path(parts[2])) return fail("bad label path");
            b.label_path = parts[2];
            auto addr = Address::parse(parts[3]);
            if (!addr) return fail("bad address");
            b.address = std::move(addr).take();
            auto ttl = parse_decimal(parts[4]);
            auto expiry = parse_decimal(parts[5]);
            auto proof = unhex_or_empty(parts[6]);
            if (!ttl || !expiry || !proof) return fail("bad binding fields");
            b.ttl_seconds = static_cast<std::int64_t>(*ttl);
            b.expiry = static_cast<Timestamp>(*expiry);
            b.proof_line = proof.value();
            current->bindings[b.label_path] = std::move(b);
        } else {
            return fail("unknown line kind");
        }
    }
    return {};
}

}  // namespace onhs
