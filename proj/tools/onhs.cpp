// onhs: registry server, client, and reference-model simulator in one tool.
//
// Secrets never travel on argv: signing keys come from --key / the
// ONHS_SECRET_KEY_FILE environment variable (a file path), passwords from
// --password-file or the ONHS_PASSWORD environment variable.

#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "onhs/refmodel.hpp"
#include "onhs/server.hpp"
#include "onhs/wire.hpp"
#include "onhs/zone.hpp"

using namespace onhs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitOperation = 2;

volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }

int fail(const std::string& message) {
    std::cerr << message << "\n";
    return kExitOperation;
}

int fail(const Error& e) { return fail(e.to_string()); }

Timestamp now_or(std::int64_t override_now) {
    return override_now >= 0 ? override_now : static_cast<Timestamp>(std::time(nullptr));
}

bool parse_host_port(const std::string& text, std::string& host, std::uint16_t& port) {
    std::size_t colon = text.rfind(':');
    if (colon == std::string::npos) return false;
    host = text.substr(0, colon);
    auto p = parse_decimal(text.substr(colon + 1));
    if (!p || *p > 65535) return false;
    port = static_cast<std::uint16_t>(*p);
    return !host.empty();
}

Result<std::string> read_password(const std::string& password_file) {
    if (!password_file.empty()) {
        std::ifstream in(password_file);
        std::string line;
        if (!in || !std::getline(in, line) || line.empty()) {
            return Result<std::string>::failure(Err::IoError,
                                                "cannot read password from " +
                                                    password_file);
        }
        return line;
    }
    if (const char* env = std::getenv("ONHS_PASSWORD"); env && *env) {
        return std::string(env);
    }
    return Result<std::string>::failure(
        Err::BadRequest, "no password: use --password-file or ONHS_PASSWORD");
}

Result<KeyPair> read_key(const std::string& key_file) {
    std::string path = key_file;
    if (path.empty()) {
        if (const char* env = std::getenv("ONHS_SECRET_KEY_FILE"); env && *env) {
            path = env;
        }
    }
    if (path.empty()) {
        return Result<KeyPair>::failure(
            Err::BadRequest, "no signing key: use --key or ONHS_SECRET_KEY_FILE");
    }
    return load_secret_key(path);
}

// Loads a registry for offline operation from a snapshot or a log file.
Result<void> load_offline(Registry& reg, const std::string& snapshot_path,
                          const std::string& log_path) {
    if (!snapshot_path.empty()) {
        std::ifstream in(snapshot_path);
        if (!in) return Result<void>::failure(Err::IoError, "cannot read " + snapshot_path);
        std::ostringstream text;
        text << in.rdbuf();
        return reg.load_snapshot_text(text.str());
    }
    std::ifstream in(log_path);
    if (!in) return Result<void>::failure(Err::IoError, "cannot read " + log_path);
    return reg.load_log(in);
}

int send_request(const std::string& server, const std::string& line,
                 std::string& response) {
    std::string host;
    std::uint16_t port = 0;
    if (!parse_host_port(server, host, port)) {
        return fail("bad --server value, want host:port");
    }
    wire::Client client;
    if (auto c = client.connect(host, port); !c) return fail(c.error());
    auto r = client.request(line);
    if (!r) return fail(r.error());
    response = std::move(r).take();
    return kExitOk;
}

// Sends a mutation request and prints the outcome.
int run_mutation(const std::string& server, const std::string& line) {
    std::string response;
    if (int rc = send_request(server, line, response); rc != kExitOk) return rc;
    if (!response.starts_with("OK ")) return fail(response);
    std::cout << response << "\n";
    return kExitOk;
}

struct AuthOptions {
    std::string key_file;
    std::string password_file;
};

// Builds the wire request for a prepared update, signing or attaching the
// password as the handle type demands.
Result<std::string> build_authed(const UpdateRequest& req, const AuthOptions& auth) {
    if (req.handle.auth_type == AuthType::PublicKey) {
        auto kp = read_key(auth.key_file);
        if (!kp) return kp.error();
        return wire::build_signed_request(req, kp.value());
    }
    auto password = read_password(auth.password_file);
    if (!password) return password.error();
    return wire::build_password_request(req, password.value());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"open network handle system registry, resolver, and simulator"};
    app.require_subcommand(1);

    // ---- keygen
    auto* keygen = app.add_subcommand("keygen", "generate a key pair");
    std::uint32_t kg_alg = kAlgRsaSha1;
    int kg_bits = 2048;
    std::string kg_out, kg_pub, kg_seed;
    keygen->add_option("--alg", kg_alg, "signature algorithm code (5 or 8)");
    keygen->add_option("--bits", kg_bits, "modulus size in bits");
    keygen->add_option("--out", kg_out, "secret key output path")->required();
    keygen->add_option("--pub", kg_pub, "public key output path")->required();
    keygen->add_option("--seed", kg_seed,
                       "deterministic seed (test use only; keys become predictable)");

    // ---- derive
    auto* derive = app.add_subcommand("derive", "derive the handle of a public key");
    std::string dv_pub;
    std::size_t dv_len = 16;
    derive->add_option("--pub", dv_pub, "public key file")->required();
    derive->add_option("--len", dv_len, "digest length in hex digits (8..40)");

    // ---- shared client options
    std::string server = "127.0.0.1:7111";
    std::int64_t now_override = -1;
    AuthOptions auth;
    std::string handle_text, labels = "-";

    auto add_client_opts = [&](CLI::App* cmd, bool with_handle) {
        cmd->add_option("--server", server, "registry endpoint host:port");
        cmd->add_option("--now", now_override, "override the clock (epoch seconds)");
        if (with_handle) {
            cmd->add_option("--handle", handle_text, "handle token")->required();
        }
    };
    auto add_auth_opts = [&](CLI::App* cmd) {
        cmd->add_option("--key", auth.key_file,
                        "secret key file (or ONHS_SECRET_KEY_FILE)");
        cmd->add_option("--password-file", auth.password_file,
                        "password file (or ONHS_PASSWORD)");
    };

    // ---- create
    auto* create = app.add_subcommand("create", "register a handle");
    bool cr_sponsored = false;
    std::size_t cr_len = 16;
    create->add_option("--server", server, "registry endpoint host:port");
    create->add_flag("--sponsored", cr_sponsored,
                     "ask the sponsor for a password-authenticated handle");
    create->add_option("--len", cr_len, "digest length for self-assigned handles");
    add_auth_opts(create);

    // ---- assign
    auto* assign = app.add_subcommand("assign", "bind an address below a handle");
    std::uint64_t seq = 0;
    std::string as_address;
    std::int64_t as_ttl = 3600, expiry = -1, expires_in = -1;
    add_client_opts(assign, true);
    add_auth_opts(assign);
    assign->add_option("--seq", seq, "sequence number")->required();
    assign->add_option("--labels", labels, "label path (default: the handle itself)");
    assign->add_option("--address", as_address, "address: dotted quad, udp:..., url:...")
        ->required();
    assign->add_option("--ttl", as_ttl, "cache ttl seconds");
    assign->add_option("--expiry", expiry, "absolute expiry (epoch seconds)");
    assign->add_option("--expires-in", expires_in, "expiry relative to now (seconds)");

    // ---- delegate
    auto* delegate = app.add_subcommand("delegate", "delegate a handle temporarily");
    std::string target_text;
    add_client_opts(delegate, true);
    add_auth_opts(delegate);
    delegate->add_option("--seq", seq, "sequence number")->required();
    delegate->add_option("--target", target_text, "target handle")->required();
    delegate->add_option("--expiry", expiry, "absolute expiry (epoch seconds)");
    delegate->add_option("--expires-in", expires_in, "expiry relative to now (seconds)");

    // ---- cancel / transfer / compromise
    auto* cancel = app.add_subcommand("cancel", "cancel a handle irrevocably");
    add_client_opts(cancel, true);
    add_auth_opts(cancel);
    cancel->add_option("--seq", seq, "sequence number")->required();

    auto* transfer = app.add_subcommand("transfer", "transfer a handle irrevocably");
    add_client_opts(transfer, true);
    add_auth_opts(transfer);
    transfer->add_option("--seq", seq, "sequence number")->required();
    transfer->add_option("--target", target_text, "successor handle")->required();

    auto* compromise =
        app.add_subcommand("compromise", "mark a handle's key as compromised");
    add_client_opts(compromise, true);
    add_auth_opts(compromise);
    compromise->add_option("--seq", seq, "sequence number")->required();

    // ---- resolve
    auto* resolve_cmd = app.add_subcommand("resolve", "resolve a handle to an address");
    bool rs_unsafe = false, rs_strict = false;
    std::string rs_snapshot, rs_log, rs_root;
    add_client_opts(resolve_cmd, true);
    auto* rs_labels_opt = resolve_cmd->add_option("--labels", labels, "label path");
    resolve_cmd->add_option("--root", rs_root,
                            "handle domain; lets --handle be a full name under it");
    resolve_cmd->add_flag("--unsafe", rs_unsafe,
                          "return the last binding of a compromised handle");
    resolve_cmd->add_flag("--strict", rs_strict,
                          "fail unless the answer verifies end to end");
    resolve_cmd->add_option("--snapshot", rs_snapshot, "resolve offline from a snapshot");
    resolve_cmd->add_option("--log", rs_log, "resolve offline from an update log");

    // ---- verify
    auto* verify_cmd =
        app.add_subcommand("verify", "verify a stored RESOLVE response line");
    std::string vf_response = "-";
    bool vf_strict = false;
    verify_cmd->add_option("--handle", handle_text, "handle the response answers")
        ->required();
    verify_cmd->add_option("--labels", labels, "label path the response answers");
    verify_cmd->add_option("--response-file", vf_response,
                           "file with the response line, - for stdin");
    verify_cmd->add_flag("--strict", vf_strict, "verify every hop proof");
    verify_cmd->add_option("--now", now_override, "override the clock (epoch seconds)");

    // ---- export-zone
    auto* export_cmd = app.add_subcommand("export-zone", "emit the DNS master file");
    std::string ez_origin, ez_snapshot, ez_log;
    export_cmd->add_option("--root", ez_origin, "handle domain the zone serves")
        ->required();
    export_cmd->add_option("--server", server, "registry endpoint host:port");
    export_cmd->add_option("--snapshot", ez_snapshot, "export offline from a snapshot");
    export_cmd->add_option("--log", ez_log, "export offline from an update log");
    export_cmd->add_option("--now", now_override, "override the clock (epoch seconds)");

    // ---- serve
    auto* serve = app.add_subcommand("serve", "run the authoritative registry server");
    std::string sv_bind = "127.0.0.1:7111";
    std::string sv_log, sv_snapshot;
    std::uint32_t sv_iterations = 60000;
    serve->add_option("--bind", sv_bind, "bind address host:port");
    serve->add_option("--log", sv_log, "append-only update log path")->required();
    serve->add_option("--snapshot", sv_snapshot, "load state from a snapshot first");
    serve->add_option("--now", now_override, "freeze the clock (testing)");
    serve->add_option("--pbkdf2-iterations", sv_iterations,
                      "verifier cost for sponsored handles");

    // ---- simulate
    auto* simulate = app.add_subcommand("simulate", "run a reference-model scenario");
    std::string sim_script;
    simulate->add_option("script", sim_script, "scenario script path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (keygen->parsed()) {
        Result<KeyPair> kp = [&]() -> Result<KeyPair> {
            if (!kg_seed.empty()) {
                SeededRng rng(kg_seed);
                return generate_keypair(kg_alg, rng, kg_bits);
            }
            SystemRng rng;
            return generate_keypair(kg_alg, rng, kg_bits);
        }();
        if (!kp) return fail(kp.error());
        if (auto r = save_secret_key(kp.value(), kg_out); !r) return fail(r.error());
        if (auto r = save_public_key(kp.value(), kg_pub); !r) return fail(r.error());
        std::cout << format_handle(
                         derive_handle(kp.value().public_key, kg_alg, 16).value())
                  << "\n";
        return kExitOk;
    }

    if (derive->parsed()) {
        auto pub = load_public_key(dv_pub);
        if (!pub) return fail(pub.error());
        auto h = derive_handle(pub.value().second, pub.value().first, dv_len);
        if (!h) return fail(h.error());
        std::cout << format_handle(h.value()) << "\n";
        return kExitOk;
    }

    if (create->parsed()) {
        if (cr_sponsored) {
            auto password = read_password(auth.password_file);
            if (!password) return fail(password.error());
            return run_mutation(server, wire::build_create_sponsored(password.value()));
        }
        auto kp = read_key(auth.key_file);
        if (!kp) return fail(kp.error());
        auto h = derive_handle(kp.value().public_key, kp.value().alg_code, cr_len);
        if (!h) return fail(h.error());
        auto line = wire::build_create(h.value(), kp.value());
        if (!line) return fail(line.error());
        return run_mutation(server, line.value());
    }

    auto parse_handle_arg = [&](const std::string& text) {
        auto h = parse_handle(text);
        if (!h) {
            std::cerr << h.error().to_string() << "\n";
            std::exit(kExitOperation);
        }
        return h.value();
    };

    auto effective_expiry = [&]() -> Timestamp {
        if (expiry >= 0) return expiry;
        if (expires_in >= 0) return now_or(now_override) + expires_in;
        return now_or(now_override) + 86'400;  // one day default
    };

    if (assign->parsed()) {
        UpdateRequest req;
        req.op = OpCode::Assign;
        req.handle = parse_handle_arg(handle_text);
        req.seq = seq;
        req.label_path = labels;
        auto addr = Address::parse(as_address);
        if (!addr) return fail(addr.error());
        req.address = std::move(addr).take();
        req.ttl_seconds = as_ttl;
        req.expiry = effective_expiry();
        auto line = build_authed(req, auth);
        if (!line) return fail(line.error());
        return run_mutation(server, line.value());
    }

    if (delegate->parsed() || transfer->parsed()) {
        UpdateRequest req;
        req.op = delegate->parsed() ? OpCode::Delegate : OpCode::Transfer;
        req.handle = parse_handle_arg(handle_text);
        req.seq = seq;
        req.target = parse_handle_arg(target_text);
        if (delegate->parsed()) req.expiry = effective_expiry();
        auto line = build_authed(req, auth);
        if (!line) return fail(line.error());
        return run_mutation(server, line.value());
    }

    if (cancel->parsed() || compromise->parsed()) {
        UpdateRequest req;
        req.op = cancel->parsed() ? OpCode::Cancel : OpCode::Compromise;
        req.handle = parse_handle_arg(handle_text);
        req.seq = seq;
        auto line = build_authed(req, auth);
        if (!line) return fail(line.error());
        return run_mutation(server, line.value());
    }

    if (resolve_cmd->parsed()) {
        Handle h;
        if (!rs_root.empty() && handle_text.find('.') != std::string::npos) {
            // a full name under the handle domain carries its own labels
            auto fqdn = extract_fqdn(handle_text, rs_root);
            if (!fqdn) return fail(fqdn.error());
            h = fqdn.value().handle;
            if (rs_labels_opt->count() == 0) {
                labels = label_path_token(fqdn.value().labels);
            }
        } else {
            h = parse_handle_arg(handle_text);
        }
        Timestamp now = now_or(now_override);

        if (!rs_snapshot.empty() || !rs_log.empty()) {
            Registry reg;
            if (auto r = load_offline(reg, rs_snapshot, rs_log); !r) return fail(r.error());
            ResolveOptions opts;
            opts.unsafe = rs_unsafe;
            opts.strict = rs_strict;
            auto result = resolve(reg, h, labels, now, opts);
            if (!result) return fail(result.error());
            const auto& v = result.value();
            std::cout << v.address.text() << " ttl=" << v.ttl_seconds
                      << " chain=" << v.chain.size() << " verified=" << (v.verified ? 1 : 0)
                      << (v.compromised ? " compromised=1" : "") << "\n";
            if (rs_strict && !v.verified) return fail("verification failed");
            return kExitOk;
        }

        std::string response;
        if (int rc = send_request(server, wire::build_resolve(h, labels, rs_unsafe),
                                  response);
            rc != kExitOk) {
            return rc;
        }
        auto reply = wire::parse_resolve_reply(response);
        if (!reply) return fail(reply.error());
        auto checked = wire::check_reply(reply.value(), h, labels, now, rs_strict);
        if (!checked) return fail(checked.error());
        const auto& v = checked.value();
        std::cout << v.address.text() << " ttl=" << v.ttl_seconds
                  << " chain=" << v.chain.size() << " verified=" << (v.verified ? 1 : 0)
                  << (v.compromised ? " compromised=1" : "") << "\n";
        if (rs_strict && !v.verified) return fail("verification failed");
        return kExitOk;
    }

    if (verify_cmd->parsed()) {
        std::string line;
        if (vf_response == "-") {
            if (!std::getline(std::cin, line)) return fail("no response on stdin");
        } else {
            std::ifstream in(vf_response);
            if (!in || !std::getline(in, line)) {
                return fail("cannot read response from " + vf_response);
            }
        }
        Handle h = parse_handle_arg(handle_text);
        if (wire::reply_verifies(line, h, labels, now_or(now_override), vf_strict)) {
            std::cout << "verified\n";
            return kExitOk;
        }
        return fail("not verified");
    }

    if (export_cmd->parsed()) {
        Timestamp now = now_or(now_override);
        if (!ez_snapshot.empty() || !ez_log.empty()) {
            Registry reg;
            if (auto r = load_offline(reg, ez_snapshot, ez_log); !r) return fail(r.error());
            std::cout << export_zone(reg, ez_origin, now);
            return kExitOk;
        }
        std::string response;
        if (int rc = send_request(server, wire::build_export_zone(ez_origin), response);
            rc != kExitOk) {
            return rc;
        }
        auto zone = wire::parse_export_zone_reply(response);
        if (!zone) return fail(zone.error());
        std::cout << zone.value();
        return kExitOk;
    }

    if (serve->parsed()) {
        std::string host;
        std::uint16_t port = 0;
        if (!parse_host_port(sv_bind, host, port)) {
            return fail("bad --bind value, want host:port");
        }

        RegistryConfig cfg;
        cfg.pbkdf2_iterations = sv_iterations;
        Registry reg(cfg);
        if (!sv_snapshot.empty()) {
            if (auto r = load_offline(reg, sv_snapshot, ""); !r) return fail(r.error());
        } else {
            std::ifstream existing(sv_log);
            if (existing) {
                if (auto r = reg.load_log(existing); !r) return fail(r.error());
            }
        }

        std::ofstream log_out(sv_log, std::ios::app);
        if (!log_out) return fail("cannot open log " + sv_log);
        reg.set_log_sink([&log_out](const std::string& line) {
            log_out << line << "\n";
            log_out.flush();
        });

        SystemRng rng;
        wire::Server::Options options;
        options.bind_host = host;
        options.port = port;
        wire::Server srv(reg, rng,
                         [now_override] { return now_or(now_override); }, options);
        if (auto r = srv.start(); !r) return fail(r.error());
        std::cerr << "onhs: serving on " << host << ":" << srv.port() << " (" << reg.size()
                  << " handles)\n";

        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        while (!g_stop) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        srv.stop();
        log_out.flush();
        std::cerr << "onhs: shut down, log flushed\n";
        return kExitOk;
    }

    if (simulate->parsed()) {
        auto outcome = refmodel::run_scenario_file(sim_script);
        if (!outcome) return fail(outcome.error());
        for (const auto& line : outcome.value().log) std::cout << line << "\n";
        std::cout << outcome.value().assertions << " assertions, "
                  << outcome.value().failures << " failures\n";
        return outcome.value().passed() ? kExitOk : kExitOperation;
    }

    return kExitUsage;
}
