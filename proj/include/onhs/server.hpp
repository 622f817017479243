#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "onhs/registry.hpp"
#include "onhs/wire.hpp"

namespace onhs::wire {

// TCP front end for the wire protocol: one line in, one line out, many
// concurrent connections. Mutations funnel into the registry's internal
// linearization; resolves run concurrently.
class Server {
public:
    struct Options {
        std::string bind_host = "127.0.0.1";
        std::uint16_t port = 0;  // 0 picks an ephemeral port
    };

    Server(Registry& registry, Rng& rng, std::function<Timestamp()> clock,
           Options options);
    Server(Registry& registry, Rng& rng, std::function<Timestamp()> clock);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    Result<void> start();
    void stop();  // closes the listener and all connections, joins threads

    std::uint16_t port() const { return port_; }
    bool running() const { return running_.load(); }

private:
    void accept_loop();
    void serve_connection(int fd);
    void reap_finished_locked();

    Registry& registry_;
    Rng& rng_;
    std::function<Timestamp()> clock_;
    Options options_;

    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::mutex conn_mu_;
    std::set<int> conn_fds_;
    std::vector<std::thread> conn_threads_;
    std::set<std::thread::id> finished_;
};

// Blocking line-oriented client.
class Client {
public:
    Client() = default;
    ~Client();

    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    Result<void> connect(const std::string& host, std::uint16_t port);
    void close();

    // Sends one request line and reads one response line.
    Result<std::string> request(std::string_view line);

private:
    int fd_ = -1;
    std::string buffer_;
};

}  // namespace onhs::wire
