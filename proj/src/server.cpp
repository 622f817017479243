#include "onhs/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace onhs::wire {
namespace {

bool send_all(int fd, std::string_view data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            return false;
        }
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

}  // namespace

Server::Server(Registry& registry, Rng& rng, std::function<Timestamp()> clock,
               Options options)
    : registry_(registry), rng_(rng), clock_(std::move(clock)), options_(std::move(options)) {}

Server::Server(Registry& registry, Rng& rng, std::function<Timestamp()> clock)
    : Server(registry, rng, std::move(clock), Options{}) {}

Server::~Server() { stop(); }

Result<void> Server::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) {
        return Result<void>::failure(Err::IoError, "socket: " + std::string(strerror(errno)));
    }
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(options_.port);
    if (::inet_pton(AF_INET, options_.bind_host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        return Result<void>::failure(Err::IoError, "bad bind address " + options_.bind_host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
        ::listen(listen_fd_, 64) < 0) {
        std::string why = strerror(errno);
        ::close(listen_fd_);
        listen_fd_ = -1;
        return Result<void>::failure(Err::IoError, "bind/listen: " + why);
    }

    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    return {};
}

// Joins connection threads that have signalled completion. Caller holds
// conn_mu_.
void Server::reap_finished_locked() {
    if (finished_.empty()) return;
    auto it = conn_threads_.begin();
    while (it != conn_threads_.end()) {
        if (finished_.contains(it->get_id())) {
            finished_.erase(it->get_id());
            it->join();
            it = conn_threads_.erase(it);
        } else {
            ++it;
        }
    }
}

void Server::accept_loop() {
    while (running_) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            break;  // listener closed
        }
        std::lock_guard lock(conn_mu_);
        if (!running_) {
            ::close(fd);
            break;
        }
        reap_finished_locked();
        conn_fds_.insert(fd);
        conn_threads_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void Server::serve_connection(int fd) {
    std::string buffer;
    char chunk[4096];
    bool open = true;
    while (open && running_) {
        ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));

        for (;;) {
            std::size_t nl = buffer.find('\n');
            if (nl == std::string::npos) {
                // Cap buffered request size; answer once and drop the peer.
                if (buffer.size() > kMaxRequestBytes) {
                    send_all(fd, "ERR BAD_REQUEST too-long\n");
                    open = false;
                }
                break;
            }
            std::string line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.size() > kMaxRequestBytes) {
                send_all(fd, "ERR BAD_REQUEST too-long\n");
                open = false;
                break;
            }
            std::string response = handle_request_line(registry_, rng_, line, clock_());
            if (!send_all(fd, response + "\n")) {
                open = false;
                break;
            }
        }
    }
    ::close(fd);
    std::lock_guard lock(conn_mu_);
    conn_fds_.erase(fd);
    finished_.insert(std::this_thread::get_id());
}

void Server::stop() {
    bool was_running = running_.exchange(false);
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    if (was_running) {
        std::lock_guard lock(conn_mu_);
        for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(conn_mu_);
        threads.swap(conn_threads_);
    }
    for (auto& t : threads) {
        if (t.joinable()) t.join();
    }
}

Client::~Client() { close(); }

Result<void> Client::connect(const std::string& host, std::uint16_t port) {
    close();
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) {
        return Result<void>::failure(Err::IoError, "socket: " + std::string(strerror(errno)));
    }
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        close();
        return Result<void>::failure(Err::IoError, "bad host " + host);
    }
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        std::string why = strerror(errno);
        close();
        return Result<void>::failure(Err::IoError, "connect: " + why);
    }
    return {};
}

void Client::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    buffer_.clear();
}

Result<std::string> Client::request(std::string_view line) {
    if (fd_ < 0) {
        return Result<std::string>::failure(Err::IoError, "not connected");
    }
    std::string out{line};
    out += '\n';
    if (!send_all(fd_, out)) {
        return Result<std::string>::failure(Err::IoError, "send failed");
    }
    char chunk[4096];
    for (;;) {
        std::size_t nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string reply = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!reply.empty() && reply.back() == '\r') reply.pop_back();
            return reply;
        }
        ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n <= 0) {
            return Result<std::string>::failure(Err::IoError, "connection closed");
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

}  // namespace onhs::wire
