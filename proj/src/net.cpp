#include "hostguard/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <stdexcept>

namespace hostguard::net {

namespace {

sockaddr_in make_addr(const std::string& ip, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, ip.c_str(), &addr.sin_addr) != 1) {
        throw std::runtime_error("bad IPv4 address: " + ip);
    }
    return addr;
}

bool wait_readable(int fd, int timeout_ms) {
    pollfd pfd{fd, POLLIN, 0};
    return ::poll(&pfd, 1, timeout_ms) > 0 && (pfd.revents & POLLIN);
}

} // namespace

UdpSender::UdpSender(const Endpoint& dest) : dest_ip_(dest.ip), dest_port_(dest.port) {
    make_addr(dest_ip_, dest_port_);   // validate early
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw std::runtime_error("socket() failed");
}

UdpSender::~UdpSender() {
    if (fd_ >= 0) ::close(fd_);
}

UdpSender::UdpSender(UdpSender&& other) noexcept
    : fd_(other.fd_), dest_ip_(std::move(other.dest_ip_)), dest_port_(other.dest_port_) {
    other.fd_ = -1;
}

UdpSender& UdpSender::operator=(UdpSender&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        dest_ip_ = std::move(other.dest_ip_);
        dest_port_ = other.dest_port_;
        other.fd_ = -1;
    }
    return *this;
}

bool UdpSender::send(std::string_view datagram) {
    sockaddr_in addr = make_addr(dest_ip_, dest_port_);
    ssize_t n = ::sendto(fd_, datagram.data(), datagram.size(), 0,
                         reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    return n == static_cast<ssize_t>(datagram.size());
}

UdpReceiver::UdpReceiver(const Endpoint& listen) {
    sockaddr_in addr = make_addr(listen.ip, listen.port);
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw std::runtime_error("bind failed on " + listen.to_string());
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
}

UdpReceiver::~UdpReceiver() {
    if (fd_ >= 0) ::close(fd_);
}

std::optional<std::string> UdpReceiver::recv(int timeout_ms) {
    if (!wait_readable(fd_, timeout_ms)) return std::nullopt;
    char buf[65536];
    ssize_t n = ::recvfrom(fd_, buf, sizeof(buf), 0, nullptr, nullptr);
    if (n < 0) return std::nullopt;
    return std::string(buf, static_cast<size_t>(n));
}

std::optional<TcpConn> TcpConn::connect(const Endpoint& dest, int timeout_ms) {
    sockaddr_in addr;
    try {
        addr = make_addr(dest.ip, dest.port);
    } catch (const std::runtime_error&) {
        return std::nullopt;
    }
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return std::nullopt;
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    if (rc != 0) {
        if (errno != EINPROGRESS) {
            ::close(fd);
            return std::nullopt;
        }
        pollfd pfd{fd, POLLOUT, 0};
        if (::poll(&pfd, 1, timeout_ms) <= 0) {
            ::close(fd);
            return std::nullopt;
        }
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            ::close(fd);
            return std::nullopt;
        }
    }
    ::fcntl(fd, F_SETFL, flags);   // back to blocking
    return TcpConn(fd);
}

TcpConn::~TcpConn() {
    if (fd_ >= 0) ::close(fd_);
}

TcpConn::TcpConn(TcpConn&& other) noexcept : fd_(other.fd_), buf_(std::move(other.buf_)) {
    other.fd_ = -1;
}

TcpConn& TcpConn::operator=(TcpConn&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        buf_ = std::move(other.buf_);
        other.fd_ = -1;
    }
    return *this;
}

bool TcpConn::write_all(std::string_view data) {
    size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) return false;
        sent += static_cast<size_t>(n);
    }
    return true;
}

void TcpConn::set_recv_timeout(int timeout_ms) {
    timeval tv{};
    tv.tv_sec = timeout_ms / 1000;
    tv.tv_usec = (timeout_ms % 1000) * 1000;
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

bool TcpConn::fill_buffer() {
    char chunk[4096];
    ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) return false;
    buf_.append(chunk, static_cast<size_t>(n));
    return true;
}

std::optional<std::string> TcpConn::read_line() {
    while (true) {
        auto nl = buf_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buf_.substr(0, nl);
            buf_.erase(0, nl + 1);
            return line;
        }
        if (!fill_buffer()) return std::nullopt;
    }
}

std::optional<std::string> TcpConn::read_exact(std::size_t n) {
    while (buf_.size() < n) {
        if (!fill_buffer()) return std::nullopt;
    }
    std::string out = buf_.substr(0, n);
    buf_.erase(0, n);
    return out;
}

TcpListener::TcpListener(const Endpoint& listen) {
    sockaddr_in addr = make_addr(listen.ip, listen.port);
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(fd_, 16) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw std::runtime_error("bind/listen failed on " + listen.to_string());
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::optional<TcpConn> TcpListener::accept(int timeout_ms) {
    if (!wait_readable(fd_, timeout_ms)) return std::nullopt;
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) return std::nullopt;
    return TcpConn(fd);
}

} // namespace hostguard::net
