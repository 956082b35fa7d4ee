#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "hostguard/util.hpp"

namespace hostguard::net {

// Thin RAII wrappers over POSIX sockets; IPv4 only, which is all the trace
// and config formats carry.

class UdpSender {
public:
    explicit UdpSender(const Endpoint& dest);   // throws on socket/addr failure
    ~UdpSender();
    UdpSender(UdpSender&&) noexcept;
    UdpSender& operator=(UdpSender&&) noexcept;
    UdpSender(const UdpSender&) = delete;
    UdpSender& operator=(const UdpSender&) = delete;

    bool send(std::string_view datagram);       // false on send failure

private:
    int fd_ = -1;
    std::string dest_ip_;
    std::uint16_t dest_port_ = 0;
};

class UdpReceiver {
public:
    explicit UdpReceiver(const Endpoint& listen);   // throws on bind failure
    ~UdpReceiver();
    UdpReceiver(const UdpReceiver&) = delete;
    UdpReceiver& operator=(const UdpReceiver&) = delete;

    std::uint16_t port() const { return port_; }
    // Blocks up to timeout_ms; empty optional on timeout.
    std::optional<std::string> recv(int timeout_ms);

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

class TcpConn {
public:
    static std::optional<TcpConn> connect(const Endpoint& dest, int timeout_ms);
    explicit TcpConn(int fd) : fd_(fd) {}
    ~TcpConn();
    TcpConn(TcpConn&&) noexcept;
    TcpConn& operator=(TcpConn&&) noexcept;
    TcpConn(const TcpConn&) = delete;
    TcpConn& operator=(const TcpConn&) = delete;

    bool write_all(std::string_view data);
    // Reads until '\n' (consumed, not returned); empty optional on EOF/error.
    std::optional<std::string> read_line();
    // Reads exactly n bytes; empty optional on short read.
    std::optional<std::string> read_exact(std::size_t n);
    void set_recv_timeout(int timeout_ms);

private:
    bool fill_buffer();

    int fd_ = -1;
    std::string buf_;
};

class TcpListener {
public:
    explicit TcpListener(const Endpoint& listen);   // throws on bind failure
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::uint16_t port() const { return port_; }
    // Blocks up to timeout_ms; empty optional on timeout.
    std::optional<TcpConn> accept(int timeout_ms);

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

} // namespace hostguard::net
