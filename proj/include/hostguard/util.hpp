#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hostguard {

std::string trim(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);
std::vector<std::string> split_char(std::string_view s, char sep);

// ASCII-only case fold; non-alpha bytes pass through.
unsigned char fold_byte(unsigned char c);
std::string fold_ascii(std::string_view s);

std::string hex_encode(std::string_view bytes);                 // uppercase, no separators
std::optional<std::string> hex_decode(std::string_view hex);    // accepts either case

std::optional<std::uint64_t> parse_u64(std::string_view s);
std::optional<std::int64_t> parse_i64(std::string_view s);

// Dotted-quad IPv4, host byte order.
std::optional<std::uint32_t> parse_ipv4(std::string_view s);
std::string ipv4_to_string(std::uint32_t ip);

struct Cidr {
    std::uint32_t base = 0;
    int prefix = 0;

    bool contains(std::uint32_t ip) const;
    static std::optional<Cidr> parse(std::string_view s);   // "a.b.c.d/n" or bare address (/32)
    std::string to_string() const;
    bool operator==(const Cidr&) const = default;
};

// ip:port pair as it appears in traces and event records.
struct Endpoint {
    std::string ip;
    std::uint16_t port = 0;

    std::string to_string() const { return ip + ":" + std::to_string(port); }
    static std::optional<Endpoint> parse(std::string_view s);
    bool operator==(const Endpoint&) const = default;
};

} // namespace hostguard
