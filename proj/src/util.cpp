#include "hostguard/util.hpp"

#include <cctype>
#include <charconv>

namespace hostguard {

std::string trim(std::string_view s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string> split_char(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

unsigned char fold_byte(unsigned char c) {
    if (c >= 'A' && c <= 'Z') return static_cast<unsigned char>(c - 'A' + 'a');
    return c;
}

std::string fold_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(fold_byte(static_cast<unsigned char>(c)));
    return out;
}

static const char kHexDigits[] = "0123456789ABCDEF";

std::string hex_encode(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out.push_back(kHexDigits[c >> 4]);
        out.push_back(kHexDigits[c & 0xF]);
    }
    return out;
}

static int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::optional<std::string> hex_decode(std::string_view hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    std::string out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_nibble(hex[i]);
        int lo = hex_nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<char>((hi << 4) | lo));
    }
    return out;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::int64_t> parse_i64(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::uint32_t> parse_ipv4(std::string_view s) {
    auto parts = split_char(s, '.');
    if (parts.size() != 4) return std::nullopt;
    std::uint32_t ip = 0;
    for (const auto& p : parts) {
        if (p.empty() || p.size() > 3) return std::nullopt;
        auto v = parse_u64(p);
        if (!v || *v > 255) return std::nullopt;
        ip = (ip << 8) | static_cast<std::uint32_t>(*v);
    }
    return ip;
}

std::string ipv4_to_string(std::uint32_t ip) {
    return std::to_string((ip >> 24) & 0xFF) + "." + std::to_string((ip >> 16) & 0xFF) + "." +
           std::to_string((ip >> 8) & 0xFF) + "." + std::to_string(ip & 0xFF);
}

bool Cidr::contains(std::uint32_t ip) const {
    if (prefix == 0) return true;
    std::uint32_t mask = prefix >= 32 ? 0xFFFFFFFFu : ~(0xFFFFFFFFu >> prefix);
    return (ip & mask) == (base & mask);
}

std::optional<Cidr> Cidr::parse(std::string_view s) {
    std::string_view addr = s;
    int prefix = 32;
    if (auto slash = s.find('/'); slash != std::string_view::npos) {
        addr = s.substr(0, slash);
        auto p = parse_u64(s.substr(slash + 1));
        if (!p || *p > 32) return std::nullopt;
        prefix = static_cast<int>(*p);
    }
    auto ip = parse_ipv4(addr);
    if (!ip) return std::nullopt;
    return Cidr{*ip, prefix};
}

std::string Cidr::to_string() const {
    return ipv4_to_string(base) + "/" + std::to_string(prefix);
}

std::optional<Endpoint> Endpoint::parse(std::string_view s) {
    auto colon = s.rfind(':');
    if (colon == std::string_view::npos || colon == 0) return std::nullopt;
    auto port = parse_u64(s.substr(colon + 1));
    if (!port || *port > 65535) return std::nullopt;
    Endpoint ep;
    ep.ip = std::string(s.substr(0, colon));
    ep.port = static_cast<std::uint16_t>(*port);
    if (ep.ip.empty()) return std::nullopt;
    return ep;
}

} // namespace hostguard
