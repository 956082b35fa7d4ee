#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "hostguard/net.hpp"
#include "hostguard/rules.hpp"
#include "hostguard/util.hpp"

namespace hostguard::sigupdate {

// Signature distribution. Line protocol over TCP:
//   client: HGSIG1 CHECK <v>
//   server: HGSIG1 CURRENT <m>
//           and, when m > v:  BEGIN <m> <nbytes> <sha256hex>
//                             <nbytes raw ruleset bytes>
//                             \nEND
// Bundles live in the served directory as rules.v<N>.txt.

struct SignatureBundle {
    std::uint64_t version = 0;
    std::string bytes;           // raw ruleset file content
    std::string digest_hex;      // lowercase SHA-256 of bytes
    rules::RuleSet ruleset;      // parsed from bytes, version set
};

std::optional<std::uint64_t> version_from_filename(std::string_view name);
std::string bundle_filename(std::uint64_t version);

SignatureBundle make_bundle(std::uint64_t version, std::string bytes);   // throws on parse failure

// All bundles under one directory, validated at load.
class SignatureDir {
public:
    explicit SignatureDir(std::filesystem::path dir);   // throws listing any invalid bundle file

    std::uint64_t current_version() const;              // 0 when empty
    const SignatureBundle* latest() const;

private:
    std::map<std::uint64_t, SignatureBundle> bundles_;
};

std::string format_check(std::uint64_t version);
std::string build_reply(std::uint64_t client_version, const SignatureDir& dir);

struct FetchOutcome {
    enum class Status { UpToDate, Updated, Error };
    Status status = Status::UpToDate;
    std::optional<SignatureBundle> bundle;   // set iff Updated
    std::string detail;                      // set iff Error
};

// Byte source abstraction so the protocol is testable without sockets.
class LineSource {
public:
    virtual ~LineSource() = default;
    virtual std::optional<std::string> read_line() = 0;
    virtual std::optional<std::string> read_exact(std::size_t n) = 0;
};

class StringSource final : public LineSource {
public:
    explicit StringSource(std::string data) : data_(std::move(data)) {}
    std::optional<std::string> read_line() override;
    std::optional<std::string> read_exact(std::size_t n) override;

private:
    std::string data_;
    std::size_t pos_ = 0;
};

// Parses the server's reply stream, verifying length, digest, and that the
// bytes form a valid ruleset. Any failure keeps the caller's rules untouched.
FetchOutcome parse_fetch_response(LineSource& src, std::uint64_t current_version);

FetchOutcome check_and_fetch(const Endpoint& server, std::uint64_t current_version,
                             int timeout_ms = 3000);

// Administration server: answers CHECK requests with the newest bundle.
class SigServer {
public:
    SigServer(const std::filesystem::path& dir, const Endpoint& listen);

    std::uint16_t port() const { return listener_.port(); }
    std::uint64_t current_version() const { return bundles_.current_version(); }

    // Accept loop; returns once *stop becomes true.
    void run(const std::atomic<bool>& stop);
    // Serves exactly one connection if one arrives within the timeout.
    bool serve_one(int timeout_ms);

private:
    void handle(net::TcpConn conn);

    SignatureDir bundles_;
    net::TcpListener listener_;
};

} // namespace hostguard::sigupdate
