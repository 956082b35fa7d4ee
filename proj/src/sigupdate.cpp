#include "hostguard/sigupdate.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "hostguard/sha256.hpp"
#include "hostguard/version.hpp"

namespace hostguard::sigupdate {

std::optional<std::uint64_t> version_from_filename(std::string_view name) {
    constexpr std::string_view prefix = "rules.v";
    constexpr std::string_view suffix = ".txt";
    if (name.size() <= prefix.size() + suffix.size()) return std::nullopt;
    if (name.substr(0, prefix.size()) != prefix) return std::nullopt;
    if (name.substr(name.size() - suffix.size()) != suffix) return std::nullopt;
    return parse_u64(name.substr(prefix.size(), name.size() - prefix.size() - suffix.size()));
}

std::string bundle_filename(std::uint64_t version) {
    return "rules.v" + std::to_string(version) + ".txt";
}

SignatureBundle make_bundle(std::uint64_t version, std::string bytes) {
    SignatureBundle bundle;
    bundle.version = version;
    bundle.digest_hex = Sha256::hex(bytes);
    bundle.ruleset = rules::parse_ruleset(bytes, version);
    bundle.bytes = std::move(bytes);
    return bundle;
}

SignatureDir::SignatureDir(std::filesystem::path dir) {
    std::vector<std::string> failures;
    if (std::filesystem::exists(dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            auto version = version_from_filename(entry.path().filename().string());
            if (!version) continue;
            std::ifstream in(entry.path(), std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            try {
                bundles_.emplace(*version, make_bundle(*version, buf.str()));
            } catch (const std::exception& e) {
                failures.push_back(entry.path().filename().string() + ": " + e.what());
            }
        }
    }
    if (!failures.empty()) {
        std::string msg = "invalid signature bundle(s):";
        for (const auto& f : failures) msg += "\n  " + f;
        throw std::runtime_error(msg);
    }
}

std::uint64_t SignatureDir::current_version() const {
    return bundles_.empty() ? 0 : bundles_.rbegin()->first;
}

const SignatureBundle* SignatureDir::latest() const {
    return bundles_.empty() ? nullptr : &bundles_.rbegin()->second;
}

std::string format_check(std::uint64_t version) {
    return std::string(kSigMagic) + " CHECK " + std::to_string(version) + "\n";
}

std::string build_reply(std::uint64_t client_version, const SignatureDir& dir) {
    std::uint64_t current = dir.current_version();
    std::string reply = std::string(kSigMagic) + " CURRENT " + std::to_string(current) + "\n";
    if (current > client_version) {
        const SignatureBundle* bundle = dir.latest();
        reply += "BEGIN " + std::to_string(bundle->version) + " " +
                 std::to_string(bundle->bytes.size()) + " " + bundle->digest_hex + "\n";
        reply += bundle->bytes;
        reply += "\nEND\n";
    }
    return reply;
}

std::optional<std::string> StringSource::read_line() {
    if (pos_ >= data_.size()) return std::nullopt;
    auto nl = data_.find('\n', pos_);
    if (nl == std::string::npos) return std::nullopt;
    std::string line = data_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return line;
}

std::optional<std::string> StringSource::read_exact(std::size_t n) {
    if (pos_ + n > data_.size()) return std::nullopt;
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
}

FetchOutcome parse_fetch_response(LineSource& src, std::uint64_t current_version) {
    auto error = [](std::string detail) {
        return FetchOutcome{FetchOutcome::Status::Error, std::nullopt, std::move(detail)};
    };

    auto current_line = src.read_line();
    if (!current_line) return error("connection closed before CURRENT");
    auto tok = split_ws(*current_line);
    if (tok.size() != 3 || tok[0] != kSigMagic || tok[1] != "CURRENT") {
        return error("malformed CURRENT line: " + *current_line);
    }
    auto server_version = parse_u64(tok[2]);
    if (!server_version) return error("bad CURRENT version: " + tok[2]);
    if (*server_version <= current_version) {
        return FetchOutcome{FetchOutcome::Status::UpToDate, std::nullopt, {}};
    }

    auto begin_line = src.read_line();
    if (!begin_line) return error("truncated stream before BEGIN");
    auto btok = split_ws(*begin_line);
    if (btok.size() != 4 || btok[0] != "BEGIN") {
        return error("malformed BEGIN line: " + *begin_line);
    }
    auto begin_version = parse_u64(btok[1]);
    auto nbytes = parse_u64(btok[2]);
    if (!begin_version || *begin_version != *server_version) {
        return error("BEGIN version disagrees with CURRENT");
    }
    if (!nbytes) return error("bad BEGIN length: " + btok[2]);
    const std::string& digest_hex = btok[3];
    if (digest_hex.size() != 64) return error("bad digest length");

    auto bytes = src.read_exact(static_cast<std::size_t>(*nbytes));
    if (!bytes) return error("truncated bundle body");
    auto trailer = src.read_exact(5);
    if (!trailer || *trailer != "\nEND\n") return error("missing END trailer");

    if (Sha256::hex(*bytes) != digest_hex) {
        return error("digest mismatch");
    }
    try {
        SignatureBundle bundle = make_bundle(*server_version, std::move(*bytes));
        return FetchOutcome{FetchOutcome::Status::Updated, std::move(bundle), {}};
    } catch (const std::exception& e) {
        return error(std::string("bundle does not parse: ") + e.what());
    }
}

namespace {

class TcpSource final : public LineSource {
public:
    explicit TcpSource(net::TcpConn& conn) : conn_(conn) {}
    std::optional<std::string> read_line() override { return conn_.read_line(); }
    std::optional<std::string> read_exact(std::size_t n) override { return conn_.read_exact(n); }

private:
    net::TcpConn& conn_;
};

} // namespace

FetchOutcome check_and_fetch(const Endpoint& server, std::uint64_t current_version,
                             int timeout_ms) {
    auto conn = net::TcpConn::connect(server, timeout_ms);
    if (!conn) {
        return FetchOutcome{FetchOutcome::Status::Error, std::nullopt,
                            "cannot connect to " + server.to_string()};
    }
    conn->set_recv_timeout(timeout_ms);
    if (!conn->write_all(format_check(current_version))) {
        return FetchOutcome{FetchOutcome::Status::Error, std::nullopt, "write failed"};
    }
    TcpSource src(*conn);
    return parse_fetch_response(src, current_version);
}

SigServer::SigServer(const std::filesystem::path& dir, const Endpoint& listen)
    : bundles_(dir), listener_(listen) {}

void SigServer::handle(net::TcpConn conn) {
    conn.set_recv_timeout(2000);
    auto request = conn.read_line();
    if (!request) return;
    auto tok = split_ws(*request);
    if (tok.size() != 3 || tok[0] != kSigMagic || tok[1] != "CHECK") return;
    auto version = parse_u64(tok[2]);
    if (!version) return;
    conn.write_all(build_reply(*version, bundles_));
}

bool SigServer::serve_one(int timeout_ms) {
    auto conn = listener_.accept(timeout_ms);
    if (!conn) return false;
    handle(std::move(*conn));
    return true;
}

void SigServer::run(const std::atomic<bool>& stop) {
    while (!stop.load(std::memory_order_relaxed)) {
        serve_one(100);
    }
}

} // namespace hostguard::sigupdate
