#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hostguard/detection.hpp"
#include "hostguard/util.hpp"

namespace hostguard::agent {

// Socket-event trace: the deterministic capture format replayed by the agent.
// One event per line after the HGTRC1 magic:
//   OPEN  <conn_id> <ts_ms> tcp <local_ip:port> <remote_ip:port> <outbound|inbound> <app> <appver>
//   DATA  <conn_id> <ts_ms> <in|out> <offset|-> <hex_payload>
//   CLOSE <conn_id> <ts_ms>
// A '-' offset appends in order at the sender's write cursor.

struct TraceOpen {
    std::string conn_id;
    std::int64_t ts_ms = 0;
    Endpoint local;
    Endpoint remote;
    rules::ConnDirection direction = rules::ConnDirection::Outbound;
    std::string app_name;
    std::string app_version;
};

struct TraceData {
    std::string conn_id;
    std::int64_t ts_ms = 0;
    detection::DataDirection direction = detection::DataDirection::In;
    std::optional<std::uint64_t> offset;   // empty = in-order append
    std::string payload;                   // decoded bytes, non-empty
};

struct TraceClose {
    std::string conn_id;
    std::int64_t ts_ms = 0;
};

using TraceEvent = std::variant<TraceOpen, TraceData, TraceClose>;

std::int64_t trace_ts(const TraceEvent& ev);

struct TraceError : std::runtime_error {
    TraceError(std::string message, size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line(line) {}
    size_t line;
};

std::vector<TraceEvent> parse_trace(std::string_view text);
std::vector<TraceEvent> load_trace(const std::filesystem::path& path);

// Renders events back to the trace format (fixture tooling and tests).
std::string render_trace(const std::vector<TraceEvent>& events);

} // namespace hostguard::agent
