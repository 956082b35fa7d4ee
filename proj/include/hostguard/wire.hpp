#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hostguard::wire {

inline constexpr std::size_t kMaxDatagramBytes = 1400;

enum class EventKindCode { ICV, ISV, ICA, ISA };

const char* to_string(EventKindCode k);
std::optional<EventKindCode> event_kind_from_string(std::string_view s);
bool kind_quarantines(EventKindCode k);

// One detection event as shipped agent -> collector.
struct EventRecord {
    std::uint64_t seqno = 0;            // per-agent, strictly increasing
    std::string host_id;
    std::int64_t ts_ms = 0;
    std::string conn_id;
    std::string src;                    // attacker ip:port (sender of matched data)
    std::string dst;                    // victim ip:port
    std::optional<std::string> real_src;
    std::string app_name;
    std::string app_version;
    std::uint32_t sid = 0;
    std::uint32_t rev = 0;
    std::string msg;
    int severity = 3;
    EventKindCode kind = EventKindCode::ICV;
    bool quarantine = false;
    std::string action;                 // "alert" | "drop"
    std::uint64_t match_offset = 0;
    bool truncated = false;             // msg was cut to fit the datagram cap

    bool operator==(const EventRecord&) const = default;
};

// Deterministic text datagram, one key=value per line after the magic.
// Values are percent-escaped so lines and the collector's '|'-joined store
// rows stay unambiguous. At most kMaxDatagramBytes; over-long msg values are
// truncated and flagged with a trailing trunc=1.
std::string encode_event(const EventRecord& ev);

struct DecodeResult {
    std::optional<EventRecord> record;
    std::string error;                  // set when record is empty
};

DecodeResult decode_event(std::string_view datagram);

std::string escape_value(std::string_view raw);
std::optional<std::string> unescape_value(std::string_view escaped);

// Splits a journal (datagrams appended back to back) into datagrams.
std::vector<std::string> split_journal(std::string_view journal);

} // namespace hostguard::wire
