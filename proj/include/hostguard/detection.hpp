#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hostguard/matcher.hpp"
#include "hostguard/reassembly.hpp"
#include "hostguard/rules.hpp"
#include "hostguard/util.hpp"
#include "hostguard/wire.hpp"

namespace hostguard::detection {

using rules::ConnDirection;
using rules::RuleClass;

enum class DataDirection { In, Out };

const char* to_string(DataDirection d);

// The four event classifications. A connection's direction plus the side that
// sent the matched data determine which one applies; the two "attacking"
// kinds mark an inside application as the attacker and trigger quarantine.
enum class EventKind {
    InsideClientVictimized,
    InsideServerVictimized,
    InsideClientAttacking,
    InsideServerAttacking,
};

const char* to_string(EventKind k);
bool quarantines(EventKind k);
wire::EventKindCode kind_code(EventKind k);

// Total on the four consistent combinations; anything else is a contract
// violation (the per-direction binding never produces one).
EventKind derive_event_kind(ConnDirection conn_dir, DataDirection data_dir, RuleClass cls);

struct ConnectionContext {
    std::string conn_id;
    std::int64_t opened_ts = 0;
    Endpoint local;
    Endpoint remote;
    ConnDirection direction = ConnDirection::Outbound;
    std::string app_name;
    std::string app_version;
};

struct DetectionEvent {
    std::int64_t ts_ms = 0;
    std::string host_id;
    std::string conn_id;
    std::string src;                     // attacker = sender of the matched data
    std::string dst;                     // victim = receiver
    std::optional<std::string> real_src;
    std::uint32_t sid = 0;
    std::uint32_t rev = 0;
    std::string msg;
    int severity = 3;
    std::string app_name;
    std::string app_version;
    EventKind kind = EventKind::InsideClientVictimized;
    bool quarantine = false;
    rules::RuleAction action_taken = rules::RuleAction::Alert;
    std::uint64_t match_offset = 0;
};

// Scans an HTTP request head (up to the first blank line, 8 KiB cap) for an
// X-Forwarded-For header and returns the first address of its list.
std::optional<std::string> extract_xff(std::string_view stream_prefix);

struct EngineConfig {
    std::string host_id;
    reassembly::OverlapPolicy overlap_policy = reassembly::OverlapPolicy::FirstWins;
    bool drop_enabled = false;           // when false, drop rules only alert
    std::size_t reassembly_cap = 256 * 1024;
};

struct DataResult {
    std::vector<DetectionEvent> events;
    bool overflow = false;               // segment rejected; caller may force_gap
};

// Per-connection detection: reassembles both data directions, feeds the shared
// matcher incrementally, and classifies firings into the four event kinds.
class Engine {
public:
    Engine(EngineConfig cfg, std::shared_ptr<const rules::CompiledMatcher> matcher);

    // New matcher applies to connections opened afterwards; live connections
    // keep the matcher they started with.
    void set_matcher(std::shared_ptr<const rules::CompiledMatcher> matcher);
    const std::shared_ptr<const rules::CompiledMatcher>& matcher() const { return matcher_; }

    void open_connection(const ConnectionContext& ctx);
    DataResult on_data(const std::string& conn_id, DataDirection dir,
                       const reassembly::Segment& seg, std::int64_t ts_ms);
    std::vector<DetectionEvent> force_gap(const std::string& conn_id, DataDirection dir,
                                          std::int64_t ts_ms);
    std::vector<DetectionEvent> close_connection(const std::string& conn_id, std::int64_t ts_ms);

    bool is_open(const std::string& conn_id) const { return conns_.count(conn_id) > 0; }
    bool is_blocked(const std::string& conn_id) const;
    std::size_t open_connections() const { return conns_.size(); }
    std::vector<std::string> open_conn_ids() const;
    std::uint64_t suppressed_segments() const { return suppressed_segments_; }

private:
    struct DirState {
        reassembly::StreamBuffer buf;
        rules::MatchRun run;
        EventKind kind;
        Endpoint sender;
        Endpoint receiver;
    };
    struct ConnState {
        ConnectionContext ctx;
        std::shared_ptr<const rules::CompiledMatcher> matcher;
        bool blocked = false;
        std::optional<std::string> real_remote;
        std::string head_buf;            // inbound request head, for XFF
        bool head_done = false;
        DirState in;
        DirState out;
    };

    DirState make_dir_state(const ConnectionContext& ctx, DataDirection dir,
                            const std::shared_ptr<const rules::CompiledMatcher>& m) const;
    void scan_request_head(ConnState& cs, std::string_view released);
    std::vector<DetectionEvent> fires_to_events(ConnState& cs, DirState& ds,
                                                const std::vector<rules::Fire>& fires,
                                                std::int64_t ts_ms);

    EngineConfig cfg_;
    std::shared_ptr<const rules::CompiledMatcher> matcher_;
    std::map<std::string, ConnState> conns_;
    std::uint64_t suppressed_segments_ = 0;
};

} // namespace hostguard::detection
