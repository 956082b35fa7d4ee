#include "hostguard/detection.hpp"

#include <stdexcept>

namespace hostguard::detection {

const char* to_string(DataDirection d) {
    return d == DataDirection::In ? "in" : "out";
}

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::InsideClientVictimized: return "inside-client-victimized";
        case EventKind::InsideServerVictimized: return "inside-server-victimized";
        case EventKind::InsideClientAttacking: return "inside-client-attacking";
        case EventKind::InsideServerAttacking: return "inside-server-attacking";
    }
    return "?";
}

bool quarantines(EventKind k) {
    return k == EventKind::InsideClientAttacking || k == EventKind::InsideServerAttacking;
}

wire::EventKindCode kind_code(EventKind k) {
    switch (k) {
        case EventKind::InsideClientVictimized: return wire::EventKindCode::ICV;
        case EventKind::InsideServerVictimized: return wire::EventKindCode::ISV;
        case EventKind::InsideClientAttacking: return wire::EventKindCode::ICA;
        case EventKind::InsideServerAttacking: return wire::EventKindCode::ISA;
    }
    return wire::EventKindCode::ICV;
}

EventKind derive_event_kind(ConnDirection conn_dir, DataDirection data_dir, RuleClass cls) {
    if (conn_dir == ConnDirection::Outbound && data_dir == DataDirection::In &&
        cls == RuleClass::WebClient) {
        return EventKind::InsideClientVictimized;
    }
    if (conn_dir == ConnDirection::Outbound && data_dir == DataDirection::Out &&
        cls == RuleClass::WebServer) {
        return EventKind::InsideClientAttacking;
    }
    if (conn_dir == ConnDirection::Inbound && data_dir == DataDirection::In &&
        cls == RuleClass::WebServer) {
        return EventKind::InsideServerVictimized;
    }
    if (conn_dir == ConnDirection::Inbound && data_dir == DataDirection::Out &&
        cls == RuleClass::WebClient) {
        return EventKind::InsideServerAttacking;
    }
    throw std::logic_error("inconsistent (direction, data direction, class) combination");
}

namespace {

constexpr std::size_t kHeadCap = 8192;

bool is_header_name_char(unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_';
}

// ASCII case-insensitive equality.
bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (fold_byte(static_cast<unsigned char>(a[i])) !=
            fold_byte(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

} // namespace

std::optional<std::string> extract_xff(std::string_view stream_prefix) {
    std::string_view head = stream_prefix.substr(0, std::min(stream_prefix.size(), kHeadCap));
    if (auto blank = head.find("\r\n\r\n"); blank != std::string_view::npos) {
        head = head.substr(0, blank);
    } else if (auto nl = head.find("\n\n"); nl != std::string_view::npos) {
        head = head.substr(0, nl);
    }

    auto lines = split_char(head, '\n');
    if (lines.empty()) return std::nullopt;
    for (auto& line : lines) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
    }

    // Request line: METHOD SP TARGET SP HTTP/x.y
    auto request = split_ws(lines[0]);
    if (request.size() != 3 || request[2].rfind("HTTP/", 0) != 0) return std::nullopt;
    for (unsigned char c : request[0]) {
        if (!std::isalpha(c)) return std::nullopt;
    }

    for (size_t i = 1; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        auto colon = line.find(':');
        if (colon == std::string::npos || colon == 0) continue;   // malformed line, skip
        std::string_view name = std::string_view(line).substr(0, colon);
        bool valid = true;
        for (unsigned char c : name) {
            if (!is_header_name_char(c)) {
                valid = false;
                break;
            }
        }
        if (!valid) continue;
        if (!iequals(name, "X-Forwarded-For")) continue;
        std::string_view value = std::string_view(line).substr(colon + 1);
        auto first = value.substr(0, value.find(','));
        std::string trimmed = trim(first);
        if (trimmed.empty()) return std::nullopt;
        return trimmed;   // first header wins
    }
    return std::nullopt;
}

Engine::Engine(EngineConfig cfg, std::shared_ptr<const rules::CompiledMatcher> matcher)
    : cfg_(std::move(cfg)), matcher_(std::move(matcher)) {
    if (!matcher_) throw std::invalid_argument("matcher must not be null");
}

void Engine::set_matcher(std::shared_ptr<const rules::CompiledMatcher> matcher) {
    if (!matcher) throw std::invalid_argument("matcher must not be null");
    matcher_ = std::move(matcher);
}

Engine::DirState Engine::make_dir_state(const ConnectionContext& ctx, DataDirection dir,
                                        const std::shared_ptr<const rules::CompiledMatcher>& m) const {
    // Sender/receiver of this data direction decide which rule class watches
    // it: web-client rules guard data whose receiver acts as the client,
    // web-server rules data whose receiver acts as the server.
    Endpoint sender = dir == DataDirection::In ? ctx.remote : ctx.local;
    Endpoint receiver = dir == DataDirection::In ? ctx.local : ctx.remote;
    bool receiver_is_client = (ctx.direction == ConnDirection::Outbound) ==
                              (dir == DataDirection::In);
    RuleClass cls = receiver_is_client ? RuleClass::WebClient : RuleClass::WebServer;
    return DirState{
        reassembly::StreamBuffer(cfg_.overlap_policy, cfg_.reassembly_cap, m->tail_len()),
        rules::MatchRun(m, m->eligible_rules(cls, sender, receiver)),
        derive_event_kind(ctx.direction, dir, cls),
        sender,
        receiver,
    };
}

void Engine::open_connection(const ConnectionContext& ctx) {
    if (conns_.count(ctx.conn_id)) {
        throw std::invalid_argument("duplicate conn_id '" + ctx.conn_id + "'");
    }
    auto m = matcher_;
    ConnState cs{
        ctx,    m, false, std::nullopt, {}, false,
        make_dir_state(ctx, DataDirection::In, m),
        make_dir_state(ctx, DataDirection::Out, m),
    };
    conns_.emplace(ctx.conn_id, std::move(cs));
}

void Engine::scan_request_head(ConnState& cs, std::string_view released) {
    cs.head_buf.append(released.substr(0, kHeadCap - std::min(kHeadCap, cs.head_buf.size())));
    bool terminated = cs.head_buf.find("\r\n\r\n") != std::string::npos ||
                      cs.head_buf.find("\n\n") != std::string::npos;
    if (terminated || cs.head_buf.size() >= kHeadCap) {
        cs.real_remote = extract_xff(cs.head_buf);
        cs.head_done = true;
    }
}

std::vector<DetectionEvent> Engine::fires_to_events(ConnState& cs, DirState& ds,
                                                    const std::vector<rules::Fire>& fires,
                                                    std::int64_t ts_ms) {
    std::vector<DetectionEvent> events;
    events.reserve(fires.size());
    bool latch_drop = false;
    for (const auto& fire : fires) {
        const rules::Rule& rule = cs.matcher->rule(fire.rule_index);
        bool drops = cfg_.drop_enabled && rule.action == rules::RuleAction::Drop;
        if (drops) latch_drop = true;
        DetectionEvent ev;
        ev.ts_ms = ts_ms;
        ev.host_id = cfg_.host_id;
        ev.conn_id = cs.ctx.conn_id;
        ev.src = ds.sender.to_string();
        ev.dst = ds.receiver.to_string();
        ev.real_src = cs.real_remote;
        ev.sid = rule.sid;
        ev.rev = rule.rev;
        ev.msg = rule.msg;
        ev.severity = rule.severity;
        ev.app_name = cs.ctx.app_name;
        ev.app_version = cs.ctx.app_version;
        ev.kind = ds.kind;
        ev.quarantine = quarantines(ds.kind);
        ev.action_taken = drops ? rules::RuleAction::Drop : rules::RuleAction::Alert;
        ev.match_offset = fire.offset;
        events.push_back(std::move(ev));
    }
    if (latch_drop) cs.blocked = true;
    return events;
}

DataResult Engine::on_data(const std::string& conn_id, DataDirection dir,
                           const reassembly::Segment& seg, std::int64_t ts_ms) {
    auto it = conns_.find(conn_id);
    if (it == conns_.end()) throw std::invalid_argument("unknown conn_id '" + conn_id + "'");
    ConnState& cs = it->second;
    if (cs.blocked) {
        ++suppressed_segments_;
        return {};
    }
    DirState& ds = dir == DataDirection::In ? cs.in : cs.out;

    std::string prev_tail(ds.buf.tail());
    auto res = ds.buf.ingest(seg);
    if (res.overflow) return {{}, true};
    if (res.released.empty()) return {};

    if (cs.ctx.direction == ConnDirection::Inbound && dir == DataDirection::In && !cs.head_done) {
        scan_request_head(cs, res.released);
    }

    auto fires = ds.run.on_bytes(prev_tail, res.released,
                                 ds.buf.next_offset() - res.released.size());
    return {fires_to_events(cs, ds, fires, ts_ms), false};
}

std::vector<DetectionEvent> Engine::force_gap(const std::string& conn_id, DataDirection dir,
                                              std::int64_t ts_ms) {
    auto it = conns_.find(conn_id);
    if (it == conns_.end()) throw std::invalid_argument("unknown conn_id '" + conn_id + "'");
    ConnState& cs = it->second;
    DirState& ds = dir == DataDirection::In ? cs.in : cs.out;

    std::string released = ds.buf.force_gap();
    ds.run.reset_for_gap();
    if (released.empty() || cs.blocked) return {};

    if (cs.ctx.direction == ConnDirection::Inbound && dir == DataDirection::In && !cs.head_done) {
        scan_request_head(cs, released);
    }
    auto fires = ds.run.on_bytes({}, released, ds.buf.next_offset() - released.size());
    return fires_to_events(cs, ds, fires, ts_ms);
}

std::vector<DetectionEvent> Engine::close_connection(const std::string& conn_id,
                                                     std::int64_t ts_ms) {
    auto it = conns_.find(conn_id);
    if (it == conns_.end()) throw std::invalid_argument("unknown conn_id '" + conn_id + "'");

    std::vector<DetectionEvent> events;
    for (DataDirection dir : {DataDirection::In, DataDirection::Out}) {
        DirState& ds = dir == DataDirection::In ? it->second.in : it->second.out;
        while (ds.buf.has_pending()) {
            auto more = force_gap(conn_id, dir, ts_ms);
            events.insert(events.end(), more.begin(), more.end());
        }
    }
    conns_.erase(conn_id);
    return events;
}

bool Engine::is_blocked(const std::string& conn_id) const {
    auto it = conns_.find(conn_id);
    return it != conns_.end() && it->second.blocked;
}

std::vector<std::string> Engine::open_conn_ids() const {
    std::vector<std::string> ids;
    ids.reserve(conns_.size());
    for (const auto& [id, _] : conns_) ids.push_back(id);
    return ids;
}

} // namespace hostguard::detection
