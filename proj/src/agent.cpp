#include "hostguard/agent.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hostguard/net.hpp"

namespace hostguard::agent {

using nlohmann::json;

namespace {

Endpoint require_endpoint(const std::string& value, const char* key) {
    auto ep = Endpoint::parse(value);
    if (!ep) throw ConfigError(std::string(key) + " is not an ip:port pair: " + value);
    return *ep;
}

sampler::SamplerConfig sampler_from_json(const json& j) {
    sampler::SamplerConfig cfg;
    static const std::set<std::string> known = {"lambda",    "window",     "t_min_ms", "t_max_ms",
                                                "theta_low", "theta_high", "epsilon"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw ConfigError("unknown sampler key: " + it.key());
    }
    if (j.contains("lambda")) cfg.lambda = j.at("lambda").get<double>();
    if (j.contains("window")) cfg.window = j.at("window").get<std::size_t>();
    if (j.contains("t_min_ms")) cfg.t_min_ms = j.at("t_min_ms").get<std::int64_t>();
    if (j.contains("t_max_ms")) cfg.t_max_ms = j.at("t_max_ms").get<std::int64_t>();
    if (j.contains("theta_low")) cfg.theta_low = j.at("theta_low").get<double>();
    if (j.contains("theta_high")) cfg.theta_high = j.at("theta_high").get<double>();
    if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
    return cfg;
}

} // namespace

AgentConfig AgentConfig::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be an object");

    static const std::set<std::string> known = {
        "host_id",      "home_nets", "collector_addr",       "admin_addr",
        "overlap_policy", "drop_enabled", "reassembly_cap_bytes", "sampler"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw ConfigError("unknown config key: " + it.key());
    }

    AgentConfig cfg;
    try {
        cfg.host_id = j.at("host_id").get<std::string>();
        if (cfg.host_id.empty()) throw ConfigError("host_id must be non-empty");

        if (!j.contains("home_nets") || !j.at("home_nets").is_array() || j.at("home_nets").empty()) {
            throw ConfigError("home_nets must be a non-empty array of CIDRs");
        }
        for (const auto& item : j.at("home_nets")) {
            auto cidr = Cidr::parse(item.get<std::string>());
            if (!cidr) throw ConfigError("bad CIDR in home_nets: " + item.get<std::string>());
            cfg.home_nets.push_back(*cidr);
        }

        if (j.contains("collector_addr")) {
            cfg.collector_addr =
                require_endpoint(j.at("collector_addr").get<std::string>(), "collector_addr");
        }
        if (j.contains("admin_addr")) {
            cfg.admin_addr = require_endpoint(j.at("admin_addr").get<std::string>(), "admin_addr");
        }
        if (j.contains("overlap_policy")) {
            auto policy =
                reassembly::overlap_policy_from_string(j.at("overlap_policy").get<std::string>());
            if (!policy) {
                throw ConfigError("overlap_policy must be first-wins or last-wins");
            }
            cfg.overlap_policy = *policy;
        }
        if (j.contains("drop_enabled")) cfg.drop_enabled = j.at("drop_enabled").get<bool>();
        if (j.contains("reassembly_cap_bytes")) {
            cfg.reassembly_cap_bytes = j.at("reassembly_cap_bytes").get<std::size_t>();
            if (cfg.reassembly_cap_bytes == 0) throw ConfigError("reassembly_cap_bytes must be > 0");
        }
        if (j.contains("sampler")) cfg.sampler = sampler_from_json(j.at("sampler"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return cfg;
}

AgentConfig AgentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

Agent::Agent(AgentConfig cfg, rules::RuleSet ruleset)
    : cfg_(std::move(cfg)), ruleset_(std::move(ruleset)) {
    if (cfg_.home_nets.empty()) throw ConfigError("home_nets must be non-empty");
    matcher_ = rules::CompiledMatcher::compile(ruleset_, cfg_.home_nets);
}

SwapReport Agent::apply_ruleset_update(const rules::RuleSet& next) {
    SwapReport report;
    report.old_version = ruleset_.version;
    report.new_version = next.version;
    if (next.version <= ruleset_.version) return report;   // stale, no change

    std::set<std::uint32_t> old_sids, new_sids;
    for (const auto& r : ruleset_.rules) old_sids.insert(r.sid);
    for (const auto& r : next.rules) new_sids.insert(r.sid);
    for (auto sid : new_sids) {
        if (!old_sids.count(sid)) ++report.rule_delta;
    }
    for (auto sid : old_sids) {
        if (!new_sids.count(sid)) ++report.rule_delta;
    }

    auto matcher = rules::CompiledMatcher::compile(next, cfg_.home_nets);
    ruleset_ = next;
    matcher_ = std::move(matcher);
    report.applied = true;
    return report;
}

wire::EventRecord to_wire_record(const detection::DetectionEvent& ev, std::uint64_t seqno) {
    wire::EventRecord rec;
    rec.seqno = seqno;
    rec.host_id = ev.host_id;
    rec.ts_ms = ev.ts_ms;
    rec.conn_id = ev.conn_id;
    rec.src = ev.src;
    rec.dst = ev.dst;
    rec.real_src = ev.real_src;
    rec.app_name = ev.app_name;
    rec.app_version = ev.app_version;
    rec.sid = ev.sid;
    rec.rev = ev.rev;
    rec.msg = ev.msg;
    rec.severity = ev.severity;
    rec.kind = detection::kind_code(ev.kind);
    rec.quarantine = ev.quarantine;
    rec.action = rules::to_string(ev.action_taken);
    rec.match_offset = ev.match_offset;
    return rec;
}

ReplayResult Agent::run_replay(const std::vector<TraceEvent>& trace, bool send_udp) {
    ReplayResult result;
    AgentStats& stats = result.stats;

    detection::EngineConfig ecfg;
    ecfg.host_id = cfg_.host_id;
    ecfg.overlap_policy = cfg_.overlap_policy;
    ecfg.drop_enabled = cfg_.drop_enabled;
    ecfg.reassembly_cap = cfg_.reassembly_cap_bytes;
    detection::Engine engine(ecfg, matcher_);

    std::optional<net::UdpSender> udp;
    if (send_udp && cfg_.collector_addr) {
        try {
            udp.emplace(*cfg_.collector_addr);
        } catch (const std::runtime_error&) {
            udp.reset();   // journal still written; sends count as failures
        }
    }

    std::optional<sampler::Sampler> traffic_sampler;
    std::int64_t window_start = 0;
    double window_bytes = 0;
    if (cfg_.sampler) traffic_sampler.emplace(*cfg_.sampler);
    bool sampler_started = false;

    // In-order append cursors: '-' DATA offsets land at the highest byte the
    // sender has written so far on that (conn, direction).
    std::map<std::pair<std::string, detection::DataDirection>, std::uint64_t> cursors;

    std::uint64_t seqno = 0;
    auto emit = [&](const detection::DetectionEvent& ev) {
        wire::EventRecord rec = to_wire_record(ev, ++seqno);
        std::string datagram = wire::encode_event(rec);
        result.journal += datagram;
        result.events.push_back(ev);
        ++stats.events;
        ++stats.events_by_kind[static_cast<size_t>(detection::kind_code(ev.kind))];
        if (ev.action_taken == rules::RuleAction::Drop) ++stats.drops_latched;
        if (send_udp && cfg_.collector_addr) {
            if (udp && udp->send(datagram)) {
                ++stats.datagrams_sent;
            } else {
                ++stats.send_failures;
            }
        }
    };

    auto feed_sampler = [&](std::int64_t ts) {
        if (!traffic_sampler) return;
        if (!sampler_started) {
            window_start = ts;
            sampler_started = true;
            return;
        }
        while (ts >= window_start + traffic_sampler->interval_ms()) {
            std::int64_t elapsed = traffic_sampler->interval_ms();
            traffic_sampler->update(window_bytes);
            ++stats.sampler_updates;
            window_bytes = 0;
            window_start += elapsed;
        }
    };

    std::int64_t last_ts = 0;
    for (const auto& ev : trace) {
        last_ts = trace_ts(ev);
        feed_sampler(last_ts);

        if (const auto* open = std::get_if<TraceOpen>(&ev)) {
            detection::ConnectionContext ctx;
            ctx.conn_id = open->conn_id;
            ctx.opened_ts = open->ts_ms;
            ctx.local = open->local;
            ctx.remote = open->remote;
            ctx.direction = open->direction;
            ctx.app_name = open->app_name;
            ctx.app_version = open->app_version;
            engine.open_connection(ctx);
            // a reused conn_id starts a fresh stream
            cursors[{open->conn_id, detection::DataDirection::In}] = 0;
            cursors[{open->conn_id, detection::DataDirection::Out}] = 0;
            ++stats.connections;
        } else if (const auto* data = std::get_if<TraceData>(&ev)) {
            auto key = std::make_pair(data->conn_id, data->direction);
            auto& cursor = cursors[key];
            std::uint64_t offset = data->offset.value_or(cursor);
            cursor = std::max(cursor, offset + data->payload.size());
            ++stats.segments;
            stats.bytes += data->payload.size();
            window_bytes += static_cast<double>(data->payload.size());

            reassembly::Segment seg{offset, data->payload};
            auto res = engine.on_data(data->conn_id, data->direction, seg, data->ts_ms);
            for (const auto& e : res.events) emit(e);
            if (res.overflow) {
                // Drain the gap and retry the segment once.
                ++stats.forced_gaps;
                for (const auto& e : engine.force_gap(data->conn_id, data->direction, data->ts_ms))
                    emit(e);
                auto retry = engine.on_data(data->conn_id, data->direction, seg, data->ts_ms);
                for (const auto& e : retry.events) emit(e);
                if (retry.overflow) ++stats.dropped_segments;
            }
        } else {
            const auto& close = std::get<TraceClose>(ev);
            for (const auto& e : engine.close_connection(close.conn_id, close.ts_ms)) emit(e);
        }
    }

    // Unclosed connections still flush their buffered tails deterministically.
    for (const auto& conn_id : engine.open_conn_ids()) {
        for (const auto& e : engine.close_connection(conn_id, last_ts)) emit(e);
    }

    stats.suppressed_segments = engine.suppressed_segments();
    if (traffic_sampler) stats.sampler_interval_ms = traffic_sampler->interval_ms();
    return result;
}

} // namespace hostguard::agent
