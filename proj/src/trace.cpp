#include "hostguard/trace.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "hostguard/version.hpp"

namespace hostguard::agent {

std::int64_t trace_ts(const TraceEvent& ev) {
    return std::visit([](const auto& e) { return e.ts_ms; }, ev);
}

std::vector<TraceEvent> parse_trace(std::string_view text) {
    std::vector<TraceEvent> events;
    std::set<std::string> open;
    std::int64_t last_ts = 0;
    bool saw_magic = false;

    size_t lineno = 0;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        std::string_view raw = end == std::string_view::npos ? text.substr(start)
                                                             : text.substr(start, end - start);
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        std::string line = trim(raw);

        if (!saw_magic) {
            if (line != kTraceMagic) throw TraceError("bad magic, expected HGTRC1", lineno);
            saw_magic = true;
        } else if (!line.empty() && line[0] != '#') {
            auto tok = split_ws(line);
            auto need = [&](size_t n) {
                if (tok.size() != n) {
                    throw TraceError("expected " + std::to_string(n) + " fields, got " +
                                         std::to_string(tok.size()),
                                     lineno);
                }
            };
            auto parse_ts = [&](const std::string& s) {
                auto ts = parse_i64(s);
                if (!ts || *ts < 0) throw TraceError("bad timestamp '" + s + "'", lineno);
                if (*ts < last_ts) throw TraceError("non-monotone ts " + s, lineno);
                last_ts = *ts;
                return *ts;
            };

            if (tok[0] == "OPEN") {
                need(9);
                TraceOpen ev;
                ev.conn_id = tok[1];
                ev.ts_ms = parse_ts(tok[2]);
                if (tok[3] != "tcp") throw TraceError("unsupported proto '" + tok[3] + "'", lineno);
                auto local = Endpoint::parse(tok[4]);
                auto remote = Endpoint::parse(tok[5]);
                if (!local) throw TraceError("bad local endpoint '" + tok[4] + "'", lineno);
                if (!remote) throw TraceError("bad remote endpoint '" + tok[5] + "'", lineno);
                ev.local = *local;
                ev.remote = *remote;
                if (tok[6] == "outbound") {
                    ev.direction = rules::ConnDirection::Outbound;
                } else if (tok[6] == "inbound") {
                    ev.direction = rules::ConnDirection::Inbound;
                } else {
                    throw TraceError("bad direction '" + tok[6] + "'", lineno);
                }
                ev.app_name = tok[7];
                ev.app_version = tok[8];
                if (!open.insert(ev.conn_id).second) {
                    throw TraceError("duplicate OPEN for conn " + ev.conn_id, lineno);
                }
                events.push_back(std::move(ev));
            } else if (tok[0] == "DATA") {
                need(6);
                TraceData ev;
                ev.conn_id = tok[1];
                ev.ts_ms = parse_ts(tok[2]);
                if (!open.count(ev.conn_id)) {
                    throw TraceError("DATA before OPEN for conn " + ev.conn_id, lineno);
                }
                if (tok[3] == "in") {
                    ev.direction = detection::DataDirection::In;
                } else if (tok[3] == "out") {
                    ev.direction = detection::DataDirection::Out;
                } else {
                    throw TraceError("bad data direction '" + tok[3] + "'", lineno);
                }
                if (tok[4] != "-") {
                    auto off = parse_u64(tok[4]);
                    if (!off) throw TraceError("bad offset '" + tok[4] + "'", lineno);
                    ev.offset = *off;
                }
                auto payload = hex_decode(tok[5]);
                if (!payload) throw TraceError("bad hex payload", lineno);
                if (payload->empty()) throw TraceError("empty payload", lineno);
                ev.payload = std::move(*payload);
                events.push_back(std::move(ev));
            } else if (tok[0] == "CLOSE") {
                need(3);
                TraceClose ev;
                ev.conn_id = tok[1];
                ev.ts_ms = parse_ts(tok[2]);
                if (!open.erase(ev.conn_id)) {
                    throw TraceError("CLOSE before OPEN for conn " + ev.conn_id, lineno);
                }
                events.push_back(std::move(ev));
            } else {
                throw TraceError("unknown event '" + tok[0] + "'", lineno);
            }
        }

        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    if (!saw_magic) throw TraceError("bad magic, expected HGTRC1", 1);
    return events;
}

std::vector<TraceEvent> load_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trace file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trace(buf.str());
}

std::string render_trace(const std::vector<TraceEvent>& events) {
    std::ostringstream out;
    out << kTraceMagic << '\n';
    for (const auto& ev : events) {
        if (const auto* open = std::get_if<TraceOpen>(&ev)) {
            out << "OPEN " << open->conn_id << ' ' << open->ts_ms << " tcp "
                << open->local.to_string() << ' ' << open->remote.to_string() << ' '
                << rules::to_string(open->direction) << ' ' << open->app_name << ' '
                << open->app_version << '\n';
        } else if (const auto* data = std::get_if<TraceData>(&ev)) {
            out << "DATA " << data->conn_id << ' ' << data->ts_ms << ' '
                << detection::to_string(data->direction) << ' ';
            if (data->offset) {
                out << *data->offset;
            } else {
                out << '-';
            }
            out << ' ' << hex_encode(data->payload) << '\n';
        } else {
            const auto& close = std::get<TraceClose>(ev);
            out << "CLOSE " << close.conn_id << ' ' << close.ts_ms << '\n';
        }
    }
    return out.str();
}

} // namespace hostguard::agent
