#include "hostguard/collector.hpp"

#include <sstream>
#include <stdexcept>

#include "hostguard/util.hpp"

namespace hostguard::collector {

namespace {

// quarantine.tsv needs tabs escaped on top of the wire escaping.
std::string esc_tsv(std::string_view raw) {
    std::string escaped = wire::escape_value(raw);
    std::string out;
    out.reserve(escaped.size());
    for (char c : escaped) {
        if (c == '\t') {
            out += "%09";
        } else {
            out.push_back(c);
        }
    }
    return out;
}

} // namespace

std::string store_line(const wire::EventRecord& rec) {
    using wire::escape_value;
    std::ostringstream out;
    out << rec.seqno << '|' << escape_value(rec.host_id) << '|' << rec.ts_ms << '|'
        << escape_value(rec.conn_id) << "|tcp|" << escape_value(rec.src) << '|'
        << escape_value(rec.dst) << '|'
        << (rec.real_src ? escape_value(*rec.real_src) : std::string("-")) << '|'
        << escape_value(rec.app_name) << '|' << escape_value(rec.app_version) << '|' << rec.sid
        << '|' << rec.rev << '|' << escape_value(rec.msg) << '|' << rec.severity << '|'
        << wire::to_string(rec.kind) << '|' << (rec.quarantine ? 1 : 0) << '|' << rec.action
        << '|' << rec.match_offset << '|' << (rec.truncated ? 1 : 0);
    return out.str();
}

std::optional<wire::EventRecord> parse_store_line(std::string_view line) {
    auto fields = split_char(line, '|');
    if (fields.size() != 19) return std::nullopt;

    auto unescape = [](const std::string& s) { return wire::unescape_value(s); };
    wire::EventRecord rec;
    auto seq = parse_u64(fields[0]);
    auto host = unescape(fields[1]);
    auto ts = parse_i64(fields[2]);
    auto conn = unescape(fields[3]);
    auto src = unescape(fields[5]);
    auto dst = unescape(fields[6]);
    auto app = unescape(fields[8]);
    auto appver = unescape(fields[9]);
    auto sid = parse_u64(fields[10]);
    auto rev = parse_u64(fields[11]);
    auto msg = unescape(fields[12]);
    auto sev = parse_u64(fields[13]);
    auto kind = wire::event_kind_from_string(fields[14]);
    auto off = parse_u64(fields[17]);
    if (!seq || !host || !ts || !conn || fields[4] != "tcp" || !src || !dst || !app || !appver ||
        !sid || !rev || !msg || !sev || !kind || !off) {
        return std::nullopt;
    }
    if (fields[15] != "0" && fields[15] != "1") return std::nullopt;
    if (fields[16] != "alert" && fields[16] != "drop") return std::nullopt;
    if (fields[18] != "0" && fields[18] != "1") return std::nullopt;

    rec.seqno = *seq;
    rec.host_id = *host;
    rec.ts_ms = *ts;
    rec.conn_id = *conn;
    rec.src = *src;
    rec.dst = *dst;
    if (fields[7] != "-") {
        auto real = unescape(fields[7]);
        if (!real) return std::nullopt;
        rec.real_src = *real;
    }
    rec.app_name = *app;
    rec.app_version = *appver;
    rec.sid = static_cast<std::uint32_t>(*sid);
    rec.rev = static_cast<std::uint32_t>(*rev);
    rec.msg = *msg;
    rec.severity = static_cast<int>(*sev);
    rec.kind = *kind;
    rec.quarantine = fields[15] == "1";
    rec.action = fields[16];
    rec.match_offset = *off;
    rec.truncated = fields[18] == "1";
    return rec;
}

Collector::Collector(std::filesystem::path store_dir) : dir_(std::move(store_dir)) {
    std::filesystem::create_directories(dir_);
    load_existing();
    log_.open(events_log_path(), std::ios::binary | std::ios::app);
    if (!log_) throw std::runtime_error("cannot open " + events_log_path().string());
}

void Collector::load_existing() {
    for (const auto& rec : read_log()) {
        seen_[rec.host_id].insert(rec.seqno);
    }
    auto qpath = quarantine_path();
    if (std::filesystem::exists(qpath)) {
        std::ifstream in(qpath, std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto fields = split_char(line, '\t');
            if (fields.size() != 7) {
                throw std::runtime_error("corrupt quarantine.tsv row: " + line);
            }
            QuarantineRecord rec;
            auto host = wire::unescape_value(fields[0]);
            auto app = wire::unescape_value(fields[1]);
            auto appver = wire::unescape_value(fields[2]);
            auto first = parse_i64(fields[3]);
            auto last = parse_i64(fields[4]);
            auto count = parse_u64(fields[5]);
            if (!host || !app || !appver || !first || !last || !count) {
                throw std::runtime_error("corrupt quarantine.tsv row: " + line);
            }
            rec.host_id = *host;
            rec.app_name = *app;
            rec.app_version = *appver;
            rec.first_seen = *first;
            rec.last_seen = *last;
            rec.count = *count;
            for (const auto& sid_text : split_char(fields[6], ',')) {
                if (sid_text.empty()) continue;
                auto sid = parse_u64(sid_text);
                if (!sid) throw std::runtime_error("corrupt quarantine.tsv row: " + line);
                rec.sids.insert(static_cast<std::uint32_t>(*sid));
            }
            quarantine_[{rec.host_id, rec.app_name, rec.app_version}] = std::move(rec);
        }
    } else if (std::filesystem::exists(events_log_path())) {
        // Recover the aggregate from the log (e.g. crash before first rewrite).
        quarantine_ = aggregate(read_log());
        if (!quarantine_.empty()) write_quarantine_file();
    }
}

std::vector<wire::EventRecord> Collector::read_log() const {
    std::vector<wire::EventRecord> out;
    std::ifstream in(events_log_path(), std::ios::binary);
    if (!in) return out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto rec = parse_store_line(line);
        if (!rec) {
            throw std::runtime_error("corrupt events.log line " + std::to_string(lineno));
        }
        out.push_back(std::move(*rec));
    }
    return out;
}

Collector::Outcome Collector::ingest_datagram(std::string_view datagram) {
    auto decoded = wire::decode_event(datagram);
    if (!decoded.record) {
        ++rejects_;
        last_reject_reason_ = decoded.error;
        return Outcome::Rejected;
    }
    return persist_event(*decoded.record);
}

Collector::Outcome Collector::persist_event(const wire::EventRecord& rec) {
    auto& seqs = seen_[rec.host_id];
    if (seqs.count(rec.seqno)) {
        ++duplicates_[rec.host_id];
        return Outcome::Duplicate;
    }
    log_ << store_line(rec) << '\n';
    log_.flush();
    if (!log_) throw std::runtime_error("write to events.log failed");
    seqs.insert(rec.seqno);
    if (rec.quarantine) apply_quarantine(rec);
    return Outcome::Stored;
}

void Collector::apply_quarantine(const wire::EventRecord& rec) {
    QuarantineKey key{rec.host_id, rec.app_name, rec.app_version};
    auto it = quarantine_.find(key);
    if (it == quarantine_.end()) {
        QuarantineRecord q;
        q.host_id = rec.host_id;
        q.app_name = rec.app_name;
        q.app_version = rec.app_version;
        q.first_seen = rec.ts_ms;
        q.last_seen = rec.ts_ms;
        q.count = 1;
        q.sids.insert(rec.sid);
        quarantine_.emplace(std::move(key), std::move(q));
    } else {
        auto& q = it->second;
        q.first_seen = std::min(q.first_seen, rec.ts_ms);
        q.last_seen = std::max(q.last_seen, rec.ts_ms);
        ++q.count;
        q.sids.insert(rec.sid);
    }
    write_quarantine_file();
}

void Collector::write_quarantine_file() const {
    auto tmp = dir_ / "quarantine.tsv.tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        for (const auto& [key, q] : quarantine_) {
            out << esc_tsv(q.host_id) << '\t' << esc_tsv(q.app_name) << '\t'
                << esc_tsv(q.app_version) << '\t' << q.first_seen << '\t' << q.last_seen << '\t'
                << q.count << '\t';
            bool first = true;
            for (auto sid : q.sids) {
                if (!first) out << ',';
                out << sid;
                first = false;
            }
            out << '\n';
        }
        if (!out) throw std::runtime_error("write to quarantine.tsv failed");
    }
    std::filesystem::rename(tmp, quarantine_path());
}

std::vector<wire::EventRecord> Collector::query(const QueryFilter& filter) const {
    std::vector<wire::EventRecord> out;
    for (auto& rec : read_log()) {
        if (filter.kind && rec.kind != *filter.kind) continue;
        if (filter.host && rec.host_id != *filter.host) continue;
        if (filter.sid && rec.sid != *filter.sid) continue;
        if (filter.since_ts && rec.ts_ms < *filter.since_ts) continue;
        if (filter.until_ts && rec.ts_ms > *filter.until_ts) continue;
        if (filter.quarantined_only && !rec.quarantine) continue;
        out.push_back(std::move(rec));
    }
    return out;
}

AgentGapStats Collector::gap_stats(const std::string& host) const {
    auto it = seen_.find(host);
    if (it == seen_.end() || it->second.empty()) {
        throw std::out_of_range("unknown host: " + host);
    }
    AgentGapStats stats;
    stats.host_id = host;
    stats.max_seq_seen = *it->second.rbegin();
    stats.received = it->second.size();
    stats.gaps = stats.max_seq_seen - stats.received;
    auto dup = duplicates_.find(host);
    stats.duplicates = dup == duplicates_.end() ? 0 : dup->second;
    return stats;
}

std::vector<std::string> Collector::known_hosts() const {
    std::vector<std::string> hosts;
    hosts.reserve(seen_.size());
    for (const auto& [host, _] : seen_) hosts.push_back(host);
    return hosts;
}

std::map<Collector::QuarantineKey, QuarantineRecord> Collector::aggregate(
    const std::vector<wire::EventRecord>& events) {
    std::map<QuarantineKey, QuarantineRecord> out;
    for (const auto& rec : events) {
        if (!rec.quarantine) continue;
        QuarantineKey key{rec.host_id, rec.app_name, rec.app_version};
        auto it = out.find(key);
        if (it == out.end()) {
            QuarantineRecord q;
            q.host_id = rec.host_id;
            q.app_name = rec.app_name;
            q.app_version = rec.app_version;
            q.first_seen = rec.ts_ms;
            q.last_seen = rec.ts_ms;
            q.count = 1;
            q.sids.insert(rec.sid);
            out.emplace(std::move(key), std::move(q));
        } else {
            auto& q = it->second;
            q.first_seen = std::min(q.first_seen, rec.ts_ms);
            q.last_seen = std::max(q.last_seen, rec.ts_ms);
            ++q.count;
            q.sids.insert(rec.sid);
        }
    }
    return out;
}

bool Collector::audit_quarantine(std::string* detail) const {
    auto recomputed = aggregate(read_log());
    if (recomputed == quarantine_) return true;
    if (detail) {
        std::ostringstream out;
        out << "quarantine mismatch: " << recomputed.size() << " recomputed keys vs "
            << quarantine_.size() << " stored";
        *detail = out.str();
    }
    return false;
}

} // namespace hostguard::collector
