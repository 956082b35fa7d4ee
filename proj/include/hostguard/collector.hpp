#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hostguard/wire.hpp"

namespace hostguard::collector {

// Aggregate over quarantine-flagged events from one inside application.
struct QuarantineRecord {
    std::string host_id;
    std::string app_name;
    std::string app_version;
    std::int64_t first_seen = 0;
    std::int64_t last_seen = 0;
    std::uint64_t count = 0;
    std::set<std::uint32_t> sids;

    bool operator==(const QuarantineRecord&) const = default;
};

struct AgentGapStats {
    std::string host_id;
    std::uint64_t max_seq_seen = 0;
    std::uint64_t received = 0;      // unique seqnos stored
    std::uint64_t duplicates = 0;    // re-deliveries seen this run
    std::uint64_t gaps = 0;          // max_seq_seen - received
};

struct QueryFilter {
    std::optional<wire::EventKindCode> kind;
    std::optional<std::string> host;
    std::optional<std::uint32_t> sid;
    std::optional<std::int64_t> since_ts;    // inclusive
    std::optional<std::int64_t> until_ts;    // inclusive
    bool quarantined_only = false;
};

// One stored event as a '|'-joined line of wire-escaped values.
std::string store_line(const wire::EventRecord& rec);
std::optional<wire::EventRecord> parse_store_line(std::string_view line);

// Flat-file event store: append-only events.log plus an atomically rewritten
// quarantine.tsv. Ingestion is idempotent on (host, seqno).
class Collector {
public:
    using QuarantineKey = std::tuple<std::string, std::string, std::string>;

    explicit Collector(std::filesystem::path store_dir);   // creates/loads the store

    enum class Outcome { Stored, Duplicate, Rejected };

    Outcome ingest_datagram(std::string_view datagram);
    Outcome persist_event(const wire::EventRecord& rec);

    std::vector<wire::EventRecord> query(const QueryFilter& filter) const;
    AgentGapStats gap_stats(const std::string& host) const;   // throws on unknown host
    std::vector<std::string> known_hosts() const;

    const std::map<QuarantineKey, QuarantineRecord>& quarantine() const { return quarantine_; }
    std::uint64_t rejects() const { return rejects_; }
    const std::string& last_reject_reason() const { return last_reject_reason_; }

    // Recomputes the quarantine aggregate from events.log and compares it
    // with the maintained store; mismatch detail lands in *detail.
    bool audit_quarantine(std::string* detail = nullptr) const;

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path events_log_path() const { return dir_ / "events.log"; }
    std::filesystem::path quarantine_path() const { return dir_ / "quarantine.tsv"; }

private:
    void load_existing();
    void apply_quarantine(const wire::EventRecord& rec);
    void write_quarantine_file() const;
    std::vector<wire::EventRecord> read_log() const;
    static std::map<QuarantineKey, QuarantineRecord> aggregate(
        const std::vector<wire::EventRecord>& events);

    std::filesystem::path dir_;
    std::ofstream log_;
    std::map<std::string, std::set<std::uint64_t>> seen_;      // host -> seqnos
    std::map<std::string, std::uint64_t> duplicates_;
    std::map<QuarantineKey, QuarantineRecord> quarantine_;
    std::uint64_t rejects_ = 0;
    std::string last_reject_reason_;
};

} // namespace hostguard::collector
