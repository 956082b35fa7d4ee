#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace hostguard::reassembly {

struct Segment {
    std::uint64_t offset = 0;
    std::string bytes;        // non-empty
};

enum class OverlapPolicy { FirstWins, LastWins };

const char* to_string(OverlapPolicy p);
std::optional<OverlapPolicy> overlap_policy_from_string(std::string_view s);

struct IngestResult {
    std::string released;     // maximal newly contiguous bytes from next_offset
    bool overflow = false;    // segment rejected, buffer unchanged
};

// Per-(connection, data direction) reassembly state. Out-of-order segments are
// buffered until the stream becomes contiguous at next_offset; released bytes
// are final and never corrected. Under FirstWins the byte at an offset comes
// from the first-arriving segment covering it; under LastWins a later segment
// overwrites pending (not yet released) bytes.
class StreamBuffer {
public:
    StreamBuffer(OverlapPolicy policy, std::size_t cap_bytes, std::size_t tail_cap);

    IngestResult ingest(const Segment& seg);

    // Skips the gap at next_offset: jumps to the lowest pending offset, records
    // gap_marker, and releases what is now contiguous. Match state crossing
    // the gap must be reset by the caller. No pending data -> no-op.
    std::string force_gap();

    std::uint64_t next_offset() const { return next_offset_; }
    std::optional<std::uint64_t> gap_marker() const { return gap_marker_; }
    bool has_pending() const { return !pending_.empty(); }
    std::size_t buffered_bytes() const { return buffered_; }
    // Retained suffix of released bytes (cross-release matching window).
    std::string_view tail() const { return tail_; }
    OverlapPolicy policy() const { return policy_; }

private:
    void insert_range(std::uint64_t offset, std::string_view bytes);
    std::string release_contiguous();
    void retain_tail(std::string_view released);

    OverlapPolicy policy_;
    std::size_t cap_;
    std::size_t tail_cap_;
    std::uint64_t next_offset_ = 0;
    std::map<std::uint64_t, std::string> pending_;   // non-overlapping chunks
    std::size_t buffered_ = 0;
    std::optional<std::uint64_t> gap_marker_;
    std::string tail_;
};

} // namespace hostguard::reassembly
