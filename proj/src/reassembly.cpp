#include "hostguard/reassembly.hpp"

#include <stdexcept>
#include <vector>

namespace hostguard::reassembly {

const char* to_string(OverlapPolicy p) {
    return p == OverlapPolicy::FirstWins ? "first-wins" : "last-wins";
}

std::optional<OverlapPolicy> overlap_policy_from_string(std::string_view s) {
    if (s == "first-wins") return OverlapPolicy::FirstWins;
    if (s == "last-wins") return OverlapPolicy::LastWins;
    return std::nullopt;
}

StreamBuffer::StreamBuffer(OverlapPolicy policy, std::size_t cap_bytes, std::size_t tail_cap)
    : policy_(policy), cap_(cap_bytes), tail_cap_(tail_cap) {}

IngestResult StreamBuffer::ingest(const Segment& seg) {
    if (seg.bytes.empty()) throw std::invalid_argument("segment bytes must be non-empty");

    // Released bytes are final under both policies: clip anything below the frontier.
    std::uint64_t s = seg.offset;
    std::string_view bytes = seg.bytes;
    if (s + bytes.size() <= next_offset_) return {};
    if (s < next_offset_) {
        bytes.remove_prefix(static_cast<std::size_t>(next_offset_ - s));
        s = next_offset_;
    }
    const std::uint64_t e = s + bytes.size();

    // Dry pass: overlap with pending chunks decides how many bytes would be
    // stored (and, under last-wins, displaced).
    std::size_t overlap = 0;
    auto first_candidate = [&] {
        auto it = pending_.upper_bound(s);
        if (it != pending_.begin()) {
            auto prev = std::prev(it);
            if (prev->first + prev->second.size() > s) return prev;
        }
        return it;
    };
    for (auto it = first_candidate(); it != pending_.end() && it->first < e; ++it) {
        std::uint64_t cs = it->first;
        std::uint64_t ce = cs + it->second.size();
        overlap += static_cast<std::size_t>(std::min(ce, e) - std::max(cs, s));
    }
    std::size_t inserted, removed;
    if (policy_ == OverlapPolicy::FirstWins) {
        inserted = bytes.size() - overlap;
        removed = 0;
    } else {
        inserted = bytes.size();
        removed = overlap;
    }

    // Coverage (which offsets are filled) is pending ∪ [s,e) under either
    // policy, so the releasable run can be computed before mutating.
    std::uint64_t cur = next_offset_;
    bool new_range_used = false;
    auto it = pending_.begin();
    while (true) {
        if (it != pending_.end() && it->first + it->second.size() <= cur) {
            ++it;
            continue;
        }
        if (it != pending_.end() && it->first <= cur) {
            cur = it->first + it->second.size();
            ++it;
            continue;
        }
        if (!new_range_used && s <= cur && cur < e) {
            cur = e;
            new_range_used = true;
            continue;
        }
        break;
    }
    const std::size_t release_len = static_cast<std::size_t>(cur - next_offset_);

    std::size_t buffered_after = buffered_ + inserted - removed - release_len;
    if (buffered_after > cap_) return {"", true};

    if (policy_ == OverlapPolicy::FirstWins) {
        // Insert only the sub-ranges not already covered.
        std::uint64_t fill = s;
        std::vector<std::pair<std::uint64_t, std::string>> adds;
        for (auto jt = first_candidate(); jt != pending_.end() && jt->first < e; ++jt) {
            std::uint64_t cs = jt->first;
            std::uint64_t ce = cs + jt->second.size();
            if (cs > fill) {
                adds.emplace_back(fill, std::string(bytes.substr(
                                            static_cast<std::size_t>(fill - s),
                                            static_cast<std::size_t>(cs - fill))));
            }
            fill = std::max(fill, ce);
        }
        if (fill < e) {
            adds.emplace_back(fill,
                              std::string(bytes.substr(static_cast<std::size_t>(fill - s))));
        }
        for (auto& [off, chunk] : adds) insert_range(off, chunk);
    } else {
        // New bytes replace any pending overlap; released bytes stay final.
        std::vector<std::pair<std::uint64_t, std::string>> keep;
        std::vector<std::uint64_t> erase_keys;
        for (auto jt = first_candidate(); jt != pending_.end() && jt->first < e; ++jt) {
            std::uint64_t cs = jt->first;
            std::uint64_t ce = cs + jt->second.size();
            if (cs < s) keep.emplace_back(cs, jt->second.substr(0, static_cast<std::size_t>(s - cs)));
            if (ce > e) keep.emplace_back(e, jt->second.substr(static_cast<std::size_t>(e - cs)));
            erase_keys.push_back(cs);
            buffered_ -= jt->second.size();
        }
        for (auto key : erase_keys) pending_.erase(key);
        for (auto& [off, chunk] : keep) insert_range(off, chunk);
        insert_range(s, bytes);
    }

    std::string released = release_contiguous();
    retain_tail(released);
    return {std::move(released), false};
}

void StreamBuffer::insert_range(std::uint64_t offset, std::string_view bytes) {
    if (bytes.empty()) return;
    buffered_ += bytes.size();
    pending_.emplace(offset, std::string(bytes));
}

std::string StreamBuffer::release_contiguous() {
    std::string out;
    while (!pending_.empty()) {
        auto it = pending_.begin();
        if (it->first != next_offset_) break;
        out += it->second;
        next_offset_ += it->second.size();
        buffered_ -= it->second.size();
        pending_.erase(it);
    }
    return out;
}

void StreamBuffer::retain_tail(std::string_view released) {
    if (tail_cap_ == 0) {
        tail_.clear();
        return;
    }
    tail_.append(released);
    if (tail_.size() > tail_cap_) tail_.erase(0, tail_.size() - tail_cap_);
}

std::string StreamBuffer::force_gap() {
    if (pending_.empty()) return {};
    gap_marker_ = next_offset_;
    next_offset_ = pending_.begin()->first;
    tail_.clear();   // the retained window must not span the gap
    std::string released = release_contiguous();
    retain_tail(released);
    return released;
}

} // namespace hostguard::reassembly
