#pragma once

// Test-side reference implementations, deliberately independent of the
// library code paths they are used to check.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hostguard/reassembly.hpp"
#include "hostguard/rules.hpp"

namespace oracle {

using hostguard::reassembly::OverlapPolicy;
using hostguard::reassembly::Segment;
using hostguard::rules::ContentPattern;
using hostguard::rules::Rule;
using hostguard::rules::RuleSet;

inline unsigned char lower(unsigned char c) {
    return c >= 'A' && c <= 'Z' ? static_cast<unsigned char>(c - 'A' + 'a') : c;
}

inline bool pattern_at(std::string_view stream, std::uint64_t pos, const ContentPattern& pat) {
    if (pos + pat.bytes.size() > stream.size()) return false;
    for (size_t i = 0; i < pat.bytes.size(); ++i) {
        auto a = static_cast<unsigned char>(stream[pos + i]);
        auto b = static_cast<unsigned char>(pat.bytes[i]);
        if (pat.nocase ? lower(a) != lower(b) : a != b) return false;
    }
    return true;
}

inline bool window_ok(const ContentPattern& pat, std::uint64_t start, std::uint64_t end,
                      std::uint64_t prev_end) {
    if (pat.offset && start < *pat.offset) return false;
    if (pat.depth && end > pat.offset.value_or(0) + *pat.depth) return false;
    std::uint64_t dist = pat.distance.value_or(0);
    if (start < prev_end + dist) return false;
    if (pat.within && end > prev_end + dist + *pat.within) return false;
    return true;
}

// Can patterns[k..] all be placed after prev_end? Full backtracking search.
inline bool complete_from(std::string_view stream, const Rule& rule, size_t k,
                          std::uint64_t prev_end) {
    if (k == rule.patterns.size()) return true;
    const ContentPattern& pat = rule.patterns[k];
    std::uint64_t lo = prev_end + pat.distance.value_or(0);
    for (std::uint64_t s = lo; s + pat.bytes.size() <= stream.size(); ++s) {
        std::uint64_t end = s + pat.bytes.size();
        if (pat.within && end > prev_end + pat.distance.value_or(0) + *pat.within) break;
        if (!window_ok(pat, s, end, prev_end)) continue;
        if (!pattern_at(stream, s, pat)) continue;
        if (complete_from(stream, rule, k + 1, end)) return true;
    }
    return false;
}

// Every (sid, offset) pair a rule set fires on a whole stream: check every
// rule at every position.
inline std::set<std::pair<std::uint32_t, std::uint64_t>> brute_scan(std::string_view stream,
                                                                    const RuleSet& rs) {
    std::set<std::pair<std::uint32_t, std::uint64_t>> fired;
    for (const Rule& rule : rs.rules) {
        const ContentPattern& first = rule.patterns.at(0);
        for (std::uint64_t p = 0; p + first.bytes.size() <= stream.size(); ++p) {
            std::uint64_t end = p + first.bytes.size();
            if (first.offset && p < *first.offset) continue;
            if (first.depth && end > first.offset.value_or(0) + *first.depth) continue;
            if (!pattern_at(stream, p, first)) continue;
            if (complete_from(stream, rule, 1, end)) fired.emplace(rule.sid, p);
        }
    }
    return fired;
}

// Offline assembly of a segment arrival sequence. Yields the contiguous
// prefix of the stream under the policy's byte-resolution rule, honoring the
// finality of already-contiguous (released) bytes.
inline std::string assemble(const std::vector<Segment>& arrivals, OverlapPolicy policy) {
    std::map<std::uint64_t, char> cells;
    std::uint64_t frontier = 0;
    for (const Segment& seg : arrivals) {
        for (size_t i = 0; i < seg.bytes.size(); ++i) {
            std::uint64_t off = seg.offset + i;
            if (policy == OverlapPolicy::FirstWins) {
                cells.emplace(off, seg.bytes[i]);   // first writer wins
            } else if (off >= frontier) {
                cells[off] = seg.bytes[i];          // overwrite pending only
            }
        }
        while (cells.count(frontier)) ++frontier;   // bytes below are final
    }
    std::string out;
    out.reserve(static_cast<size_t>(frontier));
    for (std::uint64_t off = 0; off < frontier; ++off) out.push_back(cells[off]);
    return out;
}

} // namespace oracle
