#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string_view>
#include <vector>

#include "hostguard/rules.hpp"
#include "hostguard/util.hpp"

namespace hostguard::rules {

// A rule firing: offset is the absolute stream offset where the rule's first
// pattern matched.
struct Fire {
    size_t rule_index;
    std::uint64_t offset;

    bool operator==(const Fire&) const = default;
    auto operator<=>(const Fire&) const = default;
};

// Immutable multi-pattern matcher built from a RuleSet. All content patterns
// are loaded into one Aho-Corasick automaton over case-folded bytes;
// case-sensitive patterns are re-verified against the raw bytes. Rules with
// several patterns are completed by chain states tracked per MatchRun, so a
// rule may fire even when its patterns arrive in different segments.
class CompiledMatcher : public std::enable_shared_from_this<CompiledMatcher> {
public:
    static std::shared_ptr<const CompiledMatcher> compile(const RuleSet& rs,
                                                          std::vector<Cidr> home_nets);

    std::uint64_t version() const { return version_; }
    size_t rule_count() const { return rules_.size(); }
    const Rule& rule(size_t idx) const { return rules_[idx]; }
    size_t max_pattern_len() const { return max_pattern_len_; }
    // Bytes of already-scanned stream that must be retained so a pattern
    // straddling a release boundary is still seen.
    size_t tail_len() const { return max_pattern_len_ > 0 ? max_pattern_len_ - 1 : 0; }
    const std::vector<Cidr>& home_nets() const { return home_nets_; }

    // Which rules may fire for data sent from `sender` to `receiver` under the
    // given class binding. Address variables were resolved at compile time.
    std::vector<bool> eligible_rules(RuleClass cls, const Endpoint& sender,
                                     const Endpoint& receiver) const;
    // Every rule eligible; for direction-less scanning.
    std::vector<bool> all_rules() const { return std::vector<bool>(rules_.size(), true); }

private:
    friend class MatchRun;

    struct PatternRef {
        size_t rule;
        size_t slot;
    };
    struct PatternInfo {
        std::string exact;
        bool nocase = false;
        std::vector<PatternRef> refs;
    };
    struct AcNode {
        std::map<unsigned char, int> next;
        int fail = 0;
        int dict = -1;                // nearest suffix node with output
        std::vector<int> out;         // pattern ids ending here
    };

    CompiledMatcher() = default;
    void build_automaton();

    std::uint64_t version_ = 0;
    std::vector<Rule> rules_;
    std::vector<Cidr> home_nets_;
    std::vector<PatternInfo> patterns_;
    std::vector<std::vector<int>> rule_pattern_ids_;   // [rule][slot] -> pattern id
    std::vector<AcNode> nodes_;
    size_t max_pattern_len_ = 0;
};

// Incremental match state for one (connection, data direction). Feed it each
// released chunk together with the retained tail of the previously scanned
// bytes; it returns rule firings deduplicated per (rule, offset).
class MatchRun {
public:
    MatchRun(std::shared_ptr<const CompiledMatcher> matcher, std::vector<bool> eligible);

    std::vector<Fire> on_bytes(std::string_view tail, std::string_view released,
                               std::uint64_t released_base);

    // Drops partial chains after a reassembly gap; fired pairs stay deduped.
    void reset_for_gap();

    const CompiledMatcher& matcher() const { return *matcher_; }

private:
    // (prev_end, anchor): a partial chain that matched slots 0..k, sorted by
    // prev_end so window constraints become range scans.
    using StateSet = std::set<std::pair<std::uint64_t, std::uint64_t>>;

    void occurrence(size_t rule, size_t slot, std::uint64_t start, std::uint64_t end,
                    std::vector<Fire>& fires);
    void prune_expired(std::uint64_t scan_base);

    std::shared_ptr<const CompiledMatcher> matcher_;
    std::vector<bool> eligible_;
    std::vector<std::vector<StateSet>> chains_;   // chains_[rule][k]
    std::set<std::pair<size_t, std::uint64_t>> fired_;
};

} // namespace hostguard::rules
