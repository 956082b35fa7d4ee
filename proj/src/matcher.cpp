#include "hostguard/matcher.hpp"

#include <deque>

namespace hostguard::rules {

std::shared_ptr<const CompiledMatcher> CompiledMatcher::compile(const RuleSet& rs,
                                                                std::vector<Cidr> home_nets) {
    auto m = std::shared_ptr<CompiledMatcher>(new CompiledMatcher());
    m->version_ = rs.version;
    m->rules_ = rs.rules;
    m->home_nets_ = std::move(home_nets);

    std::map<std::pair<std::string, bool>, int> pattern_ids;
    m->rule_pattern_ids_.resize(m->rules_.size());
    for (size_t r = 0; r < m->rules_.size(); ++r) {
        const Rule& rule = m->rules_[r];
        for (size_t slot = 0; slot < rule.patterns.size(); ++slot) {
            const auto& pat = rule.patterns[slot];
            std::string key_bytes = pat.nocase ? fold_ascii(pat.bytes) : pat.bytes;
            auto [it, inserted] =
                pattern_ids.emplace(std::make_pair(key_bytes, pat.nocase),
                                    static_cast<int>(m->patterns_.size()));
            if (inserted) {
                PatternInfo info;
                info.exact = pat.bytes;
                info.nocase = pat.nocase;
                m->patterns_.push_back(std::move(info));
            }
            m->patterns_[it->second].refs.push_back(PatternRef{r, slot});
            m->rule_pattern_ids_[r].push_back(it->second);
            m->max_pattern_len_ = std::max(m->max_pattern_len_, pat.bytes.size());
        }
    }
    m->build_automaton();
    return m;
}

void CompiledMatcher::build_automaton() {
    nodes_.clear();
    nodes_.emplace_back();   // root

    for (size_t pid = 0; pid < patterns_.size(); ++pid) {
        const auto& info = patterns_[pid];
        int cur = 0;
        for (unsigned char raw : info.exact) {
            unsigned char c = fold_byte(raw);
            auto it = nodes_[cur].next.find(c);
            if (it == nodes_[cur].next.end()) {
                nodes_.emplace_back();
                it = nodes_[cur].next.emplace(c, static_cast<int>(nodes_.size() - 1)).first;
            }
            cur = it->second;
        }
        nodes_[cur].out.push_back(static_cast<int>(pid));
    }

    std::deque<int> queue;
    for (auto& [c, child] : nodes_[0].next) {
        nodes_[child].fail = 0;
        queue.push_back(child);
    }
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        int fu = nodes_[u].fail;
        nodes_[u].dict = nodes_[fu].out.empty() ? nodes_[fu].dict : fu;
        for (auto& [c, v] : nodes_[u].next) {
            int f = fu;
            while (f != 0 && !nodes_[f].next.count(c)) f = nodes_[f].fail;
            auto it = nodes_[f].next.find(c);
            nodes_[v].fail = (it != nodes_[f].next.end() && it->second != v) ? it->second : 0;
            queue.push_back(v);
        }
    }
}

namespace {

bool address_matches(const AddressSpec& spec, const std::optional<std::uint32_t>& ip,
                     const std::vector<Cidr>& home_nets) {
    switch (spec.kind) {
        case AddressSpec::Kind::Any:
            return true;
        case AddressSpec::Kind::Cidr:
            return ip && spec.cidr.contains(*ip);
        case AddressSpec::Kind::HomeNet:
            if (!ip) return false;
            for (const auto& net : home_nets)
                if (net.contains(*ip)) return true;
            return false;
        case AddressSpec::Kind::ExternalNet:
            if (!ip) return false;
            for (const auto& net : home_nets)
                if (net.contains(*ip)) return false;
            return true;
    }
    return false;
}

} // namespace

std::vector<bool> CompiledMatcher::eligible_rules(RuleClass cls, const Endpoint& sender,
                                                  const Endpoint& receiver) const {
    std::vector<bool> out(rules_.size(), false);
    auto sender_ip = parse_ipv4(sender.ip);
    auto receiver_ip = parse_ipv4(receiver.ip);
    for (size_t r = 0; r < rules_.size(); ++r) {
        const Rule& rule = rules_[r];
        if (rule.rule_class != cls) continue;
        if (!rule.src_port.matches(sender.port) || !rule.dst_port.matches(receiver.port)) continue;
        if (!address_matches(rule.src_spec, sender_ip, home_nets_)) continue;
        if (!address_matches(rule.dst_spec, receiver_ip, home_nets_)) continue;
        out[r] = true;
    }
    return out;
}

MatchRun::MatchRun(std::shared_ptr<const CompiledMatcher> matcher, std::vector<bool> eligible)
    : matcher_(std::move(matcher)), eligible_(std::move(eligible)) {
    chains_.resize(matcher_->rules_.size());
    for (size_t r = 0; r < matcher_->rules_.size(); ++r) {
        size_t n = matcher_->rules_[r].patterns.size();
        chains_[r].resize(n > 1 ? n - 1 : 0);
    }
}

void MatchRun::reset_for_gap() {
    for (auto& per_rule : chains_)
        for (auto& states : per_rule) states.clear();
}

void MatchRun::occurrence(size_t r, size_t slot, std::uint64_t start, std::uint64_t end,
                          std::vector<Fire>& fires) {
    const Rule& rule = matcher_->rules_[r];
    const ContentPattern& pat = rule.patterns[slot];

    if (pat.offset && start < *pat.offset) return;
    if (pat.depth && end > pat.offset.value_or(0) + *pat.depth) return;

    const size_t last = rule.patterns.size() - 1;
    auto fire = [&](std::uint64_t anchor) {
        if (fired_.emplace(r, anchor).second) fires.push_back(Fire{r, anchor});
    };

    if (slot == 0) {
        if (last == 0) {
            fire(start);
        } else if (!fired_.count({r, start})) {
            chains_[r][0].insert({end, start});
        }
        return;
    }

    const std::uint64_t dist = pat.distance.value_or(0);
    if (start < dist) return;
    const std::uint64_t hi = start - dist;
    std::uint64_t lo = 0;
    if (pat.within) {
        std::uint64_t window = dist + *pat.within;
        lo = end > window ? end - window : 0;
    }

    StateSet& prev = chains_[r][slot - 1];
    // occurrence ends of this slot only grow, so states below lo are dead
    if (pat.within) prev.erase(prev.begin(), prev.lower_bound({lo, 0}));

    // A state advanced now would, on a later occurrence of this slot, only
    // yield a larger prev_end; that extra state matters solely to a within
    // window downstream. Otherwise the state can be consumed.
    const bool pop_safe = slot == last || !rule.patterns[slot + 1].within;

    auto it = prev.lower_bound({lo, 0});
    while (it != prev.end() && it->first <= hi) {
        std::uint64_t anchor = it->second;
        bool dead;
        if (fired_.count({r, anchor})) {
            dead = true;   // already fired for this anchor, chain is moot
        } else if (slot == last) {
            fire(anchor);
            dead = true;
        } else {
            chains_[r][slot].insert({end, anchor});
            dead = pop_safe;
        }
        it = dead ? prev.erase(it) : std::next(it);
    }
}

void MatchRun::prune_expired(std::uint64_t scan_base) {
    // States only feed occurrences ending after scan_base; drop anything whose
    // within window closed before that.
    for (size_t r = 0; r < chains_.size(); ++r) {
        const Rule& rule = matcher_->rules_[r];
        for (size_t slot = 1; slot < rule.patterns.size(); ++slot) {
            const ContentPattern& pat = rule.patterns[slot];
            if (!pat.within) continue;
            std::uint64_t window = pat.distance.value_or(0) + *pat.within;
            if (scan_base <= window) continue;
            StateSet& states = chains_[r][slot - 1];
            states.erase(states.begin(), states.lower_bound({scan_base - window, 0}));
        }
    }
}

std::vector<Fire> MatchRun::on_bytes(std::string_view tail, std::string_view released,
                                     std::uint64_t released_base) {
    std::vector<Fire> fires;
    if (matcher_->nodes_.size() <= 1) return fires;   // no patterns
    if (released.empty()) return fires;

    std::string buf;
    buf.reserve(tail.size() + released.size());
    buf.append(tail);
    buf.append(released);
    const std::uint64_t base = released_base - tail.size();
    prune_expired(base);

    const auto& nodes = matcher_->nodes_;
    int state = 0;
    for (size_t i = 0; i < buf.size(); ++i) {
        unsigned char c = fold_byte(static_cast<unsigned char>(buf[i]));
        while (state != 0 && !nodes[state].next.count(c)) state = nodes[state].fail;
        auto it = nodes[state].next.find(c);
        state = it == nodes[state].next.end() ? 0 : it->second;

        std::uint64_t end_abs = base + i + 1;
        if (end_abs <= released_base) continue;   // entirely inside the retained tail

        for (int n = nodes[state].out.empty() ? nodes[state].dict : state; n != -1;
             n = nodes[n].dict) {
            for (int pid : nodes[n].out) {
                const auto& info = matcher_->patterns_[pid];
                size_t len = info.exact.size();
                size_t start_idx = i + 1 - len;
                if (!info.nocase &&
                    info.exact.compare(0, len, buf, start_idx, len) != 0) {
                    continue;
                }
                std::uint64_t start_abs = end_abs - len;
                for (const auto& ref : info.refs) {
                    if (!eligible_[ref.rule]) continue;
                    occurrence(ref.rule, ref.slot, start_abs, end_abs, fires);
                }
            }
        }
    }
    return fires;
}

} // namespace hostguard::rules
