#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hostguard/util.hpp"

namespace hostguard::rules {

enum class RuleAction { Alert, Drop };
enum class RuleClass { WebClient, WebServer };
enum class ConnDirection { Outbound, Inbound };

// Category a rule lands in once bound to a live connection.
enum class RuleCategory { ServerInbound, ClientInbound, ServerOutbound, ClientOutbound };

const char* to_string(RuleAction a);
const char* to_string(RuleClass c);
const char* to_string(ConnDirection d);
const char* to_string(RuleCategory c);

// One content option with its positional modifiers. `offset`/`depth` constrain
// the match window absolutely: the match must start at >= offset and end at
// <= offset + depth. `distance`/`within` constrain relative to the end of the
// previous pattern's match: start >= prev_end + distance and end <=
// prev_end + distance + within. Absent modifiers leave that bound open.
struct ContentPattern {
    std::string bytes;                       // raw bytes, non-empty
    bool nocase = false;
    std::optional<std::uint64_t> offset;
    std::optional<std::uint64_t> depth;      // >= bytes.size()
    std::optional<std::uint64_t> distance;   // non-first pattern only
    std::optional<std::uint64_t> within;     // non-first pattern only

    bool operator==(const ContentPattern&) const = default;
};

// Address half of a rule header: any, a literal CIDR, or one of the two
// network variables resolved at compile time.
struct AddressSpec {
    enum class Kind { Any, Cidr, HomeNet, ExternalNet };
    Kind kind = Kind::Any;
    Cidr cidr{};   // valid when kind == Cidr

    bool operator==(const AddressSpec&) const = default;
};

struct PortSpec {
    std::optional<std::uint16_t> port;   // empty = any

    bool matches(std::uint16_t p) const { return !port || *port == p; }
    bool operator==(const PortSpec&) const = default;
};

struct Rule {
    std::uint32_t sid = 0;
    std::uint32_t rev = 0;
    RuleAction action = RuleAction::Alert;
    std::string msg;
    RuleClass rule_class = RuleClass::WebClient;
    int severity = 3;                        // 1..4, 1 most severe
    AddressSpec src_spec, dst_spec;
    PortSpec src_port, dst_port;
    std::vector<ContentPattern> patterns;    // >= 1

    bool operator==(const Rule&) const = default;
};

struct RuleSet {
    std::uint64_t version = 0;
    std::vector<Rule> rules;
};

struct ParseError : std::runtime_error {
    ParseError(std::string message, size_t position)
        : std::runtime_error(std::move(message)), position(position) {}
    size_t position;   // byte offset into the rule line
};

// Per-line failures from parse_ruleset, line numbers are 1-based.
struct RulesetError : std::runtime_error {
    explicit RulesetError(std::vector<std::string> errors);
    std::vector<std::string> errors;
};

Rule parse_rule(std::string_view line);
std::string render_rule(const Rule& rule);

RuleSet parse_ruleset(std::string_view text, std::uint64_t version);
std::string render_ruleset(const RuleSet& rs);

RuleCategory categorize_rule(RuleClass cls, ConnDirection dir);

} // namespace hostguard::rules
