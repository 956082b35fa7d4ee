#include "hostguard/rules.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace hostguard::rules {

const char* to_string(RuleAction a) {
    return a == RuleAction::Alert ? "alert" : "drop";
}

const char* to_string(RuleClass c) {
    return c == RuleClass::WebClient ? "web-client" : "web-server";
}

const char* to_string(ConnDirection d) {
    return d == ConnDirection::Outbound ? "outbound" : "inbound";
}

const char* to_string(RuleCategory c) {
    switch (c) {
        case RuleCategory::ServerInbound: return "server-inbound";
        case RuleCategory::ClientInbound: return "client-inbound";
        case RuleCategory::ServerOutbound: return "server-outbound";
        case RuleCategory::ClientOutbound: return "client-outbound";
    }
    return "?";
}

RuleCategory categorize_rule(RuleClass cls, ConnDirection dir) {
    if (dir == ConnDirection::Inbound) {
        return cls == RuleClass::WebServer ? RuleCategory::ServerInbound
                                           : RuleCategory::ClientInbound;
    }
    return cls == RuleClass::WebServer ? RuleCategory::ServerOutbound
                                       : RuleCategory::ClientOutbound;
}

RulesetError::RulesetError(std::vector<std::string> errs)
    : std::runtime_error(errs.empty() ? "ruleset error"
                                      : errs.front() + (errs.size() > 1 ? " (+more)" : "")),
      errors(std::move(errs)) {}

namespace {

// Cursor over one rule line, tracking position for error reporting.
class LineCursor {
public:
    explicit LineCursor(std::string_view s) : s_(s) {}

    size_t pos() const { return pos_; }
    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return s_[pos_]; }
    char take() { return s_[pos_++]; }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg + " at column " + std::to_string(pos_ + 1), pos_);
    }

    std::string token() {
        skip_ws();
        size_t start = pos_;
        while (!eof() && peek() != ' ' && peek() != '\t' && peek() != '(') ++pos_;
        if (pos_ == start) fail("expected token");
        return std::string(s_.substr(start, pos_ - start));
    }

    void expect(char c, const char* what) {
        skip_ws();
        if (eof() || peek() != c) fail(std::string("expected ") + what);
        ++pos_;
    }

private:
    std::string_view s_;
    size_t pos_ = 0;
};

bool is_literal_content_byte(unsigned char c) {
    return c >= 0x20 && c <= 0x7E && c != '"' && c != '\\' && c != '|';
}

AddressSpec parse_address_spec(LineCursor& cur, const std::string& tok) {
    AddressSpec spec;
    if (tok == "any") {
        spec.kind = AddressSpec::Kind::Any;
    } else if (tok == "$HOME_NET") {
        spec.kind = AddressSpec::Kind::HomeNet;
    } else if (tok == "$EXTERNAL_NET") {
        spec.kind = AddressSpec::Kind::ExternalNet;
    } else if (auto cidr = Cidr::parse(tok)) {
        spec.kind = AddressSpec::Kind::Cidr;
        spec.cidr = *cidr;
    } else {
        cur.fail("bad address spec '" + tok + "'");
    }
    return spec;
}

PortSpec parse_port_spec(LineCursor& cur, const std::string& tok) {
    PortSpec spec;
    if (tok == "any") return spec;
    auto v = parse_u64(tok);
    if (!v || *v > 65535) cur.fail("bad port '" + tok + "'");
    spec.port = static_cast<std::uint16_t>(*v);
    return spec;
}

// Quoted content value with pipe-hex blocks, e.g. "GET |0D 0A|".
std::string parse_content_value(LineCursor& cur) {
    cur.expect('"', "'\"'");
    std::string bytes;
    bool hex_mode = false;
    while (true) {
        if (cur.eof()) cur.fail("unterminated content string");
        char c = cur.take();
        if (hex_mode) {
            if (c == '|') {
                hex_mode = false;
            } else if (c == ' ') {
                continue;
            } else {
                if (cur.eof()) cur.fail("truncated hex pair");
                char c2 = cur.take();
                auto decoded = hex_decode(std::string{c, c2});
                if (!decoded) cur.fail("bad hex pair in content");
                bytes += *decoded;
            }
        } else {
            if (c == '"') break;
            if (c == '|') {
                hex_mode = true;
            } else if (is_literal_content_byte(static_cast<unsigned char>(c))) {
                bytes.push_back(c);
            } else {
                cur.fail("content byte must be hex-escaped");
            }
        }
    }
    if (hex_mode) cur.fail("unterminated hex block in content");
    if (bytes.empty()) cur.fail("empty content");
    return bytes;
}

std::string parse_msg_value(LineCursor& cur) {
    cur.expect('"', "'\"'");
    std::string msg;
    while (true) {
        if (cur.eof()) cur.fail("unterminated msg string");
        char c = cur.take();
        if (c == '"') break;
        msg.push_back(c);
    }
    return msg;
}

std::uint64_t parse_numeric_value(LineCursor& cur, const std::string& name) {
    cur.skip_ws();
    std::string digits;
    while (!cur.eof() && cur.peek() >= '0' && cur.peek() <= '9') digits.push_back(cur.take());
    auto v = parse_u64(digits);
    if (!v) cur.fail("bad numeric value for " + name);
    return *v;
}

} // namespace

Rule parse_rule(std::string_view line) {
    LineCursor cur(line);
    Rule rule;

    std::string action = cur.token();
    if (action == "alert") {
        rule.action = RuleAction::Alert;
    } else if (action == "drop") {
        rule.action = RuleAction::Drop;
    } else {
        cur.fail("unknown action '" + action + "'");
    }

    std::string proto = cur.token();
    if (proto != "tcp") cur.fail("unsupported protocol '" + proto + "'");

    rule.src_spec = parse_address_spec(cur, cur.token());
    rule.src_port = parse_port_spec(cur, cur.token());
    std::string arrow = cur.token();
    if (arrow != "->") cur.fail("expected '->'");
    rule.dst_spec = parse_address_spec(cur, cur.token());
    rule.dst_port = parse_port_spec(cur, cur.token());

    cur.expect('(', "'('");

    bool have_msg = false, have_classtype = false, have_sid = false, have_rev = false,
         have_severity = false;

    while (true) {
        cur.skip_ws();
        if (cur.eof()) cur.fail("unterminated option list");
        if (cur.peek() == ')') {
            cur.take();
            break;
        }

        size_t name_pos = cur.pos();
        std::string name;
        while (!cur.eof() && (std::isalnum(static_cast<unsigned char>(cur.peek())) || cur.peek() == '_')) {
            name.push_back(cur.take());
        }
        if (name.empty()) cur.fail("expected option name");

        auto mark_once = [&](bool& flag) {
            if (flag) {
                throw ParseError("duplicate option '" + name + "' at column " +
                                     std::to_string(name_pos + 1),
                                 name_pos);
            }
            flag = true;
        };
        auto current_pattern = [&]() -> ContentPattern& {
            if (rule.patterns.empty()) {
                throw ParseError("modifier '" + name + "' before any content at column " +
                                     std::to_string(name_pos + 1),
                                 name_pos);
            }
            return rule.patterns.back();
        };

        if (name == "nocase") {
            auto& pat = current_pattern();
            if (pat.nocase) cur.fail("duplicate option 'nocase'");
            pat.nocase = true;
            cur.expect(';', "';'");
            continue;
        }

        cur.expect(':', "':'");

        if (name == "msg") {
            mark_once(have_msg);
            rule.msg = parse_msg_value(cur);
        } else if (name == "content") {
            rule.patterns.push_back(ContentPattern{parse_content_value(cur), false, {}, {}, {}, {}});
        } else if (name == "offset") {
            auto& pat = current_pattern();
            if (pat.offset) cur.fail("duplicate option 'offset'");
            pat.offset = parse_numeric_value(cur, name);
        } else if (name == "depth") {
            auto& pat = current_pattern();
            if (pat.depth) cur.fail("duplicate option 'depth'");
            pat.depth = parse_numeric_value(cur, name);
            if (*pat.depth == 0) cur.fail("depth must be positive");
        } else if (name == "distance") {
            auto& pat = current_pattern();
            if (pat.distance) cur.fail("duplicate option 'distance'");
            if (rule.patterns.size() == 1) cur.fail("distance not allowed on first content");
            pat.distance = parse_numeric_value(cur, name);
        } else if (name == "within") {
            auto& pat = current_pattern();
            if (pat.within) cur.fail("duplicate option 'within'");
            if (rule.patterns.size() == 1) cur.fail("within not allowed on first content");
            pat.within = parse_numeric_value(cur, name);
            if (*pat.within == 0) cur.fail("within must be positive");
        } else if (name == "classtype") {
            mark_once(have_classtype);
            std::string value;
            cur.skip_ws();
            while (!cur.eof() && cur.peek() != ';' && cur.peek() != ' ') value.push_back(cur.take());
            if (value == "web-client") {
                rule.rule_class = RuleClass::WebClient;
            } else if (value == "web-server") {
                rule.rule_class = RuleClass::WebServer;
            } else {
                cur.fail("unknown classtype '" + value + "'");
            }
        } else if (name == "sid") {
            mark_once(have_sid);
            auto v = parse_numeric_value(cur, name);
            if (v == 0 || v > 0xFFFFFFFFull) cur.fail("sid out of range");
            rule.sid = static_cast<std::uint32_t>(v);
        } else if (name == "rev") {
            mark_once(have_rev);
            auto v = parse_numeric_value(cur, name);
            if (v == 0 || v > 0xFFFFFFFFull) cur.fail("rev out of range");
            rule.rev = static_cast<std::uint32_t>(v);
        } else if (name == "severity") {
            mark_once(have_severity);
            auto v = parse_numeric_value(cur, name);
            if (v < 1 || v > 4) cur.fail("severity must be 1..4");
            rule.severity = static_cast<int>(v);
        } else {
            throw ParseError("unknown option '" + name + "' at column " +
                                 std::to_string(name_pos + 1),
                             name_pos);
        }
        cur.expect(';', "';'");
    }

    cur.skip_ws();
    if (!cur.eof()) cur.fail("trailing data after rule");

    std::vector<std::string> missing;
    if (!have_msg) missing.push_back("msg");
    if (rule.patterns.empty()) missing.push_back("content");
    if (!have_classtype) missing.push_back("classtype");
    if (!have_sid) missing.push_back("sid");
    if (!have_rev) missing.push_back("rev");
    if (!missing.empty()) {
        std::string joined;
        for (size_t i = 0; i < missing.size(); ++i) {
            if (i > 0) joined += " and ";
            joined += missing[i];
        }
        throw ParseError("missing " + joined, line.size());
    }

    for (const auto& pat : rule.patterns) {
        if (pat.depth && *pat.depth < pat.bytes.size()) {
            throw ParseError("depth " + std::to_string(*pat.depth) + " shorter than content (" +
                                 std::to_string(pat.bytes.size()) + " bytes)",
                             line.size());
        }
    }
    return rule;
}

namespace {

std::string render_content_bytes(const std::string& bytes) {
    std::string out;
    bool hex_mode = false;
    for (unsigned char c : bytes) {
        if (is_literal_content_byte(c)) {
            if (hex_mode) {
                out.push_back('|');
                hex_mode = false;
            }
            out.push_back(static_cast<char>(c));
        } else {
            if (!hex_mode) {
                out.push_back('|');
                hex_mode = true;
            } else {
                out.push_back(' ');
            }
            out += hex_encode(std::string_view(reinterpret_cast<const char*>(&c), 1));
        }
    }
    if (hex_mode) out.push_back('|');
    return out;
}

std::string render_address_spec(const AddressSpec& spec) {
    switch (spec.kind) {
        case AddressSpec::Kind::Any: return "any";
        case AddressSpec::Kind::HomeNet: return "$HOME_NET";
        case AddressSpec::Kind::ExternalNet: return "$EXTERNAL_NET";
        case AddressSpec::Kind::Cidr: return spec.cidr.to_string();
    }
    return "any";
}

std::string render_port_spec(const PortSpec& spec) {
    return spec.port ? std::to_string(*spec.port) : "any";
}

} // namespace

std::string render_rule(const Rule& rule) {
    std::ostringstream out;
    out << to_string(rule.action) << " tcp " << render_address_spec(rule.src_spec) << ' '
        << render_port_spec(rule.src_port) << " -> " << render_address_spec(rule.dst_spec) << ' '
        << render_port_spec(rule.dst_port) << " (msg:\"" << rule.msg << "\";";
    for (const auto& pat : rule.patterns) {
        out << " content:\"" << render_content_bytes(pat.bytes) << "\";";
        if (pat.nocase) out << " nocase;";
        if (pat.offset) out << " offset:" << *pat.offset << ';';
        if (pat.depth) out << " depth:" << *pat.depth << ';';
        if (pat.distance) out << " distance:" << *pat.distance << ';';
        if (pat.within) out << " within:" << *pat.within << ';';
    }
    out << " classtype:" << to_string(rule.rule_class) << "; sid:" << rule.sid
        << "; rev:" << rule.rev << "; severity:" << rule.severity << ";)";
    return out.str();
}

RuleSet parse_ruleset(std::string_view text, std::uint64_t version) {
    RuleSet rs;
    rs.version = version;
    std::vector<std::string> errors;
    std::map<std::uint32_t, size_t> sid_lines;

    size_t lineno = 0;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        std::string_view raw = end == std::string_view::npos ? text.substr(start)
                                                             : text.substr(start, end - start);
        ++lineno;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        std::string line = trim(raw);
        if (!line.empty() && line[0] != '#') {
            try {
                Rule rule = parse_rule(line);
                auto [it, inserted] = sid_lines.emplace(rule.sid, lineno);
                if (!inserted) {
                    errors.push_back("duplicate sid " + std::to_string(rule.sid) + " on lines " +
                                     std::to_string(it->second) + " and " + std::to_string(lineno));
                } else {
                    rs.rules.push_back(std::move(rule));
                }
            } catch (const ParseError& e) {
                errors.push_back("line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }

    if (!errors.empty()) throw RulesetError(std::move(errors));
    return rs;
}

std::string render_ruleset(const RuleSet& rs) {
    std::string out;
    for (const auto& rule : rs.rules) {
        out += render_rule(rule);
        out.push_back('\n');
    }
    return out;
}

} // namespace hostguard::rules
