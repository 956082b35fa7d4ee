#include "hostguard/wire.hpp"

#include <array>

#include "hostguard/util.hpp"
#include "hostguard/version.hpp"

namespace hostguard::wire {

const char* to_string(EventKindCode k) {
    switch (k) {
        case EventKindCode::ICV: return "ICV";
        case EventKindCode::ISV: return "ISV";
        case EventKindCode::ICA: return "ICA";
        case EventKindCode::ISA: return "ISA";
    }
    return "?";
}

std::optional<EventKindCode> event_kind_from_string(std::string_view s) {
    if (s == "ICV") return EventKindCode::ICV;
    if (s == "ISV") return EventKindCode::ISV;
    if (s == "ICA") return EventKindCode::ICA;
    if (s == "ISA") return EventKindCode::ISA;
    return std::nullopt;
}

bool kind_quarantines(EventKindCode k) {
    return k == EventKindCode::ICA || k == EventKindCode::ISA;
}

std::string escape_value(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (unsigned char c : raw) {
        switch (c) {
            case '%': out += "%25"; break;
            case '\n': out += "%0A"; break;
            case '\r': out += "%0D"; break;
            case '=': out += "%3D"; break;
            case '|': out += "%7C"; break;
            default: out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

std::optional<std::string> unescape_value(std::string_view escaped) {
    std::string out;
    out.reserve(escaped.size());
    for (size_t i = 0; i < escaped.size(); ++i) {
        char c = escaped[i];
        if (c == '%') {
            if (i + 3 > escaped.size()) return std::nullopt;
            auto decoded = hex_decode(escaped.substr(i + 1, 2));
            if (!decoded) return std::nullopt;
            out += *decoded;
            i += 2;
        } else if (c == '=' || c == '|' || c == '\r' || c == '\n') {
            return std::nullopt;   // encoder always escapes these
        } else {
            out.push_back(c);
        }
    }
    return out;
}

namespace {

constexpr std::array<const char*, 18> kFieldOrder = {
    "seq", "host", "ts", "conn", "proto", "src", "dst", "realsrc", "app",
    "appver", "sid", "rev", "msg", "sev", "kind", "quar", "act", "off",
};

} // namespace

std::string encode_event(const EventRecord& ev) {
    std::string msg_escaped = escape_value(ev.msg);

    auto assemble = [&](std::string_view msg_part, bool trunc) {
        std::string out;
        out.reserve(256 + msg_part.size());
        out += kWireMagic;
        out += '\n';
        out += "seq=" + std::to_string(ev.seqno) + '\n';
        out += "host=" + escape_value(ev.host_id) + '\n';
        out += "ts=" + std::to_string(ev.ts_ms) + '\n';
        out += "conn=" + escape_value(ev.conn_id) + '\n';
        out += "proto=tcp\n";
        out += "src=" + escape_value(ev.src) + '\n';
        out += "dst=" + escape_value(ev.dst) + '\n';
        out += "realsrc=" + (ev.real_src ? escape_value(*ev.real_src) : std::string("-")) + '\n';
        out += "app=" + escape_value(ev.app_name) + '\n';
        out += "appver=" + escape_value(ev.app_version) + '\n';
        out += "sid=" + std::to_string(ev.sid) + '\n';
        out += "rev=" + std::to_string(ev.rev) + '\n';
        out += "msg=";
        out += msg_part;
        out += '\n';
        out += "sev=" + std::to_string(ev.severity) + '\n';
        out += std::string("kind=") + to_string(ev.kind) + '\n';
        out += "quar=" + std::string(ev.quarantine ? "1" : "0") + '\n';
        out += std::string("act=") + ev.action + '\n';
        out += "off=" + std::to_string(ev.match_offset) + '\n';
        if (trunc) out += "trunc=1\n";
        return out;
    };

    std::string full = assemble(msg_escaped, ev.truncated);
    if (full.size() <= kMaxDatagramBytes) return full;

    const std::size_t overhead = full.size() - msg_escaped.size() +
                                 (ev.truncated ? 0 : std::string_view("trunc=1\n").size());
    std::size_t budget = overhead >= kMaxDatagramBytes ? 0 : kMaxDatagramBytes - overhead;
    std::size_t cut = std::min(budget, msg_escaped.size());
    // never split a %HH escape
    while (cut > 0 && msg_escaped[cut - 1] == '%') --cut;
    while (cut > 1 && msg_escaped[cut - 2] == '%') cut -= 2;
    return assemble(std::string_view(msg_escaped).substr(0, cut), true);
}

DecodeResult decode_event(std::string_view datagram) {
    auto reject = [](std::string reason) { return DecodeResult{std::nullopt, std::move(reason)}; };

    if (datagram.empty() || datagram.back() != '\n') return reject("missing trailing newline");
    datagram.remove_suffix(1);
    auto lines = split_char(datagram, '\n');
    if (lines.empty()) return reject("empty datagram");
    if (lines[0] != kWireMagic) {
        if (lines[0].rfind("HGEV", 0) == 0) return reject("unsupported version");
        return reject("bad magic");
    }

    std::array<std::string, kFieldOrder.size()> values;
    size_t expect = 0;
    size_t li = 1;
    bool truncated = false;
    for (; li < lines.size(); ++li) {
        const std::string& line = lines[li];
        auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) return reject("malformed line '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string raw = line.substr(eq + 1);

        if (expect < kFieldOrder.size() && key == kFieldOrder[expect]) {
            auto value = unescape_value(raw);
            if (!value) return reject("unescapable value for key " + key);
            values[expect] = std::move(*value);
            ++expect;
            continue;
        }
        for (size_t k = 0; k < expect; ++k) {
            if (key == kFieldOrder[k]) return reject("duplicate key " + key);
        }
        if (expect < kFieldOrder.size()) return reject("missing key " + std::string(kFieldOrder[expect]));
        if (key == "trunc") {
            if (truncated) return reject("duplicate key trunc");
            if (raw != "1") return reject("bad trunc value");
            truncated = true;
            continue;
        }
        return reject("unknown key " + key);
    }
    if (expect < kFieldOrder.size()) return reject("missing key " + std::string(kFieldOrder[expect]));

    EventRecord ev;
    auto seq = parse_u64(values[0]);
    if (!seq || *seq == 0) return reject("bad seq");
    ev.seqno = *seq;
    ev.host_id = values[1];
    if (ev.host_id.empty()) return reject("empty host");
    auto ts = parse_i64(values[2]);
    if (!ts || *ts < 0) return reject("bad ts");
    ev.ts_ms = *ts;
    ev.conn_id = values[3];
    if (ev.conn_id.empty()) return reject("empty conn");
    if (values[4] != "tcp") return reject("unsupported proto");
    ev.src = values[5];
    ev.dst = values[6];
    if (ev.src.empty() || ev.dst.empty()) return reject("empty src/dst");
    if (values[7] != "-") ev.real_src = values[7];
    ev.app_name = values[8];
    ev.app_version = values[9];
    auto sid = parse_u64(values[10]);
    if (!sid || *sid == 0 || *sid > 0xFFFFFFFFull) return reject("bad sid");
    ev.sid = static_cast<std::uint32_t>(*sid);
    auto rev = parse_u64(values[11]);
    if (!rev || *rev == 0 || *rev > 0xFFFFFFFFull) return reject("bad rev");
    ev.rev = static_cast<std::uint32_t>(*rev);
    ev.msg = values[12];
    auto sev = parse_u64(values[13]);
    if (!sev || *sev < 1 || *sev > 4) return reject("bad sev");
    ev.severity = static_cast<int>(*sev);
    auto kind = event_kind_from_string(values[14]);
    if (!kind) return reject("bad kind");
    ev.kind = *kind;
    if (values[15] != "0" && values[15] != "1") return reject("bad quar");
    ev.quarantine = values[15] == "1";
    if (ev.quarantine != kind_quarantines(ev.kind)) return reject("quar inconsistent with kind");
    if (values[16] != "alert" && values[16] != "drop") return reject("bad act");
    ev.action = values[16];
    auto off = parse_u64(values[17]);
    if (!off) return reject("bad off");
    ev.match_offset = *off;
    ev.truncated = truncated;
    return DecodeResult{std::move(ev), {}};
}

std::vector<std::string> split_journal(std::string_view journal) {
    std::vector<std::string> out;
    size_t start = 0;
    std::string current;
    while (start < journal.size()) {
        size_t nl = journal.find('\n', start);
        size_t end = nl == std::string_view::npos ? journal.size() : nl;
        std::string_view line = journal.substr(start, end - start);
        if (line == kWireMagic) {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
        }
        if (!current.empty() || line == kWireMagic) {
            current.append(line);
            current.push_back('\n');
        }
        start = end + 1;
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

} // namespace hostguard::wire
