#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "hostguard/rules.hpp"

using namespace hostguard;
using namespace hostguard::rules;

namespace {

const char* kIeRule =
    "alert tcp $EXTERNAL_NET any -> $HOME_NET any (msg:\"Possible Microsoft Internet Explorer "
    "URI Validation Remote Code Execution Attempt\"; content:\"|75 72 6C 2E 64 6C 6C|\"; "
    "classtype:web-client; sid:1001; rev:1;)";

} // namespace

TEST_CASE("parse_rule handles a hex-content web-client rule") {
    Rule r = parse_rule(kIeRule);
    CHECK(r.sid == 1001);
    CHECK(r.rev == 1);
    CHECK(r.action == RuleAction::Alert);
    CHECK(r.rule_class == RuleClass::WebClient);
    CHECK(r.severity == 3);   // default
    REQUIRE(r.patterns.size() == 1);
    CHECK(r.patterns[0].bytes == "url.dll");
    CHECK(r.patterns[0].bytes.size() == 7);
    CHECK(r.src_spec.kind == AddressSpec::Kind::ExternalNet);
    CHECK(r.dst_spec.kind == AddressSpec::Kind::HomeNet);
    CHECK(!r.src_port.port);
}

TEST_CASE("parse_rule handles a plain web-server rule") {
    Rule r = parse_rule(
        "alert tcp any any -> any any (msg:\"dt\"; content:\"../\"; classtype:web-server; "
        "sid:2001; rev:1;)");
    CHECK(r.sid == 2001);
    CHECK(r.rule_class == RuleClass::WebServer);
    CHECK(r.patterns[0].bytes == "../");
}

TEST_CASE("parse_rule reports missing classtype and content") {
    try {
        parse_rule("alert tcp any any -> any any (msg:\"x\"; sid:3; rev:1;)");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        std::string what = e.what();
        CHECK(what.find("classtype") != std::string::npos);
        CHECK(what.find("content") != std::string::npos);
    }
}

TEST_CASE("parse_rule syntax and option errors") {
    CHECK_THROWS_AS(parse_rule("alert udp any any -> any any (msg:\"x\"; content:\"a\"; "
                               "classtype:web-client; sid:1; rev:1;)"),
                    ParseError);
    CHECK_THROWS_AS(parse_rule("pass tcp any any -> any any (msg:\"x\"; content:\"a\"; "
                               "classtype:web-client; sid:1; rev:1;)"),
                    ParseError);
    // duplicate option
    CHECK_THROWS_AS(parse_rule("alert tcp any any -> any any (msg:\"x\"; msg:\"y\"; "
                               "content:\"a\"; classtype:web-client; sid:1; rev:1;)"),
                    ParseError);
    // unknown classtype
    CHECK_THROWS_AS(parse_rule("alert tcp any any -> any any (msg:\"x\"; content:\"a\"; "
                               "classtype:trojan; sid:1; rev:1;)"),
                    ParseError);
    // error position is reported
    try {
        parse_rule("alert tcp any any -> any any (msg:\"x\"; content:\"a\"; "
                   "classtype:trojan; sid:1; rev:1;)");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("column") != std::string::npos);
    }
    // modifiers restricted to non-first patterns
    CHECK_THROWS_AS(parse_rule("alert tcp any any -> any any (msg:\"x\"; content:\"ab\"; "
                               "distance:1; classtype:web-client; sid:1; rev:1;)"),
                    ParseError);
    // depth must cover the content
    CHECK_THROWS_AS(parse_rule("alert tcp any any -> any any (msg:\"x\"; content:\"abcd\"; "
                               "depth:2; classtype:web-client; sid:1; rev:1;)"),
                    ParseError);
    // sid/rev must be positive
    CHECK_THROWS_AS(parse_rule("alert tcp any any -> any any (msg:\"x\"; content:\"a\"; "
                               "classtype:web-client; sid:0; rev:1;)"),
                    ParseError);
    // content may not hold raw specials
    CHECK_THROWS_AS(parse_rule("alert tcp any any -> any any (msg:\"x\"; content:\"a\\b\"; "
                               "classtype:web-client; sid:1; rev:1;)"),
                    ParseError);
}

TEST_CASE("render_rule emits canonical option order and escaping") {
    Rule r = parse_rule(kIeRule);
    std::string rendered = render_rule(r);
    CHECK(rendered.find("content:\"url.dll\";") != std::string::npos);
    CHECK(parse_rule(rendered) == r);

    SUBCASE("nocase follows its content") {
        Rule n = parse_rule(
            "alert tcp any any -> any any (msg:\"m\"; content:\"GET\"; nocase; "
            "classtype:web-server; sid:7; rev:2;)");
        std::string out = render_rule(n);
        CHECK(out.find("content:\"GET\"; nocase;") != std::string::npos);
    }
    SUBCASE("non-printable bytes render as pipe hex") {
        Rule n = parse_rule(
            "alert tcp any any -> any any (msg:\"m\"; content:\"a|0A|b\"; "
            "classtype:web-server; sid:8; rev:1;)");
        std::string out = render_rule(n);
        CHECK(out.find("content:\"a|0A|b\";") != std::string::npos);
        CHECK(n.patterns[0].bytes == std::string("a\nb"));
    }
}

namespace {

Rule random_rule(std::mt19937& rng, std::uint32_t sid) {
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> byte_dist(0, 255);
    std::uniform_int_distribution<int> len_dist(1, 6);
    std::uniform_int_distribution<int> npat_dist(1, 3);
    std::uniform_int_distribution<int> small(0, 12);

    Rule r;
    r.sid = sid;
    r.rev = 1 + static_cast<std::uint32_t>(small(rng));
    r.action = coin(rng) ? RuleAction::Alert : RuleAction::Drop;
    r.msg = "rand rule " + std::to_string(sid);
    r.rule_class = coin(rng) ? RuleClass::WebClient : RuleClass::WebServer;
    r.severity = 1 + small(rng) % 4;
    switch (small(rng) % 4) {
        case 0: r.src_spec.kind = AddressSpec::Kind::Any; break;
        case 1: r.src_spec.kind = AddressSpec::Kind::HomeNet; break;
        case 2: r.src_spec.kind = AddressSpec::Kind::ExternalNet; break;
        default:
            r.src_spec.kind = AddressSpec::Kind::Cidr;
            r.src_spec.cidr = *Cidr::parse("192.0.2.0/24");
    }
    r.dst_spec.kind = AddressSpec::Kind::Any;
    if (coin(rng)) r.src_port.port = static_cast<std::uint16_t>(1024 + small(rng));
    int npat = npat_dist(rng);
    for (int i = 0; i < npat; ++i) {
        ContentPattern pat;
        int len = len_dist(rng);
        for (int b = 0; b < len; ++b) pat.bytes.push_back(static_cast<char>(byte_dist(rng)));
        pat.nocase = coin(rng) != 0;
        if (coin(rng)) pat.offset = small(rng);
        if (coin(rng)) pat.depth = pat.bytes.size() + small(rng);
        if (i > 0) {
            if (coin(rng)) pat.distance = small(rng);
            if (coin(rng)) pat.within = pat.bytes.size() + small(rng);
        }
        r.patterns.push_back(std::move(pat));
    }
    return r;
}

} // namespace

TEST_CASE("parse(render(r)) is a fixpoint over random rules") {
    std::mt19937 rng(20240817);
    for (int i = 0; i < 500; ++i) {
        Rule r = random_rule(rng, 1 + static_cast<std::uint32_t>(i));
        Rule back = parse_rule(render_rule(r));
        REQUIRE(back == r);
        // idempotence of the canonical form
        CHECK(render_rule(back) == render_rule(r));
    }
}

TEST_CASE("parse_ruleset aggregates lines, comments, and errors") {
    SUBCASE("rules plus comment") {
        auto rs = parse_ruleset(std::string(kIeRule) + "\n# comment line\n" +
                                    "alert tcp any any -> any any (msg:\"dt\"; content:\"../\"; "
                                    "classtype:web-server; sid:2001; rev:1;)\n",
                                3);
        CHECK(rs.version == 3);
        REQUIRE(rs.rules.size() == 2);
        CHECK(rs.rules[0].sid == 1001);
        CHECK(rs.rules[1].sid == 2001);
    }
    SUBCASE("empty input is a valid empty set") {
        auto rs = parse_ruleset("", 0);
        CHECK(rs.rules.empty());
        auto rs2 = parse_ruleset("# only comments\n\n", 1);
        CHECK(rs2.rules.empty());
    }
    SUBCASE("duplicate sid lists both line numbers") {
        std::string text = std::string(kIeRule) + "\n\n" + kIeRule + "\n";
        try {
            parse_ruleset(text, 1);
            FAIL("expected RulesetError");
        } catch (const RulesetError& e) {
            REQUIRE(e.errors.size() == 1);
            CHECK(e.errors[0].find("duplicate sid 1001") != std::string::npos);
            CHECK(e.errors[0].find("1") != std::string::npos);
            CHECK(e.errors[0].find("3") != std::string::npos);
        }
    }
    SUBCASE("multiple bad lines reported with line numbers") {
        try {
            parse_ruleset("bogus line\n\nanother bad one\n", 1);
            FAIL("expected RulesetError");
        } catch (const RulesetError& e) {
            REQUIRE(e.errors.size() == 2);
            CHECK(e.errors[0].find("line 1") != std::string::npos);
            CHECK(e.errors[1].find("line 3") != std::string::npos);
        }
    }
}

TEST_CASE("categorize_rule is the four-way table and a bijection") {
    CHECK(categorize_rule(RuleClass::WebClient, ConnDirection::Outbound) ==
          RuleCategory::ClientOutbound);
    CHECK(categorize_rule(RuleClass::WebServer, ConnDirection::Inbound) ==
          RuleCategory::ServerInbound);
    CHECK(categorize_rule(RuleClass::WebClient, ConnDirection::Inbound) ==
          RuleCategory::ClientInbound);
    CHECK(categorize_rule(RuleClass::WebServer, ConnDirection::Outbound) ==
          RuleCategory::ServerOutbound);

    std::set<RuleCategory> seen;
    for (auto cls : {RuleClass::WebClient, RuleClass::WebServer}) {
        for (auto dir : {ConnDirection::Inbound, ConnDirection::Outbound}) {
            seen.insert(categorize_rule(cls, dir));
        }
    }
    CHECK(seen.size() == 4);
}
