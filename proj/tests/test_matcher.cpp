#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "hostguard/matcher.hpp"
#include "oracle.hpp"

using namespace hostguard;
using namespace hostguard::rules;

namespace {

RuleSet make_ruleset(std::vector<Rule> rules, std::uint64_t version = 1) {
    RuleSet rs;
    rs.version = version;
    rs.rules = std::move(rules);
    return rs;
}

ContentPattern pat(std::string bytes) {
    ContentPattern p;
    p.bytes = std::move(bytes);
    return p;
}

Rule simple_rule(std::uint32_t sid, std::vector<ContentPattern> pats,
                 RuleClass cls = RuleClass::WebServer) {
    Rule r;
    r.sid = sid;
    r.rev = 1;
    r.msg = "rule " + std::to_string(sid);
    r.rule_class = cls;
    r.patterns = std::move(pats);
    return r;
}

std::set<std::pair<std::uint32_t, std::uint64_t>> scan_whole(
    const std::shared_ptr<const CompiledMatcher>& m, std::string_view stream) {
    MatchRun run(m, m->all_rules());
    std::set<std::pair<std::uint32_t, std::uint64_t>> out;
    for (const auto& fire : run.on_bytes({}, stream, 0)) {
        out.emplace(m->rule(fire.rule_index).sid, fire.offset);
    }
    return out;
}

} // namespace

TEST_CASE("single pattern fires at its stream offset") {
    auto m = CompiledMatcher::compile(make_ruleset({simple_rule(1, {pat("abc")})}), {});
    auto fired = scan_whole(m, "xxabcxx");
    REQUIRE(fired.size() == 1);
    CHECK(fired.count({1, 2}) == 1);
}

TEST_CASE("nocase patterns fold case") {
    ContentPattern p = pat("GET");
    p.nocase = true;
    auto m = CompiledMatcher::compile(make_ruleset({simple_rule(1, {p})}), {});
    CHECK(scan_whole(m, "xx get /").count({1, 3}) == 1);
    // case-sensitive sibling must not fire on folded text
    auto ms = CompiledMatcher::compile(make_ruleset({simple_rule(2, {pat("GET")})}), {});
    CHECK(scan_whole(ms, "xx get /").empty());
}

TEST_CASE("offset and depth bound the first pattern") {
    ContentPattern p = pat("AB");
    p.offset = 4;
    p.depth = 2;
    auto m = CompiledMatcher::compile(make_ruleset({simple_rule(1, {p})}), {});
    // oracle = naive scan honoring offset/depth over the whole stream
    auto rs = make_ruleset({simple_rule(1, {p})});
    for (std::string stream : {std::string("xxxxAB"), std::string("AB"), std::string("xxxAB"),
                               std::string("xxxxxAB")}) {
        CHECK(scan_whole(m, stream) == oracle::brute_scan(stream, rs));
    }
    CHECK(scan_whole(m, "xxxxAB") ==
          std::set<std::pair<std::uint32_t, std::uint64_t>>{{1, 4}});
    CHECK(scan_whole(m, "AB").empty());
}

TEST_CASE("multi-pattern chains honor distance and within") {
    ContentPattern first = pat("ab");
    ContentPattern second = pat("cd");
    second.distance = 2;
    second.within = 3;
    auto rs = make_ruleset({simple_rule(9, {first, second})});
    auto m = CompiledMatcher::compile(rs, {});
    // window for "cd": start >= prev_end+2, end <= prev_end+2+3
    CHECK(scan_whole(m, "abxxcd") == oracle::brute_scan("abxxcd", rs));
    CHECK(scan_whole(m, "abxxcd").count({9, 0}) == 1);
    CHECK(scan_whole(m, "abcd").empty());        // distance violated
    CHECK(scan_whole(m, "abxxxxxcd").empty());   // within violated
    CHECK(scan_whole(m, "abxxxcd") == oracle::brute_scan("abxxxcd", rs));
}

TEST_CASE("a later first-pattern occurrence can anchor the chain") {
    ContentPattern first = pat("A");
    ContentPattern second = pat("B");
    second.within = 2;
    auto rs = make_ruleset({simple_rule(3, {first, second})});
    auto m = CompiledMatcher::compile(rs, {});
    // only the second 'A' is close enough to the 'B'
    auto fired = scan_whole(m, "A.AB");
    CHECK(fired == oracle::brute_scan("A.AB", rs));
    CHECK(fired == std::set<std::pair<std::uint32_t, std::uint64_t>>{{3, 2}});
}

TEST_CASE("empty ruleset never fires") {
    auto m = CompiledMatcher::compile(make_ruleset({}), {});
    CHECK(scan_whole(m, "anything at all").empty());
    CHECK(m->max_pattern_len() == 0);
    CHECK(m->tail_len() == 0);
}

TEST_CASE("eligibility filters by class, address variables, and ports") {
    Rule client = simple_rule(1, {pat("x")}, RuleClass::WebClient);
    client.src_spec.kind = AddressSpec::Kind::ExternalNet;
    client.dst_spec.kind = AddressSpec::Kind::HomeNet;
    Rule server = simple_rule(2, {pat("x")}, RuleClass::WebServer);
    server.dst_port.port = 8080;

    auto m = CompiledMatcher::compile(make_ruleset({client, server}),
                                      {*Cidr::parse("10.0.0.0/8")});

    Endpoint inside{"10.0.0.5", 49152};
    Endpoint outside{"203.0.113.7", 80};

    auto elig = m->eligible_rules(RuleClass::WebClient, outside, inside);
    CHECK(elig[0]);
    CHECK(!elig[1]);   // wrong class

    // sender inside home net fails $EXTERNAL_NET
    auto elig2 = m->eligible_rules(RuleClass::WebClient, inside, outside);
    CHECK(!elig2[0]);

    Endpoint in8080{"10.0.0.5", 8080};
    auto elig3 = m->eligible_rules(RuleClass::WebServer, outside, in8080);
    CHECK(elig3[1]);
    auto elig4 = m->eligible_rules(RuleClass::WebServer, outside, inside);
    CHECK(!elig4[1]);   // port mismatch
}

TEST_CASE("incremental scans with retained tail equal the whole-stream scan") {
    ContentPattern p = pat("needle");
    auto rs = make_ruleset({simple_rule(5, {p})});
    auto m = CompiledMatcher::compile(rs, {});
    std::string stream = "hay needle hay needleneedle end";
    auto whole = scan_whole(m, stream);
    CHECK(whole == oracle::brute_scan(stream, rs));

    std::mt19937 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        MatchRun run(m, m->all_rules());
        std::set<std::pair<std::uint32_t, std::uint64_t>> fired;
        std::string history;
        size_t pos = 0;
        while (pos < stream.size()) {
            std::uniform_int_distribution<size_t> chunk_dist(1, stream.size() - pos);
            size_t n = chunk_dist(rng);
            std::string_view chunk = std::string_view(stream).substr(pos, n);
            size_t tail_len = std::min(history.size(), m->tail_len());
            std::string_view tail = std::string_view(history).substr(history.size() - tail_len);
            for (const auto& fire : run.on_bytes(tail, chunk, pos)) {
                fired.emplace(m->rule(fire.rule_index).sid, fire.offset);
            }
            history.append(chunk);
            pos += n;
        }
        CHECK(fired == whole);
    }
}

namespace {

RuleSet random_instance(std::mt19937& rng, std::string& stream_out) {
    std::uniform_int_distribution<int> nrules_dist(1, 10);
    std::uniform_int_distribution<int> npat_dist(1, 3);
    std::uniform_int_distribution<int> len_dist(2, 6);
    std::uniform_int_distribution<int> alpha_dist(0, 3);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> small(0, 10);
    std::uniform_int_distribution<size_t> stream_len_dist(0, 4096);

    const char alphabet[] = {'a', 'b', 'A', 'B'};

    RuleSet rs;
    rs.version = 1;
    int nrules = nrules_dist(rng);
    for (int r = 0; r < nrules; ++r) {
        Rule rule = Rule{};
        rule.sid = static_cast<std::uint32_t>(r + 1);
        rule.rev = 1;
        rule.msg = "r" + std::to_string(r);
        rule.rule_class = coin(rng) ? RuleClass::WebClient : RuleClass::WebServer;
        int npat = npat_dist(rng);
        for (int p = 0; p < npat; ++p) {
            ContentPattern pat;
            int len = len_dist(rng);
            for (int i = 0; i < len; ++i) pat.bytes.push_back(alphabet[alpha_dist(rng)]);
            pat.nocase = coin(rng) != 0;
            if (coin(rng) && coin(rng)) pat.offset = small(rng);
            if (coin(rng) && coin(rng)) pat.depth = pat.bytes.size() + small(rng);
            if (p > 0) {
                if (coin(rng)) pat.distance = small(rng);
                if (coin(rng)) pat.within = pat.bytes.size() + small(rng);
            }
            rule.patterns.push_back(std::move(pat));
        }
        rs.rules.push_back(std::move(rule));
    }

    size_t slen = stream_len_dist(rng);
    stream_out.clear();
    for (size_t i = 0; i < slen; ++i) stream_out.push_back(alphabet[alpha_dist(rng)]);
    return rs;
}

} // namespace

TEST_CASE("compiled matcher equals brute-force scanner on random instances") {
    std::mt19937 rng(424242);
    for (int i = 0; i < 200; ++i) {
        std::string stream;
        RuleSet rs = random_instance(rng, stream);
        auto m = CompiledMatcher::compile(rs, {});
        auto got = scan_whole(m, stream);
        auto want = oracle::brute_scan(stream, rs);
        REQUIRE(got == want);
    }
}

TEST_CASE("dense single-byte patterns stay exact under chain pressure") {
    // every position anchors; every position advances; worst case for the
    // partial-chain bookkeeping
    std::mt19937 rng(31);
    std::uniform_int_distribution<int> alpha(0, 1);
    std::string stream;
    for (int i = 0; i < 512; ++i) stream.push_back(alpha(rng) ? 'a' : 'b');

    ContentPattern a = pat("a");
    ContentPattern b = pat("b");
    ContentPattern b_win = pat("b");
    b_win.within = 3;
    ContentPattern a_far = pat("a");
    a_far.distance = 5;

    RuleSet rs = make_ruleset({
        simple_rule(1, {a, b}),                 // unbounded chain
        simple_rule(2, {a, b_win}),             // windowed chain
        simple_rule(3, {a, b, a_far}),          // three deep, mixed
        simple_rule(4, {b, b_win, a_far}),
    });
    auto m = CompiledMatcher::compile(rs, {});
    CHECK(scan_whole(m, stream) == oracle::brute_scan(stream, rs));

    // same result fed in small increments
    MatchRun run(m, m->all_rules());
    std::set<std::pair<std::uint32_t, std::uint64_t>> fired;
    std::string history;
    for (size_t pos = 0; pos < stream.size(); pos += 7) {
        std::string_view chunk = std::string_view(stream).substr(pos, 7);
        size_t tail_len = std::min(history.size(), m->tail_len());
        std::string_view tail = std::string_view(history).substr(history.size() - tail_len);
        for (const auto& fire : run.on_bytes(tail, chunk, pos)) {
            fired.emplace(m->rule(fire.rule_index).sid, fire.offset);
        }
        history.append(chunk);
    }
    CHECK(fired == oracle::brute_scan(stream, rs));
}
