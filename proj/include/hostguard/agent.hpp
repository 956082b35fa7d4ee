#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hostguard/detection.hpp"
#include "hostguard/reassembly.hpp"
#include "hostguard/rules.hpp"
#include "hostguard/sampler.hpp"
#include "hostguard/trace.hpp"
#include "hostguard/util.hpp"
#include "hostguard/wire.hpp"

namespace hostguard::agent {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AgentConfig {
    std::string host_id;
    std::vector<Cidr> home_nets;                  // non-empty
    std::optional<Endpoint> collector_addr;
    std::optional<Endpoint> admin_addr;
    reassembly::OverlapPolicy overlap_policy = reassembly::OverlapPolicy::FirstWins;
    bool drop_enabled = false;
    std::size_t reassembly_cap_bytes = 256 * 1024;
    std::optional<sampler::SamplerConfig> sampler;

    static AgentConfig from_json(std::string_view text);          // throws ConfigError
    static AgentConfig load(const std::filesystem::path& path);
};

struct AgentStats {
    std::uint64_t connections = 0;
    std::uint64_t segments = 0;
    std::uint64_t bytes = 0;
    std::uint64_t events = 0;
    std::array<std::uint64_t, 4> events_by_kind{};   // ICV, ISV, ICA, ISA
    std::uint64_t datagrams_sent = 0;
    std::uint64_t send_failures = 0;
    std::uint64_t drops_latched = 0;
    std::uint64_t suppressed_segments = 0;
    std::uint64_t forced_gaps = 0;
    std::uint64_t dropped_segments = 0;              // overflow even after a forced gap
    std::uint64_t sampler_updates = 0;
    std::optional<std::int64_t> sampler_interval_ms;
};

struct SwapReport {
    bool applied = false;
    std::uint64_t old_version = 0;
    std::uint64_t new_version = 0;
    std::size_t rule_delta = 0;      // size of the sid symmetric difference
};

struct ReplayResult {
    AgentStats stats;
    std::string journal;             // exact datagram bytes, back to back
    std::vector<detection::DetectionEvent> events;
};

// Host-side driver: replays a socket-event trace through the detection
// engine, emits event datagrams (journal always, UDP when configured), and
// runs the optional traffic sampler on trace time.
class Agent {
public:
    Agent(AgentConfig cfg, rules::RuleSet ruleset);

    const AgentConfig& config() const { return cfg_; }
    std::uint64_t ruleset_version() const { return ruleset_.version; }
    const rules::RuleSet& ruleset() const { return ruleset_; }
    std::shared_ptr<const rules::CompiledMatcher> matcher() const { return matcher_; }

    // Atomic swap to a strictly newer ruleset; a stale version is rejected
    // and leaves everything untouched.
    SwapReport apply_ruleset_update(const rules::RuleSet& next);

    ReplayResult run_replay(const std::vector<TraceEvent>& trace, bool send_udp);

private:
    AgentConfig cfg_;
    rules::RuleSet ruleset_;
    std::shared_ptr<const rules::CompiledMatcher> matcher_;
};

wire::EventRecord to_wire_record(const detection::DetectionEvent& ev, std::uint64_t seqno);

} // namespace hostguard::agent
