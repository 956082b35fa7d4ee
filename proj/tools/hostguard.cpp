#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hostguard/agent.hpp"
#include "hostguard/collector.hpp"
#include "hostguard/net.hpp"
#include "hostguard/sigupdate.hpp"
#include "hostguard/version.hpp"

namespace {

using namespace hostguard;

std::atomic<bool> g_stop{false};

void handle_signal(int) {
    g_stop.store(true);
}

std::string slurp_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Ruleset files named rules.v<N>.txt carry their version; anything else is 0.
rules::RuleSet load_ruleset_file(const std::filesystem::path& path) {
    auto version = sigupdate::version_from_filename(path.filename().string()).value_or(0);
    return rules::parse_ruleset(slurp_file(path), version);
}

Endpoint parse_endpoint_arg(const std::string& text, const std::string& flag) {
    auto ep = Endpoint::parse(text);
    if (!ep) throw CLI::ValidationError(flag, "expected ip:port, got '" + text + "'");
    return *ep;
}

int cmd_agent_run(const std::string& trace_path, const std::string& rules_path,
                  const std::string& config_path, const std::string& journal_path, bool no_send,
                  const std::string& admin_arg) {
    auto config = agent::AgentConfig::load(config_path);
    auto ruleset = load_ruleset_file(rules_path);
    agent::Agent agent(config, ruleset);

    std::optional<Endpoint> admin = config.admin_addr;
    if (!admin_arg.empty()) admin = parse_endpoint_arg(admin_arg, "--admin");
    if (admin) {
        auto outcome = sigupdate::check_and_fetch(*admin, agent.ruleset_version());
        switch (outcome.status) {
            case sigupdate::FetchOutcome::Status::Updated: {
                auto report = agent.apply_ruleset_update(outcome.bundle->ruleset);
                std::cout << "signature update: v" << report.old_version << " -> v"
                          << report.new_version << " (" << report.rule_delta
                          << " rules changed)\n";
                break;
            }
            case sigupdate::FetchOutcome::Status::UpToDate:
                std::cout << "signature update: already current (v" << agent.ruleset_version()
                          << ")\n";
                break;
            case sigupdate::FetchOutcome::Status::Error:
                std::cerr << "signature update failed, keeping v" << agent.ruleset_version()
                          << ": " << outcome.detail << "\n";
                break;
        }
    }

    auto trace = agent::load_trace(trace_path);
    auto result = agent.run_replay(trace, !no_send);

    {
        std::ofstream out(journal_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write journal " + journal_path);
        out << result.journal;
    }

    const auto& s = result.stats;
    std::cout << "connections=" << s.connections << " segments=" << s.segments
              << " bytes=" << s.bytes << "\n";
    std::cout << "events=" << s.events << " (ICV=" << s.events_by_kind[0]
              << " ISV=" << s.events_by_kind[1] << " ICA=" << s.events_by_kind[2]
              << " ISA=" << s.events_by_kind[3] << ")\n";
    std::cout << "sent=" << s.datagrams_sent << " send_failures=" << s.send_failures
              << " drops_latched=" << s.drops_latched << " suppressed=" << s.suppressed_segments
              << " forced_gaps=" << s.forced_gaps << " dropped_segments=" << s.dropped_segments
              << "\n";
    if (s.sampler_interval_ms) {
        std::cout << "sampler: updates=" << s.sampler_updates
                  << " interval_ms=" << *s.sampler_interval_ms << "\n";
    }
    std::cout << "journal: " << journal_path << "\n";
    return 0;
}

int cmd_collector_run(const std::string& listen_arg, const std::string& store_dir) {
    Endpoint listen = parse_endpoint_arg(listen_arg, "--listen");
    collector::Collector store(store_dir);
    net::UdpReceiver receiver(listen);
    std::cout << "collector listening on " << listen.ip << ":" << receiver.port() << ", store "
              << store_dir << "\n";

    std::uint64_t stored = 0, duplicates = 0, rejected = 0;
    while (!g_stop.load()) {
        auto datagram = receiver.recv(250);
        if (!datagram) continue;
        switch (store.ingest_datagram(*datagram)) {
            case collector::Collector::Outcome::Stored: ++stored; break;
            case collector::Collector::Outcome::Duplicate: ++duplicates; break;
            case collector::Collector::Outcome::Rejected:
                ++rejected;
                std::cerr << "rejected datagram: " << store.last_reject_reason() << "\n";
                break;
        }
    }
    std::cout << "stored=" << stored << " duplicates=" << duplicates << " rejected=" << rejected
              << "\n";
    return 0;
}

int cmd_collector_query(const std::string& store_dir, const std::string& kind_arg,
                        const std::string& host, std::uint32_t sid, std::int64_t since,
                        std::int64_t until, bool quarantined, bool sid_set, bool since_set,
                        bool until_set) {
    collector::QueryFilter filter;
    if (!kind_arg.empty()) {
        auto kind = wire::event_kind_from_string(kind_arg);
        if (!kind) throw CLI::ValidationError("--kind", "expected ICV, ISV, ICA, or ISA");
        filter.kind = *kind;
    }
    if (!host.empty()) filter.host = host;
    if (sid_set) filter.sid = sid;
    if (since_set) filter.since_ts = since;
    if (until_set) filter.until_ts = until;
    filter.quarantined_only = quarantined;

    collector::Collector store(store_dir);
    for (const auto& rec : store.query(filter)) {
        std::cout << collector::store_line(rec) << "\n";
    }
    return 0;
}

int cmd_collector_stats(const std::string& store_dir, const std::string& host) {
    collector::Collector store(store_dir);
    auto print = [&](const std::string& h) {
        auto stats = store.gap_stats(h);
        std::cout << "host=" << h << " max_seq=" << stats.max_seq_seen
                  << " received=" << stats.received << " duplicates=" << stats.duplicates
                  << " gaps=" << stats.gaps << "\n";
    };
    if (!host.empty()) {
        print(host);
    } else {
        for (const auto& h : store.known_hosts()) print(h);
    }
    std::cout << "quarantined_keys=" << store.quarantine().size() << "\n";
    for (const auto& [key, q] : store.quarantine()) {
        std::cout << "quarantine host=" << q.host_id << " app=" << q.app_name << "/"
                  << q.app_version << " count=" << q.count << " sids=";
        bool first = true;
        for (auto sid : q.sids) {
            if (!first) std::cout << ",";
            std::cout << sid;
            first = false;
        }
        std::cout << "\n";
    }
    return 0;
}

int cmd_sigserver_run(const std::string& dir, const std::string& listen_arg) {
    Endpoint listen = parse_endpoint_arg(listen_arg, "--listen");
    sigupdate::SigServer server(dir, listen);
    std::cout << "sigserver on " << listen.ip << ":" << server.port() << ", current version "
              << server.current_version() << "\n";
    server.run(g_stop);
    return 0;
}

int cmd_rules_check(const std::string& path) {
    auto ruleset = load_ruleset_file(path);
    size_t client = 0, server = 0;
    for (const auto& rule : ruleset.rules) {
        (rule.rule_class == rules::RuleClass::WebClient ? client : server)++;
    }
    std::cout << "rules=" << ruleset.rules.size() << " version=" << ruleset.version << "\n";
    std::cout << "web-client=" << client << " web-server=" << server << "\n";
    std::cout << "category bindings:\n";
    struct Binding {
        rules::RuleClass cls;
        rules::ConnDirection dir;
        size_t count;
    };
    const Binding bindings[] = {
        {rules::RuleClass::WebServer, rules::ConnDirection::Inbound, server},
        {rules::RuleClass::WebClient, rules::ConnDirection::Inbound, client},
        {rules::RuleClass::WebServer, rules::ConnDirection::Outbound, server},
        {rules::RuleClass::WebClient, rules::ConnDirection::Outbound, client},
    };
    for (const auto& b : bindings) {
        std::cout << "  " << rules::to_string(rules::categorize_rule(b.cls, b.dir)) << ": "
                  << b.count << " (" << rules::to_string(b.cls) << " on "
                  << rules::to_string(b.dir) << " connections)\n";
    }
    return 0;
}

int cmd_rules_fmt(const std::string& path) {
    std::cout << rules::render_ruleset(load_ruleset_file(path));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);

    CLI::App app{"hostguard: host-based intrusion detection toolkit"};
    app.require_subcommand(0, 1);
    auto version_text = std::string(kArtifactVersion) + " (wire " + kWireMagic + ", trace " +
                        kTraceMagic + ", sig " + kSigMagic + ")";
    app.set_version_flag("--version", version_text);

    // agent
    auto* agent_cmd = app.add_subcommand("agent", "host-side detection agent");
    agent_cmd->require_subcommand(1);
    auto* agent_run = agent_cmd->add_subcommand("run", "replay a trace through detection");
    std::string trace_path, rules_path, config_path, journal_path = "agent.journal", admin_arg;
    bool no_send = false;
    agent_run->add_option("--trace", trace_path, "socket-event trace file")->required();
    agent_run->add_option("--rules", rules_path, "signature rules file")->required();
    agent_run->add_option("--config", config_path, "agent JSON config")->required();
    agent_run->add_option("--journal", journal_path, "journal output path");
    agent_run->add_option("--admin", admin_arg, "administration server ip:port");
    agent_run->add_flag("--no-send", no_send, "journal only, never send UDP");

    // collector
    auto* col_cmd = app.add_subcommand("collector", "central event collector");
    col_cmd->require_subcommand(1);
    auto* col_run = col_cmd->add_subcommand("run", "receive event datagrams over UDP");
    std::string listen_arg, store_dir;
    col_run->add_option("--listen", listen_arg, "listen ip:port")->required();
    col_run->add_option("--store", store_dir, "store directory")->required();

    auto* col_query = col_cmd->add_subcommand("query", "query stored events");
    std::string q_store, q_kind, q_host;
    std::uint32_t q_sid = 0;
    std::int64_t q_since = 0, q_until = 0;
    bool q_quar = false;
    col_query->add_option("--store", q_store, "store directory")->required();
    col_query->add_option("--kind", q_kind, "event kind (ICV|ISV|ICA|ISA)");
    col_query->add_option("--host", q_host, "agent host id");
    auto* sid_opt = col_query->add_option("--sid", q_sid, "signature id");
    auto* since_opt = col_query->add_option("--since", q_since, "inclusive ts lower bound (ms)");
    auto* until_opt = col_query->add_option("--until", q_until, "inclusive ts upper bound (ms)");
    col_query->add_flag("--quarantined", q_quar, "quarantine-flagged events only");

    auto* col_stats = col_cmd->add_subcommand("stats", "per-agent delivery stats");
    std::string s_store, s_host;
    col_stats->add_option("--store", s_store, "store directory")->required();
    col_stats->add_option("--host", s_host, "agent host id");

    // sigserver
    auto* sig_cmd = app.add_subcommand("sigserver", "signature administration server");
    sig_cmd->require_subcommand(1);
    auto* sig_run = sig_cmd->add_subcommand("run", "serve signature bundles");
    std::string sig_dir, sig_listen;
    sig_run->add_option("--dir", sig_dir, "bundle directory (rules.v<N>.txt)")->required();
    sig_run->add_option("--listen", sig_listen, "listen ip:port")->required();

    // rules
    auto* rules_cmd = app.add_subcommand("rules", "signature rules tooling");
    rules_cmd->require_subcommand(1);
    auto* rules_check = rules_cmd->add_subcommand("check", "validate and census a rules file");
    std::string check_path;
    rules_check->add_option("file", check_path, "rules file")->required();
    auto* rules_fmt = rules_cmd->add_subcommand("fmt", "canonically render a rules file");
    std::string fmt_path;
    rules_fmt->add_option("file", fmt_path, "rules file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (agent_run->parsed()) {
            return cmd_agent_run(trace_path, rules_path, config_path, journal_path, no_send,
                                 admin_arg);
        }
        if (col_run->parsed()) return cmd_collector_run(listen_arg, store_dir);
        if (col_query->parsed()) {
            return cmd_collector_query(q_store, q_kind, q_host, q_sid, q_since, q_until, q_quar,
                                       sid_opt->count() > 0, since_opt->count() > 0,
                                       until_opt->count() > 0);
        }
        if (col_stats->parsed()) return cmd_collector_stats(s_store, s_host);
        if (sig_run->parsed()) return cmd_sigserver_run(sig_dir, sig_listen);
        if (rules_check->parsed()) return cmd_rules_check(check_path);
        if (rules_fmt->parsed()) return cmd_rules_fmt(fmt_path);
        std::cerr << app.help();
        return 1;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const rules::RulesetError& e) {
        std::cerr << "invalid ruleset:\n";
        for (const auto& err : e.errors) std::cerr << "  " << err << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
