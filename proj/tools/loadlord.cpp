// loadlord: analyze a binary for functions and gadgets, then evaluate or
// enforce the dynamic load/unload policy.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "loadlord/analysis.hpp"
#include "loadlord/errors.hpp"
#include "loadlord/report.hpp"
#include "loadlord/simulator.hpp"
#include "loadlord/supervisor.hpp"
#include "loadlord/trace.hpp"

namespace {

using loadlord::Json;

std::string slurp(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw loadlord::Error(std::string("cannot open ") + what + ": " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_or_print(const Json& j, const std::string& out_path) {
    std::string text = j.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw loadlord::Error("cannot write " + out_path);
        out << text;
    }
}

struct PolicyFlags {
    std::string limit;
    bool no_semantic_unload = false;
    std::string chain_predicate;
    int max_gadget_len = loadlord::kDefaultMaxGadgetLen;
    bool strict = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--limit", limit,
                        "loading limit: fraction like 1/16 or an absolute count");
        cmd->add_flag("--no-semantic-unload", no_semantic_unload,
                      "disable the chain-breaking unload");
        cmd->add_option("--chain-predicate", chain_predicate,
                        "loadmem_only | loadmem_and_sysg")
            ->check(CLI::IsMember({"loadmem_only", "loadmem_and_sysg"}));
        cmd->add_option("--max-gadget-len", max_gadget_len,
                        "max instructions per gadget")
            ->check(CLI::PositiveNumber);
        cmd->add_flag("--strict", strict, "stop on the first violation");
    }

    loadlord::PolicyConfig to_config() const {
        loadlord::PolicyConfig cfg;
        if (!limit.empty()) {
            if (limit.find('/') != std::string::npos)
                cfg.limit_fraction = loadlord::parse_fraction(limit);
            else
                cfg.limit_absolute = static_cast<uint32_t>(std::stoul(limit));
        }
        cfg.semantic_unload_enabled = !no_semantic_unload;
        if (chain_predicate == "loadmem_only")
            cfg.chain_predicate = loadlord::ChainPredicate::loadmem_only;
        cfg.max_gadget_len = max_gadget_len;
        cfg.strict = strict;
        return cfg;
    }
};

std::vector<loadlord::TraceEvent> load_or_walk_trace(const loadlord::Artifacts& artifacts,
                                                     const std::string& trace_path,
                                                     uint64_t seed, int depth,
                                                     size_t walk_events) {
    if (!trace_path.empty())
        return loadlord::parse_trace(slurp(trace_path, "trace file"));
    return loadlord::random_walk_trace(artifacts, seed, depth, walk_events);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic function loading against code-reuse attacks"};
    app.require_subcommand(1);
    app.set_config("--config")->configurable(false);

    // analyze
    auto* analyze = app.add_subcommand("analyze", "parse a binary into an artifacts bundle");
    std::string an_binary, an_listing, an_seeds, an_out;
    int an_max_len = loadlord::kDefaultMaxGadgetLen;
    analyze->add_option("binary", an_binary, "executable to analyze")->required();
    analyze->add_option("--listing", an_listing, "ingest an external disassembly listing");
    analyze->add_option("--seeds", an_seeds, "function boundary seeds file");
    analyze->add_option("--max-gadget-len", an_max_len, "max instructions per gadget")
        ->check(CLI::PositiveNumber);
    analyze->add_option("--out", an_out, "bundle output path (default: stdout)");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "replay a trace through the policy engine");
    std::string sim_bundle, sim_trace, sim_out, sim_events, sim_golden;
    uint64_t sim_seed = 1;
    int sim_depth = 8;
    size_t sim_walk_events = 256;
    PolicyFlags sim_flags;
    simulate->add_option("bundle", sim_bundle, "bundle from `analyze --out`")->required();
    simulate->add_option("--trace", sim_trace, "trace file (default: seeded random walk)");
    simulate->add_option("--seed", sim_seed, "random walk seed");
    simulate->add_option("--depth", sim_depth, "random walk call depth");
    simulate->add_option("--walk-events", sim_walk_events, "random walk event budget");
    simulate->add_option("--out", sim_out, "report output path (default: stdout)");
    simulate->add_option("--events", sim_events, "also write the event log as JSON lines");
    simulate->add_option("--golden", sim_golden, "compare the report against a committed one");
    sim_flags.attach(simulate);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "replay under several loading limits");
    std::string sw_bundle, sw_trace, sw_out, sw_fractions = "1/4,1/8,1/16,1/32";
    uint64_t sw_seed = 1;
    int sw_depth = 8;
    size_t sw_walk_events = 256;
    PolicyFlags sw_flags;
    sweep->add_option("bundle", sw_bundle, "bundle from `analyze --out`")->required();
    sweep->add_option("--fractions", sw_fractions, "comma-separated fractions");
    sweep->add_option("--trace", sw_trace, "trace file (default: seeded random walk)");
    sweep->add_option("--seed", sw_seed, "random walk seed");
    sweep->add_option("--depth", sw_depth, "random walk call depth");
    sweep->add_option("--walk-events", sw_walk_events, "random walk event budget");
    sweep->add_option("--out", sw_out, "report output path (default: stdout)");
    sw_flags.attach(sweep);

    // attack-test
    auto* attack = app.add_subcommand("attack-test", "run the generated probe scenarios");
    std::string at_bundle, at_out;
    PolicyFlags at_flags;
    attack->add_option("bundle", at_bundle, "bundle from `analyze --out`")->required();
    attack->add_option("--out", at_out, "report output path (default: stdout)");
    at_flags.attach(attack);

    // run
    auto* run = app.add_subcommand("run", "supervise a child process under the policy");
    std::string run_binary;
    std::vector<std::string> run_args;
    bool run_verbose = false;
    PolicyFlags run_flags;
    run->add_option("binary", run_binary, "non-PIE executable")->required();
    run->add_option("args", run_args, "child arguments");
    run->add_flag("--verbose", run_verbose, "log supervisor events to stderr");
    run_flags.attach(run);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 2;
    }

    try {
        if (*analyze) {
            loadlord::AnalysisOptions opts;
            opts.max_gadget_len = an_max_len;
            if (!an_listing.empty()) opts.listing_text = slurp(an_listing, "listing");
            if (!an_seeds.empty()) opts.seeds_text = slurp(an_seeds, "seeds file");
            loadlord::Artifacts artifacts = loadlord::analyze_file(an_binary, opts);
            write_or_print(loadlord::artifacts_to_json(artifacts), an_out);
            (an_out.empty() ? std::cerr : std::cout) << loadlord::totals_summary(artifacts);
            return 0;
        }

        if (*simulate) {
            loadlord::Artifacts artifacts =
                loadlord::artifacts_from_json(Json::parse(slurp(sim_bundle, "bundle")));
            loadlord::PolicyConfig cfg = sim_flags.to_config();
            auto trace =
                load_or_walk_trace(artifacts, sim_trace, sim_seed, sim_depth, sim_walk_events);
            loadlord::SimReport report = loadlord::replay(trace, artifacts, cfg);
            Json j = loadlord::sim_report_to_json(report);
            write_or_print(j, sim_out);
            if (!sim_events.empty()) {
                std::ofstream out(sim_events, std::ios::binary);
                if (!out) throw loadlord::Error("cannot write " + sim_events);
                for (const auto& ev : report.timeline)
                    out << loadlord::policy_event_to_json(ev).dump() << "\n";
            }
            if (!sim_golden.empty()) {
                Json golden = Json::parse(slurp(sim_golden, "golden report"));
                if (golden != j) {
                    std::cerr << "report does not match golden " << sim_golden << "\n";
                    return 1;
                }
                std::cerr << "report matches golden\n";
            }
            return cfg.strict && !report.violations.empty() ? 1 : 0;
        }

        if (*sweep) {
            loadlord::Artifacts artifacts =
                loadlord::artifacts_from_json(Json::parse(slurp(sw_bundle, "bundle")));
            loadlord::PolicyConfig cfg = sw_flags.to_config();
            std::vector<loadlord::Fraction> fractions;
            std::istringstream list(sw_fractions);
            std::string piece;
            while (std::getline(list, piece, ','))
                if (!piece.empty()) fractions.push_back(loadlord::parse_fraction(piece));
            auto trace =
                load_or_walk_trace(artifacts, sw_trace, sw_seed, sw_depth, sw_walk_events);
            loadlord::SweepResult result =
                loadlord::sweep_limits(trace, artifacts, cfg, fractions);
            write_or_print(loadlord::sweep_to_json(result), sw_out);
            std::cerr << "survive max monotone in limit: "
                      << (result.survive_monotone ? "yes" : "NO") << "\n";
            return 0;
        }

        if (*attack) {
            loadlord::Artifacts artifacts =
                loadlord::artifacts_from_json(Json::parse(slurp(at_bundle, "bundle")));
            loadlord::AttackReport report =
                loadlord::run_attack_suite(artifacts, at_flags.to_config());
            write_or_print(loadlord::attack_report_to_json(report), at_out);
            return report.all_as_expected ? 0 : 1;
        }

        if (*run) {
            loadlord::SupervisorOptions opts;
            opts.policy = run_flags.to_config();
            opts.verbose = run_verbose;
            loadlord::SupervisorResult result =
                loadlord::run_supervised(run_binary, run_args, opts);
            if (result.violated) {
                std::cerr << "violation at " << loadlord::hex_addr(result.violation_addr)
                          << "; child terminated (traps " << result.traps << ", loads "
                          << result.loads << ", unloads " << result.unloads << ")\n";
                return 1;
            }
            std::cerr << "child exited " << result.exit_code << " (traps " << result.traps
                      << ", loads " << result.loads << ", unloads " << result.unloads
                      << ", w^x clean " << (result.wx_clean ? "yes" : "NO") << ")\n";
            return result.exited ? result.exit_code : 1;
        }
    } catch (const loadlord::PlatformUnsupported& e) {
        std::cerr << "unsupported platform: " << e.what() << "\n";
        return 2;
    } catch (const loadlord::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
