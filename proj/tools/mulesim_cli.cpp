#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mulesim/engine.hpp"

namespace {

struct SeedRange {
    std::uint64_t first = 0;
    std::uint64_t last = 0;
};

SeedRange parse_seed_range(const std::string& text) {
    const auto pos = text.find("..");
    if (pos == std::string::npos)
        throw CLI::ValidationError("--seeds", "expected a range like 1..20");
    SeedRange r;
    try {
        r.first = std::stoull(text.substr(0, pos));
        r.last = std::stoull(text.substr(pos + 2));
    } catch (const std::exception&) {
        throw CLI::ValidationError("--seeds", "expected a range like 1..20");
    }
    if (r.last < r.first) throw CLI::ValidationError("--seeds", "range end before start");
    return r;
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mulesim - underwater data-muling polling network simulator"};
    app.require_subcommand(1);

    // run
    std::string run_file;
    std::uint64_t run_seed = 0;
    bool run_seed_set = false;
    std::string run_trace, run_report, run_shore, run_rxmap;
    auto* cmd_run = app.add_subcommand("run", "simulate one scenario");
    cmd_run->add_option("scenario", run_file, "scenario file")->required();
    cmd_run->add_option("--seed", run_seed, "override the scenario seed")
        ->each([&](const std::string&) { run_seed_set = true; });
    cmd_run->add_option("--trace", run_trace, "trace CSV output path");
    cmd_run->add_option("--report", run_report, "report JSON output path");
    cmd_run->add_option("--shore", run_shore, "shore JSON-lines output path");
    cmd_run->add_option("--reception-map", run_rxmap, "reception map CSV output path");

    // topology
    std::string topo_name, topo_emit;
    auto* cmd_topo = app.add_subcommand("topology", "emit a builtin topology scenario");
    cmd_topo->add_option("name", topo_name, "T1|T2|T3|T4")->required();
    cmd_topo->add_option("--emit", topo_emit, "output scenario file")->required();

    // replay
    std::string replay_file;
    int replay_burst = 5;
    auto* cmd_replay = app.add_subcommand("replay", "validate protocol safety from a trace");
    cmd_replay->add_option("trace", replay_file, "trace CSV produced by run")->required();
    cmd_replay->add_option("--burst-limit", replay_burst, "burst cap to check (default 5)");

    // sweep
    std::string sweep_file, sweep_seeds;
    auto* cmd_sweep = app.add_subcommand("sweep", "run a scenario across a seed range");
    cmd_sweep->add_option("scenario", sweep_file, "scenario file")->required();
    cmd_sweep->add_option("--seeds", sweep_seeds, "seed range A..B")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_run) {
            mulesim::Scenario sc = mulesim::load_scenario(run_file);
            if (run_seed_set) sc.seed = run_seed;
            if (!run_trace.empty()) sc.trace_path = run_trace;
            if (!run_report.empty()) sc.report_path = run_report;
            if (!run_shore.empty()) sc.shore_json_path = run_shore;
            if (!run_rxmap.empty()) sc.reception_map_path = run_rxmap;
            const mulesim::RunResult result = mulesim::run(sc);
            std::cout << mulesim::render_table(result.report);
            if (!result.conservation.balanced()) {
                std::cerr << "error: record conservation violated\n";
                return 1;
            }
            return 0;
        }
        if (*cmd_topo) {
            mulesim::Scenario sc =
                mulesim::builtin_scenario(mulesim::topology_kind_from(topo_name));
            std::ofstream out(topo_emit);
            if (!out) {
                std::cerr << "error: cannot write " << topo_emit << "\n";
                return 2;
            }
            out << mulesim::scenario_text(sc);
            std::cout << "wrote " << topo_emit << "\n";
            return 0;
        }
        if (*cmd_replay) {
            const mulesim::ReplayVerdict verdict = mulesim::replay(replay_file, replay_burst);
            for (const auto& w : verdict.warnings) std::cout << "warning: " << w << "\n";
            for (const auto& v : verdict.violations) std::cout << "violation: " << v << "\n";
            std::cout << (verdict.ok() ? "OK" : "FAILED") << ": " << verdict.violations.size()
                      << " violation(s)\n";
            return verdict.ok() ? 0 : 1;
        }
        if (*cmd_sweep) {
            const SeedRange range = parse_seed_range(sweep_seeds);
            mulesim::Scenario sc = mulesim::load_scenario(sweep_file);
            sc.trace_path.clear();
            sc.shore_json_path.clear();
            sc.report_path.clear();
            sc.reception_map_path.clear();
            std::vector<double> jfi, pdd, jitter, pdr;
            for (std::uint64_t seed = range.first; seed <= range.last; ++seed) {
                sc.seed = seed;
                const mulesim::RunResult r = mulesim::run(sc);
                if (r.report.network.jfi) jfi.push_back(*r.report.network.jfi);
                if (r.report.network.mean_pdd) pdd.push_back(*r.report.network.mean_pdd);
                if (r.report.network.jitter) jitter.push_back(*r.report.network.jitter);
                if (r.report.network.total_sent > 0)
                    pdr.push_back(static_cast<double>(r.report.network.total_received) /
                                  static_cast<double>(r.report.network.total_sent));
            }
            const long n = static_cast<long>(range.last - range.first + 1);
            std::printf("seeds %llu..%llu (%ld runs)\n",
                        static_cast<unsigned long long>(range.first),
                        static_cast<unsigned long long>(range.last), n);
            std::printf("%-10s %10s %10s\n", "metric", "mean", "stddev");
            std::printf("%-10s %10.4f %10.4f\n", "jfi", mean(jfi), stddev(jfi));
            std::printf("%-10s %10.2f %10.2f\n", "pdd [s]", mean(pdd), stddev(pdd));
            std::printf("%-10s %10.2f %10.2f\n", "jitter [s]", mean(jitter), stddev(jitter));
            std::printf("%-10s %10.4f %10.4f\n", "pdr", mean(pdr), stddev(pdr));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
