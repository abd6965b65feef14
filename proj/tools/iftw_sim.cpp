#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "iftw/engine.hpp"
#include "iftw/scenario.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNonTermination = 3;

struct CommonOpts {
    std::string file;
    std::string trace_dir;
    bool strict_interference = false;
    std::optional<std::int64_t> deadline_ticks;
    int workers = 1;
};

std::string default_output_dir() {
    const char* env = std::getenv("IFTW_OUTPUT_DIR");
    return env ? env : ".";
}

iftw::ScenarioFile load(const CommonOpts& opts) {
    const std::string text = iftw::read_text_file(opts.file);
    auto sc = iftw::parse_scenario(text, opts.strict_interference);
    for (const auto& w : sc.warnings) std::cerr << "warning: " << w << "\n";
    return sc;
}

std::string scenario_summary(const iftw::ScenarioResult& r) {
    std::ostringstream os;
    os << "outcome: " << to_string(r.outcome) << "\n";
    os << "oracle: " << to_string(r.oracle) << "\n";
    if (!r.rounds.empty()) {
        for (const auto& round : r.rounds) {
            os << "round: leader N" << round.leader << " t0=" << round.t0
               << " npt=" << round.npt;
            if (round.deferred) os << " (deferred)";
            if (round.classify_tick)
                os << " verdict=" << to_string(round.detected) << " at "
                   << *round.classify_tick;
            if (round.prm) {
                os << " substitute=" << to_string(round.prm->new_path.front());
                if (round.prm->reschedule) os << " (rescheduled)";
            }
            os << "\n";
        }
        os << "agreement: " << (r.agreement ? "yes" : "no") << "\n";
    }
    if (r.recovery_tick) os << "recovery tick: " << *r.recovery_tick << "\n";
    if (!r.idle_nodes.empty()) {
        os << "idle nodes:";
        for (int n : r.idle_nodes) os << " N" << n;
        os << "\n";
    }
    return os.str();
}

void write_trace(const iftw::Trace& trace, const std::string& dir,
                 const std::string& name) {
    std::filesystem::create_directories(dir);
    iftw::write_text_file(dir + "/" + name, trace.to_tsv());
}

int cmd_validate(const CommonOpts& opts) {
    const auto sc = load(opts);
    const auto topo = iftw::build_topology(sc.config);
    const auto margin = iftw::interference_free_margin(sc.config.theta_deg,
                                                       sc.config.phi_deg);
    std::cout << "nodes: " << topo.node_count()
              << " (spacing " << topo.spacing() << " m)\n";
    std::cout << "interference margin: " << margin.margin_deg
              << " deg, condition "
              << (margin.satisfied ? "satisfied" : "violated") << "\n";
    std::cout << "cells: " << iftw::enumerate_cells(sc).size() << "\n";
    std::cout << "ok\n";
    return 0;
}

int cmd_run(const CommonOpts& opts) {
    const auto sc = load(opts);
    iftw::SimOptions sim_opts;
    sim_opts.record_trace = true;
    sim_opts.deadline_ticks = opts.deadline_ticks;
    iftw::Simulation sim(sc.config, iftw::enumerate_cells(sc), sim_opts);
    const auto result = sim.run();
    std::cout << scenario_summary(result);
    if (!opts.trace_dir.empty())
        write_trace(sim.trace(), opts.trace_dir, "run.trace.tsv");
    return result.outcome == iftw::Outcome::NonTermination
               ? kExitNonTermination
               : 0;
}

int cmd_sweep(const CommonOpts& opts) {
    const auto sc = load(opts);
    const auto report = iftw::run_sweep(sc, opts.workers);
    std::cout << report.summary();
    std::string out = sc.output.report_path;
    if (out.empty()) out = default_output_dir() + "/sweep_report.tsv";
    iftw::write_text_file(out, report.table_tsv());
    std::cout << "report: " << out << "\n";
    if (!opts.trace_dir.empty() || !sc.output.trace_dir.empty()) {
        const std::string dir =
            !opts.trace_dir.empty() ? opts.trace_dir : sc.output.trace_dir;
        std::filesystem::create_directories(dir);
        const auto cells = iftw::enumerate_cells(sc);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            iftw::SimOptions sim_opts;
            sim_opts.record_trace = true;
            iftw::Simulation sim(sc.config, {cells[i]}, sim_opts);
            sim.run();
            std::ostringstream name;
            name << "cell_" << i << ".trace.tsv";
            iftw::write_text_file(dir + "/" + name.str(),
                                  sim.trace().to_tsv());
        }
        std::cout << "traces: " << dir << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete-event simulator of blockage-type detection on a "
                 "triangular-wave relay chain"};
    app.require_subcommand(1);

    CommonOpts opts;
    auto add_common = [&](CLI::App* sub, bool with_workers) {
        sub->add_option("file", opts.file, "scenario file")->required();
        sub->add_flag("--strict-interference", opts.strict_interference,
                      "reject (instead of warn) when the interference-free "
                      "condition fails");
        sub->add_option("--trace-dir", opts.trace_dir,
                        "write per-run trace files here");
        sub->add_option("--deadline-ticks", opts.deadline_ticks,
                        "override the hard simulation deadline");
        if (with_workers)
            sub->add_option("--workers", opts.workers,
                            "parallel sweep workers (1 = serial reference)");
    };

    auto* validate = app.add_subcommand("validate", "parse and check a scenario");
    add_common(validate, false);
    auto* run = app.add_subcommand("run", "simulate the scenario's obstacles");
    add_common(run, false);
    auto* sweep = app.add_subcommand("sweep", "one simulation per grid cell");
    add_common(sweep, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(opts);
        if (run->parsed()) return cmd_run(opts);
        if (sweep->parsed()) return cmd_sweep(opts);
    } catch (const iftw::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const iftw::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const iftw::InvalidGeometry& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const iftw::NonTermination& e) {
        std::cerr << "non-termination: " << e.what() << "\n";
        return kExitNonTermination;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
