#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "nullflow/errors.hpp"
#include "nullflow/flow.hpp"
#include "nullflow/frames.hpp"
#include "nullflow/scenario.hpp"
#include "nullflow/serialize.hpp"
#include "nullflow/verify.hpp"

namespace {

using namespace nullflow;

std::string artifact(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

int run_synth(const Scenario& sc, const std::string& dir) {
    const EvolutionSetup& s = sc.setup;
    const FramedCurve curve = integrate_curve(s.kind, s.curvature, s.initial_frame, s.start, 0.0,
                                              s.grid.length, s.grid.du);
    write_file(artifact(dir, "curve.csv"), to_csv(curve));
    std::cout << "synth: " << curve.s.size() << " samples, max frame residual "
              << format_double(max_frame_residual(curve.frame.back())) << "\n";
    return 0;
}

int run_simulate(const Scenario& sc, const std::string& dir) {
    const CurveGrid grid = evolve(sc.setup);
    write_file(artifact(dir, "grid.csv"), to_csv(grid));
    write_file(artifact(dir, "grid.bin"), to_binary(grid));
    write_file(artifact(dir, "arclength_drift.csv"), arclength_drift_csv(grid));
    double max_drift = 0.0;
    const double base = grid.s[grid.idx(grid.nu - 1, 0)];
    for (std::size_t j = 0; j < grid.nt; ++j)
        max_drift = std::max(max_drift,
                             std::abs(grid.s[grid.idx(grid.nu - 1, j)] - base));
    std::cout << "simulate: " << grid.nu << "x" << grid.nt << " grid, max arclength drift "
              << format_double(max_drift) << "\n";
    return 0;
}

int run_verify(const Scenario& sc, const std::string& dir) {
    VerifyOptions opts;
    opts.refinements = sc.refinements;
    opts.mode = sc.setup.mode;
    opts.pass_rtol = sc.pass_rtol;
    opts.min_order = sc.min_order;
    const auto reports = run_verification(sc.setup, opts);
    write_file(artifact(dir, "report.json"), report_json(reports, sc.name, opts.mode));
    const std::string table = report_text(reports);
    write_file(artifact(dir, "report.txt"), table);
    std::cout << table;
    return all_identities_pass(reports) ? 0 : 1;
}

int run_audit(const Scenario& sc, const std::string& dir) {
    AuditOptions opts;
    opts.seed = sc.seed;
    opts.refinements = sc.refinements;
    const auto entries = run_sign_audit(sc.setup.kind, opts);
    write_file(artifact(dir, "audit.json"), audit_json(entries, sc.setup.kind, opts.seed));
    const std::string table = audit_text(entries);
    write_file(artifact(dir, "audit.txt"), table);
    std::cout << table;
    for (const auto& e : entries)
        if (!e.unique) return 1;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nullflow: synthesize, evolve and verify null curve flows in E4_1"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, mode_str;
    int refinements = 0;

    const auto add_common = [&](CLI::App* cmd, bool with_mode, bool with_refinements) {
        cmd->add_option("--scenario", scenario_path, "scenario file (INI)")->required();
        cmd->add_option("--out", out_dir, "output directory (default: out/<scenario name>)");
        if (with_mode)
            cmd->add_option("--mode", mode_str, "evolution mode")
                ->check(CLI::IsMember({"transport", "position"}));
        if (with_refinements)
            cmd->add_option("--refinements", refinements, "grid refinement count")
                ->check(CLI::Range(1, 8));
    };

    CLI::App* synth = app.add_subcommand("synth", "synthesize the initial curve -> curve.csv");
    add_common(synth, false, false);
    CLI::App* simulate =
        app.add_subcommand("simulate", "evolve the curve -> grid.csv, grid.bin, drift series");
    add_common(simulate, true, false);
    CLI::App* verify =
        app.add_subcommand("verify", "check the evolution identities -> report.json/.txt");
    add_common(verify, true, true);
    CLI::App* audit =
        app.add_subcommand("audit", "arbitrate ambiguous sign variants -> audit.json/.txt");
    add_common(audit, false, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        Scenario sc = load_scenario(scenario_path);
        if (!mode_str.empty())
            sc.setup.mode =
                mode_str == "position" ? EvolutionMode::Position : EvolutionMode::Transport;
        if (refinements > 0) sc.refinements = refinements;
        const std::string dir = !out_dir.empty()
                                    ? out_dir
                                    : (!sc.output_dir.empty() ? sc.output_dir : "out/" + sc.name);
        if (synth->parsed()) return run_synth(sc, dir);
        if (simulate->parsed()) return run_simulate(sc, dir);
        if (verify->parsed()) return run_verify(sc, dir);
        return run_audit(sc, dir);
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const DegeneracyError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const nullflow::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
