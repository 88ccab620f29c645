// delaysync command-line tool: scenario runs, spectral certificates, gain
// synthesis, and plot-script emission.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "delaysync/engine.hpp"
#include "delaysync/scenario_io.hpp"

namespace {

// Exit codes (documented in README):
//   0 success (run converged / certificate passed)
//   1 internal or I/O error
//   2 scenario parse failure
//   3 scenario validation failure
//   4 divergence during simulation
//   5 run completed without reaching the tolerance
//   6 certificate sweep failed
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitNonConvergence = 5;
constexpr int kExitCertificateFail = 6;

int log_level() {
    static const int level = [] {
        const char* env = std::getenv("DELAYSYNC_LOG");
        if (!env) return 1;
        const std::string v(env);
        if (v == "error") return 0;
        if (v == "info") return 1;
        if (v == "debug") return 2;
        std::cerr << "delaysync: unknown DELAYSYNC_LOG value '" << v
                  << "', using 'info'\n";
        return 1;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[debug] " << msg << "\n";
}

std::string fmt(double v) { return delaysync::io::format_number(v); }

std::string matrix_lines(const delaysync::RealMatrix& m, const std::string& name) {
    std::string out = name + " =\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out += "  [";
        for (std::size_t j = 0; j < m.cols(); ++j)
            out += (j ? ", " : "") + fmt(m(i, j));
        out += "]\n";
    }
    return out;
}

struct Overrides {
    long horizon = -1;
    double tol = -1.0;
    long seed = -1;
};

delaysync::Scenario load_with_overrides(const std::string& path, const Overrides& ov,
                                        std::string* raw_text = nullptr) {
    const std::string text = delaysync::io::read_file(path);
    if (raw_text) *raw_text = text;
    delaysync::Scenario s = delaysync::io::parse_scenario(text);
    if (ov.horizon >= 0) s.horizon = static_cast<std::size_t>(ov.horizon);
    if (ov.tol >= 0.0) s.tolerance = ov.tol;
    if (ov.seed >= 0) s.seed = static_cast<unsigned>(ov.seed);
    return s;
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir, const Overrides& ov) {
    std::string raw;
    const delaysync::Scenario s = load_with_overrides(scenario_path, ov, &raw);
    const delaysync::ResolvedScenario rs = delaysync::resolve(s);
    log_info("scenario '" + s.name + "' (" + delaysync::to_string(s.variant) + ", " +
             std::to_string(rs.agent_count()) + " agents, horizon " +
             std::to_string(s.horizon) + ", seed " + std::to_string(s.seed) + ")");
    if (!rs.gains_schur)
        log_info("warning: closed-loop gains are not Schur; expect non-convergence");

    const delaysync::SimResult res = delaysync::run(rs);
    log_debug("final max error " + fmt(res.final_max_error));

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw delaysync::IoError("cannot create output directory " + out_dir);
    delaysync::io::write_file(fs::path(out_dir) / "trajectories.csv",
                              delaysync::io::trajectories_csv(rs, res));
    delaysync::io::write_file(fs::path(out_dir) / "errors.csv", delaysync::io::errors_csv(res));
    delaysync::io::write_file(fs::path(out_dir) / "reference.csv",
                              delaysync::io::reference_csv(res));
    delaysync::io::write_file(fs::path(out_dir) / "manifest.json",
                              delaysync::io::run_manifest(raw, s, res).dump(2) + "\n");

    std::cout << "run " << (res.converged ? "converged" : "did not converge")
              << ": final max error " << fmt(res.final_max_error) << " (tolerance "
              << fmt(s.tolerance) << ") after " << res.horizon << " steps\n";
    std::cout << "bundle written to " << out_dir << "\n";
    return res.converged ? kExitOk : kExitNonConvergence;
}

int cmd_certify(const std::string& scenario_path, std::size_t grid, double margin,
                const std::string& out_file) {
    const delaysync::Scenario s = load_with_overrides(scenario_path, {});
    const delaysync::ResolvedScenario rs = delaysync::resolve(s);
    log_info("certifying '" + s.name + "' over " + std::to_string(grid) +
             " frequency points, margin " + fmt(margin));
    const delaysync::CertificateReport rep = delaysync::certificate_sweep(rs, grid, margin);
    if (!out_file.empty())
        delaysync::io::write_file(out_file, delaysync::io::certificate_csv(rep));
    std::cout << "certificate " << (rep.passed ? "PASS" : "FAIL") << ": min unit-circle distance "
              << fmt(rep.min_distance) << " at omega " << fmt(rep.worst_omega) << " (margin "
              << fmt(rep.margin) << ", " << rep.points.size() << " sampled points)\n";
    std::cout << "note: sampled numeric certificate, not a proof\n";
    return rep.passed ? kExitOk : kExitCertificateFail;
}

int cmd_synthesize(const std::string& scenario_path) {
    delaysync::Scenario s = load_with_overrides(scenario_path, {});
    s.gains.k = delaysync::RealMatrix{};
    s.gains.h = delaysync::RealMatrix{};
    const delaysync::ResolvedScenario rs = delaysync::resolve(s);
    std::cout << matrix_lines(rs.k_gain, "K");
    if (!rs.h_gain.empty()) std::cout << matrix_lines(rs.h_gain, "H");
    return kExitOk;
}

int cmd_plot(const std::string& bundle_dir) {
    namespace fs = std::filesystem;
    for (const char* name : {"trajectories.csv", "errors.csv", "manifest.json"})
        if (!fs::exists(fs::path(bundle_dir) / name))
            throw delaysync::IoError("bundle is missing " + std::string(name) + " in " +
                                     bundle_dir);
    const std::string script = R"PY(#!/usr/bin/env python3
"""Plot a delaysync result bundle: per-agent outputs against the delayed
reference, and the synchronization error norms. Reads only the CSVs next to
this script."""
import csv
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))

def load(name):
    with open(os.path.join(HERE, name), newline="") as f:
        return list(csv.DictReader(f))

traj = load("trajectories.csv")
errs = load("errors.csv")
agents = sorted({int(r["agent"]) for r in traj})

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(9, 8), sharex=True)
for a in agents:
    rows = [r for r in traj if int(r["agent"]) == a]
    ks = [int(r["step"]) for r in rows]
    ax1.plot(ks, [float(r["y1"]) for r in rows], label=f"agent {a}")
ref_rows = [r for r in traj if int(r["agent"]) == agents[0]]
ax1.plot([int(r["step"]) for r in ref_rows],
         [float(r["yr_delayed1"]) for r in ref_rows],
         "k--", label="reference (delayed)")
ax1.set_ylabel("output")
ax1.legend(loc="best", fontsize="small")
ax1.set_title("Outputs vs delayed reference")

for a in agents:
    rows = [r for r in errs if int(r["agent"]) == a and r["valid"] == "1"]
    ax2.semilogy([int(r["step"]) for r in rows],
                 [max(float(r["error_norm"]), 1e-18) for r in rows],
                 label=f"agent {a}")
ax2.set_xlabel("step")
ax2.set_ylabel("||e_i(k)||")
ax2.set_title("Delayed regulated synchronization error")

out = os.path.join(HERE, "figure.png")
fig.tight_layout()
fig.savefig(out, dpi=120)
print(f"wrote {out}")
)PY";
    const fs::path script_path = fs::path(bundle_dir) / "plot.py";
    delaysync::io::write_file(script_path, script);
    std::cout << "plot script written to " << script_path.string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"delaysync: scale-free delayed synchronization protocols for "
                 "discrete-time multi-agent systems"};
    app.require_subcommand(1);

    Overrides ov;
    std::string scenario_path, out_dir, out_file, bundle_dir;
    std::size_t grid = 256;
    double margin = 1e-3;

    CLI::App* run = app.add_subcommand("run", "Simulate a scenario and write a result bundle");
    run->add_option("file", scenario_path, "Scenario file (JSON)")->required();
    run->add_option("--out", out_dir, "Output bundle directory")->required();
    run->add_option("--horizon", ov.horizon, "Override the step count")
        ->check(CLI::PositiveNumber);
    run->add_option("--tol", ov.tol, "Override the convergence tolerance")
        ->check(CLI::PositiveNumber);
    run->add_option("--seed", ov.seed, "Override the initial-condition seed")
        ->check(CLI::NonNegativeNumber);

    CLI::App* certify = app.add_subcommand("certify", "Frequency-sweep spectral certificate");
    certify->add_option("file", scenario_path, "Scenario file (JSON)")->required();
    certify->add_option("--grid", grid, "Number of frequency samples on [0, 2pi)")
        ->check(CLI::PositiveNumber);
    certify->add_option("--margin", margin, "Required distance to the unit circle")
        ->check(CLI::PositiveNumber);
    certify->add_option("--out", out_file, "Write the per-frequency report CSV here");

    CLI::App* plot = app.add_subcommand("plot", "Emit a plotting script for a result bundle");
    plot->add_option("dir", bundle_dir, "Result bundle directory")->required();

    CLI::App* synth = app.add_subcommand("synthesize", "Print synthesized gains K (and H)");
    synth->add_option("file", scenario_path, "Scenario file (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(scenario_path, out_dir, ov);
        if (certify->parsed()) return cmd_certify(scenario_path, grid, margin, out_file);
        if (plot->parsed()) return cmd_plot(bundle_dir);
        if (synth->parsed()) return cmd_synthesize(scenario_path);
    } catch (const delaysync::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const delaysync::DivergenceError& e) {
        std::cerr << "divergence at step " << e.step() << ": " << e.what() << "\n";
        return kExitDivergence;
    } catch (const delaysync::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const delaysync::Error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
