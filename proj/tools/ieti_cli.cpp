// Command-line driver for IETI-DP experiments on the quarter annulus.
//
//   ieti solve --config cfg.json
//   ieti solve --variant dd,mgd --patches 8 4 --degree 2 --levels 2..5 --tol 1e-6 --out results.csv
//   ieti converge --config cfg.json
//
// IETI_NUM_THREADS sets the number of worker threads. Exit code 0 iff every run converged.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ieti/error.hpp"
#include "ieti/experiment.hpp"
#include "ieti/kernels.hpp"

namespace {

using namespace ieti;

std::vector<int> parse_levels(const std::string& s)
{
    const auto dots = s.find("..");
    if (dots == std::string::npos)
        return {std::stoi(s)};
    const int lo = std::stoi(s.substr(0, dots));
    const int hi = std::stoi(s.substr(dots + 2));
    if (hi < lo)
        throw ValidationError("levels: empty range '" + s + "'");
    std::vector<int> out;
    for (int l = lo; l <= hi; ++l)
        out.push_back(l);
    return out;
}

std::vector<dp::Variant> parse_variants(const std::string& s)
{
    if (s == "all")
        return {dp::Variant::DD, dp::Variant::MGD, dp::Variant::MGMG, dp::Variant::MGMGS};
    std::vector<dp::Variant> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(dp::parse_variant(item));
    return out;
}

void print_runs(const std::vector<exp::RunRecord>& rows)
{
    std::printf("%-6s %5s %9s %6s %8s %8s %8s %9s %9s %9s %10s  %s\n", "var", "level", "dofs",
                "outer", "gtilde", "basis", "dual", "t_asm[s]", "t_set[s]", "t_sol[s]",
                "residual", "status");
    for (const auto& r : rows)
        std::printf("%-6s %5d %9ld %6d %8.1f %8.1f %8.1f %9.3f %9.3f %9.3f %10.2e  %s\n",
                    r.variant.c_str(), r.level, r.dofs, r.outer_it, r.inner_it_gtilde,
                    r.inner_it_basis, r.inner_it_dual, r.t_assembly_s, r.t_setup_s, r.t_solve_s,
                    r.residual, r.converged ? "ok" : ("FAILED (" + r.failed_stage + ")").c_str());
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"IETI-DP multipatch isogeometric Poisson solver"};
    app.require_subcommand(1);

    std::string config_path;
    std::string variants = "dd";
    std::vector<int> patches{8, 4};
    int degree = 2;
    std::string levels = "2..5";
    double tol = 1e-6;
    std::string out_csv;
    std::string out_json;
    std::string rhs = "manufactured";

    auto* solve = app.add_subcommand("solve", "run a variant/level sweep");
    solve->add_option("--config", config_path, "JSON experiment config");
    solve->add_option("--variant", variants, "dd|mgd|mgmg|mgmgs, comma-separated, or 'all'");
    solve->add_option("--patches", patches, "N_theta N_r")->expected(2);
    solve->add_option("--degree", degree, "spline degree");
    solve->add_option("--levels", levels, "refinement levels, e.g. 3 or 2..5");
    solve->add_option("--tol", tol, "outer relative tolerance");
    solve->add_option("--rhs", rhs, "manufactured|constant");
    solve->add_option("--out", out_csv, "CSV output path");
    solve->add_option("--json", out_json, "JSON output path");

    auto* converge = app.add_subcommand("converge", "L2 convergence study (DD variant)");
    converge->add_option("--config", config_path, "JSON experiment config");
    converge->add_option("--patches", patches, "N_theta N_r")->expected(2);
    converge->add_option("--degree", degree, "spline degree");
    converge->add_option("--levels", levels, "refinement levels, e.g. 1..4");
    converge->add_option("--out", out_csv, "CSV output path");

    CLI11_PARSE(app, argc, argv);

    try {
        const int threads = kernels::configure_threads_from_env();
        exp::ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = exp::load_config(config_path);
        } else {
            cfg.n_theta = patches[0];
            cfg.n_radial = patches[1];
            cfg.degree = degree;
            cfg.levels = parse_levels(levels);
            cfg.variants = parse_variants(variants);
            cfg.solver.outer_tol = tol;
            if (rhs == "constant")
                cfg.rhs = exp::RhsKind::Constant;
            else if (rhs != "manufactured")
                throw ValidationError("--rhs must be 'manufactured' or 'constant'");
            cfg.csv_path = out_csv;
            cfg.json_path = out_json;
            cfg.validate();
        }
        std::fprintf(stderr, "threads: %d\n", threads);

        if (*solve) {
            const auto rows = exp::run_experiment(cfg);
            print_runs(rows);
            exp::write_outputs(cfg, rows);
            for (const auto& r : rows)
                if (!r.converged)
                    return 1;
            return 0;
        }
        if (!out_csv.empty())
            cfg.csv_path = out_csv;
        const auto rows = exp::run_convergence(cfg);
        std::printf("%5s %10s %12s %6s\n", "level", "h", "L2 error", "rate");
        bool ok = true;
        for (const auto& r : rows) {
            std::printf("%5d %10.4g %12.4e %6.2f%s\n", r.level, r.h, r.l2_error, r.rate,
                        r.converged ? "" : "  FAILED");
            ok = ok && r.converged;
        }
        if (!cfg.csv_path.empty()) {
            std::ofstream out(cfg.csv_path);
            exp::write_convergence_csv(out, rows);
        }
        return ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
