#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ieti/solver.hpp"

namespace ieti::exp {

enum class RhsKind { Manufactured, Constant };

struct ExperimentConfig {
    int n_theta = 8;
    int n_radial = 4;
    int degree = 2;
    std::vector<int> levels{2, 3, 4, 5};
    std::vector<dp::Variant> variants{dp::Variant::DD, dp::Variant::MGD, dp::Variant::MGMG,
                                      dp::Variant::MGMGS};
    dp::SolverConfig solver; // tolerances etc.; `variant` is overridden per run
    RhsKind rhs = RhsKind::Manufactured;
    std::string csv_path;
    std::string json_path;
    std::uint64_t seed = 1;

    /// Throws ValidationError.
    void validate() const;
};

/// Reads a JSON config:
///   {"domain": {"patches": [8, 4], "degree": 2, "levels": [2, 3, 4]},
///    "variants": ["dd", "mgd", "mgmg", "mgmgs"],
///    "tolerances": {"outer": 1e-6, "basis": 1e-12, "inner": 1e-10},
///    "rhs": "manufactured" | "constant",
///    "output": {"csv": "results.csv", "json": "results.json"},
///    "seed": 1}
/// All keys are optional. Throws ValidationError on malformed input.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

struct RunRecord {
    std::string variant;
    int level = 0;
    long dofs = 0; // sum of the patch space dimensions
    int outer_it = 0;
    double inner_it_gtilde = 0.0;
    double inner_it_basis = 0.0;
    double inner_it_dual = 0.0;
    double t_assembly_s = 0.0;
    double t_setup_s = 0.0;
    double t_solve_s = 0.0;
    double residual = 0.0;
    bool converged = false;
    std::string failed_stage;

    bool operator==(const RunRecord&) const = default;
};

/// One row per (level, variant), levels outer. Failures are recorded, not thrown.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

void write_csv(std::ostream& os, const std::vector<RunRecord>& rows);
std::vector<RunRecord> read_csv(std::istream& is);
std::string to_json(const std::vector<RunRecord>& rows);
/// Writes cfg.csv_path / cfg.json_path when set.
void write_outputs(const ExperimentConfig& cfg, const std::vector<RunRecord>& rows);

struct ConvergenceRow {
    int level = 0;
    double h = 0.0;        // parameter-space mesh size 2^-level
    double l2_error = 0.0;
    double rate = 0.0;     // log2(e_{l-1} / e_l); 0 on the first row
    bool converged = false;
};

/// DD solves of the manufactured problem on each level.
std::vector<ConvergenceRow> run_convergence(const ExperimentConfig& cfg);
void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows);

} // namespace ieti::exp
