#pragma once

// IETI-DP solver for the Poisson problem on a multipatch domain.
//
// Unknowns are split per patch into interior dofs I and interface (trace)
// dofs B. The interior is condensed out; continuity of the traces is enforced
// by vertex and edge-average primal constraints (kept strongly) and by
// Lagrange multipliers on the remaining interface dofs. The multiplier system
// F lambda = d is solved by PCG with the scaled Dirichlet preconditioner, or,
// for the MGMGS variant, the equivalent saddle-point system in transformed
// primal coordinates is solved by Bramble-Pasciak CG.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ieti/assembly.hpp"
#include "ieti/dofs.hpp"
#include "ieti/geometry.hpp"
#include "ieti/linalg.hpp"
#include "ieti/multigrid.hpp"
#include "ieti/saddle.hpp"

namespace ieti::dp {

/// DD:    direct local solves everywhere.
/// MGD:   multigrid for interior (Dirichlet) solves, direct Neumann solves.
/// MGMG:  multigrid for all local solves; primal basis by SZ-PCG.
/// MGMGS: saddle-point formulation solved by BPCG with multigrid blocks.
enum class Variant { DD, MGD, MGMG, MGMGS };

std::string to_string(Variant v);
/// Case-insensitive; accepts "MG-D" style spellings. Throws ValidationError.
Variant parse_variant(std::string_view name);

struct SolverConfig {
    Variant variant = Variant::DD;
    double outer_tol = 1e-6;
    int max_outer = 1000;
    double inner_tol = 1e-10; // MG-PCG: rhs g~, dual solves, interior recovery
    double basis_tol = 1e-12; // SZ-PCG for the primal basis
    int max_inner = 2000;
    int precond_cycles = 2;   // V-cycles per interior solve inside the Dirichlet preconditioner
    int saddle_cycles = 3;    // V-cycles of the local blocks of the BPCG preconditioner
    int smoothing_steps = 1;  // Gauss-Seidel sweeps before and after coarse correction
    double alpha = 1e-2;      // mass regularization of the Neumann multigrid
    double above_margin = 0.01; // K^ > K calibration for SZ-PCG
    double below_margin = 0.05; // Q < K~ calibration for BPCG
    int lanczos_steps = 30;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Iteration counts of one kind of inner solve, summed over patches.
struct InnerStats {
    long calls = 0;
    long iterations = 0;
    long max_iterations = 0; // of a single solve

    double average() const { return calls ? static_cast<double>(iterations) / calls : 0.0; }
    void record(long its)
    {
        ++calls;
        iterations += its;
        max_iterations = std::max(max_iterations, its);
    }
    InnerStats& operator+=(const InnerStats& o)
    {
        calls += o.calls;
        iterations += o.iterations;
        max_iterations = std::max(max_iterations, o.max_iterations);
        return *this;
    }
};

struct SolveStats {
    la::SolveReport outer;
    InnerStats gtilde;   // interior solves for the condensed rhs
    InnerStats basis;    // primal basis computation
    InnerStats dual;     // S~^{-1} applications (per patch)
    InnerStats recovery; // interior recovery
    double t_assembly = 0.0;
    double t_setup = 0.0;
    double t_solve = 0.0;
};

struct IetiSolution {
    std::vector<la::Vector> u; // per patch, full coefficient vector (zeros on the Dirichlet boundary)
    la::Vector lambda;
    SolveStats stats;
    bool converged = false;
    std::string failed_stage; // empty unless a solve failed
    std::string message;
};

/// Local primal basis: columns of phi_bar minimize the patch energy subject to
/// C phi_bar = I.
struct PrimalBasis {
    std::vector<la::DenseMatrix> phi_bar; // n_active x n_pi(k)
    std::vector<la::DenseMatrix> phi;     // |B| x n_pi(k), traces of phi_bar
    la::DenseMatrix s_pipi;               // global primal Schur complement
};

class IetiSolver {
public:
    IetiSolver(geometry::MultiPatch mp, const assembly::ScalarField& f, SolverConfig cfg);
    ~IetiSolver();
    IetiSolver(const IetiSolver&) = delete;
    IetiSolver& operator=(const IetiSolver&) = delete;

    /// Builds local solvers, the primal basis and the condensed rhs. Called by
    /// solve() if needed. Throws SolveFailure or ConstraintError.
    void setup();
    /// Never throws for solver failures; inspect `converged`/`failed_stage`.
    IetiSolution solve();

    const geometry::MultiPatch& multipatch() const { return mp_; }
    const SolverConfig& config() const { return cfg_; }
    const DofPartition& partition() const { return part_; }
    const PrimalConstraints& constraints() const { return pc_; }
    const JumpOperator& jumps() const { return jumps_; }
    const PrimalBasis& basis() const { return basis_; }
    int num_multipliers() const { return jumps_.size(); }

    /// Active stiffness, load and the I/B blocks of patch k.
    const la::SparseMatrix& stiffness(int k) const;
    const la::Vector& load(int k) const;
    /// Primal constraint matrix of patch k lifted to the active dofs.
    const la::SparseMatrix& constraint_active(int k) const;

    // Operators, available after setup().
    /// Condensed rhs g^(k) = f_B - K_BI K_II^{-1} f_I.
    const TraceVector& condensed_rhs() const { return gtilde_; }
    /// Exact Schur complement action S^(k) w.
    la::Vector apply_schur(int k, const la::Vector& w) const;
    /// S~^{-1} r for a trace functional r (primal coupling included).
    TraceVector apply_stilde_inv(const TraceVector& r) const;
    la::Vector apply_f(const la::Vector& lambda) const;
    la::Vector rhs_d() const;
    /// Scaled Dirichlet preconditioner action.
    la::Vector apply_msd(const la::Vector& lambda) const;

private:
    struct Local;
    enum class InteriorMode { Direct, Pcg, Cycles };

    la::Vector solve_interior(int k, const la::Vector& b, InteriorMode mode, InnerStats* stats) const;
    la::Vector schur(int k, const la::Vector& w, InteriorMode mode) const;
    la::Vector solve_dual(int k, const la::Vector& r) const;
    void setup_local(int k);
    void setup_basis(int k);
    void setup_saddle();
    IetiSolution solve_dual_system();
    IetiSolution solve_saddle_system();
    la::Vector to_full(int k, const la::Vector& active) const;
    InteriorMode msd_mode() const;

    geometry::MultiPatch mp_;
    SolverConfig cfg_;
    DofPartition part_;
    PrimalConstraints pc_;
    JumpOperator jumps_;
    std::vector<std::unique_ptr<Local>> local_;
    PrimalBasis basis_;
    Eigen::LLT<la::DenseMatrix> s_pipi_llt_;
    TraceVector gtilde_;
    bool ready_ = false;
    double t_assembly_ = 0.0;
    double t_setup_ = 0.0;

    // per-patch counters (each written only by the thread owning the patch)
    mutable std::vector<InnerStats> gtilde_stats_, basis_stats_, dual_stats_, recovery_stats_;

    // transformed-coordinate (MGMGS) data
    struct Saddle;
    std::unique_ptr<Saddle> saddle_;
};

/// Max |u^(k)_i - u^(l)_i| over all pairs of copies of every interface dof.
double continuity_residual(const DofPartition& part, const std::vector<la::Vector>& u_full);

/// L2(Omega) error against `exact`.
double l2_error(const geometry::MultiPatch& mp, const std::vector<la::Vector>& u_full,
                const assembly::ScalarField& exact);

} // namespace ieti::dp
