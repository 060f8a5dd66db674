#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ieti/geometry.hpp"
#include "ieti/linalg.hpp"
#include "ieti/splines.hpp"

namespace ieti::mg {

struct MgConfig {
    int pre_smooth = 1;  // forward Gauss-Seidel sweeps
    int post_smooth = 1; // backward Gauss-Seidel sweeps
    int cycles = 1;      // V-cycles per preconditioner application
    double alpha = 0.0;  // weight of the parameter-domain mass regularization

    void validate() const;
};

struct MgLevel {
    la::SparseMatrix a;
    /// Prolongation from this level to the next finer one (empty on the finest).
    la::SparseMatrix p;
};

/// Nested dyadic hierarchy, level 0 coarsest. Coarse operators are Galerkin
/// products A_l = P_l^T A_{l+1} P_l; the coarsest level is factorized.
class MgHierarchy {
public:
    MgHierarchy(std::vector<MgLevel> levels);

    int num_levels() const { return static_cast<int>(levels_.size()); }
    const MgLevel& level(int l) const { return levels_[l]; }
    const la::SparseMatrix& fine_matrix() const { return levels_.back().a; }
    int size() const { return fine_matrix().rows(); }

    /// One V-cycle from a zero initial guess.
    la::Vector v_cycle(const MgConfig& cfg, const la::Vector& b) const;

private:
    void cycle(int level, const MgConfig& cfg, const la::Vector& b, la::Vector& x) const;

    std::vector<MgLevel> levels_;
    la::DirectFactor coarse_;
};

/// Builds the hierarchy for a patch space. The fine matrix is `fine_full`
/// (+ alpha * parameter mass if alpha > 0) restricted to the dofs not lying on
/// `eliminated_sides`. `levels` counts all levels including the finest; it is
/// clipped so that the coarsest level keeps at least one span per direction
/// and at least one dof. Throws ValidationError if levels < 1.
MgHierarchy build_hierarchy(const splines::TensorSplineSpace& fine_space,
                            const la::SparseMatrix& fine_full,
                            std::span<const geometry::Side> eliminated_sides, double alpha,
                            int levels);

/// Same, assembling the stiffness from the geometry.
MgHierarchy build_hierarchy(const splines::TensorSplineSpace& fine_space,
                            const geometry::GeometryMap& geo,
                            std::span<const geometry::Side> eliminated_sides, double alpha,
                            int levels);

/// Maximum number of levels a dyadic space with 2^L spans supports.
int max_levels(const splines::TensorSplineSpace& fine_space);

enum class SweepOrder { Forward, Backward };

/// In-place Gauss-Seidel sweeps. Throws ValidationError on a zero diagonal.
void gauss_seidel(const la::SparseMatrix& a, la::Vector& x, const la::Vector& b, int sweeps,
                  SweepOrder order);

/// cfg.cycles V-cycles as a stationary iteration from zero (fixed linear
/// operator, symmetric positive definite).
la::LinearOperator mg_preconditioner(std::shared_ptr<const MgHierarchy> h, MgConfig cfg);

} // namespace ieti::mg
