#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ieti/geometry.hpp"
#include "ieti/sparse.hpp"
#include "ieti/splines.hpp"

namespace ieti::assembly {

using ScalarField = std::function<double(const geometry::Point&)>;

/// Gauss-Legendre nodes and weights on [0,1].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
QuadratureRule gauss_legendre(int n);

/// Stiffness K_ab = int grad N_a . grad N_b dx with p+1 Gauss points per
/// direction and span. Throws AssemblyError on a non-positive Jacobian.
la::SparseMatrix assemble_stiffness(const splines::TensorSplineSpace& space,
                                    const geometry::GeometryMap& geo);

/// 1D mass matrix on [0,1].
la::SparseMatrix assemble_mass_1d(const splines::KnotVector& kv);

/// Parameter-domain mass matrix M1 ⊗ M2 (flat numbering, direction 1 fastest).
la::SparseMatrix assemble_parameter_mass(const splines::TensorSplineSpace& space);

/// Load f_a = int f N_a dx.
la::Vector assemble_load(const splines::TensorSplineSpace& space, const geometry::GeometryMap& geo,
                         const ScalarField& f);

/// Local system after elimination of homogeneous Dirichlet dofs.
struct PatchSystem {
    la::SparseMatrix stiffness;  // active x active
    la::Vector load;             // active
    std::vector<int> active;     // active index -> full flat index
    std::vector<int> full_to_active; // full flat index -> active index or -1
};

/// Removes the rows/columns listed in `eliminated` (full flat indices).
PatchSystem eliminate_dirichlet(const la::SparseMatrix& k, const la::Vector& f,
                                std::span<const int> eliminated);

/// Full flat dofs on the listed sides.
std::vector<int> dofs_on_sides(const splines::TensorSplineSpace& space,
                               std::span<const geometry::Side> sides);

/// L2(Omega) error of a patch function against an exact solution, using
/// p+3 Gauss points per span.
double l2_error_squared(const splines::TensorSplineSpace& space, const geometry::GeometryMap& geo,
                        std::span<const double> coefs, const ScalarField& exact);

/// Manufactured solution on the quarter annulus vanishing on all of its boundary:
/// u = (r^2 - r0^2)(r1^2 - r^2) sin(2 theta).
struct ManufacturedSolution {
    double r0 = geometry::kInnerRadius;
    double r1 = geometry::kOuterRadius;
    double u(const geometry::Point& x) const;
    /// -Laplace(u)
    double f(const geometry::Point& x) const;
};

} // namespace ieti::assembly
