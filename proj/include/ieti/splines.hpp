#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ieti/sparse.hpp"

namespace ieti::splines {

/// Open (clamped) knot vector on [0,1] with simple interior knots.
class KnotVector {
public:
    /// Validates the invariants; throws ValidationError otherwise.
    KnotVector(int degree, std::vector<double> knots);

    /// Open knot vector with `spans` equal spans.
    static KnotVector uniform(int degree, int spans);

    int degree() const { return degree_; }
    std::span<const double> knots() const { return knots_; }
    /// Number of basis functions M = len(knots) - p - 1.
    int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    int num_spans() const;
    /// Distinct breakpoints including 0 and 1.
    std::vector<double> breakpoints() const;
    /// Index s with knots[s] <= x < knots[s+1] (s <= M-1; x = 1 maps to the last span).
    int find_span(double x) const;

    /// Integral of each basis function over [0,1]: (t_{i+p+1} - t_i)/(p+1).
    std::vector<double> basis_integrals() const;

    /// Knot vector mirrored by t -> 1 - t.
    KnotVector reversed() const;

    bool operator==(const KnotVector& other) const = default;

private:
    int degree_;
    std::vector<double> knots_;
};

/// Values (row 0) and derivatives (row k) of the p+1 active basis functions.
struct BasisTable {
    int first_active = 0;
    Eigen::MatrixXd values; // (nderiv+1) x (p+1)
};

/// Cox-de Boor evaluation with derivatives up to `nderiv`.
BasisTable eval_basis(const KnotVector& kv, double x, int nderiv);

/// max over samples of |sum_i N_i(x) - 1|
double partition_of_unity_check(const KnotVector& kv, std::span<const double> samples);

/// Inserts the midpoint of every nonempty span once.
KnotVector dyadic_refine(const KnotVector& kv);

/// Matrix P (M_fine x M_coarse) with fine coefficients = P * coarse coefficients.
/// Built by repeated single-knot (Boehm) insertion.
la::SparseMatrix prolongation_1d(const KnotVector& coarse, const KnotVector& fine);

/// Two-dimensional tensor-product space; flat dof index i1 + M1 * i2.
class TensorSplineSpace {
public:
    TensorSplineSpace(KnotVector dir1, KnotVector dir2);

    static TensorSplineSpace uniform(int degree, int spans);

    const KnotVector& knots(int dir) const { return dirs_[dir]; }
    int size(int dir) const { return dirs_[dir].size(); }
    int size() const { return dirs_[0].size() * dirs_[1].size(); }

    int flat_index(int i1, int i2) const { return i1 + size(0) * i2; }
    std::array<int, 2> multi_index(int flat) const { return {flat % size(0), flat / size(0)}; }

    TensorSplineSpace refined() const;

private:
    std::array<KnotVector, 2> dirs_;
};

/// Kronecker product of the directional prolongations in flat numbering.
la::SparseMatrix tensor_prolongation(const TensorSplineSpace& coarse,
                                     const TensorSplineSpace& fine);

/// Evaluates sum_i c_i N_i at (xi, eta).
double evaluate(const TensorSplineSpace& space, std::span<const double> coefs, double xi,
                double eta);

} // namespace ieti::splines
