#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/SparseCholesky>

#include "ieti/sparse.hpp"

namespace ieti::la {

/// Linear map R^n -> R^n given by its action.
class LinearOperator {
public:
    using Apply = std::function<void(const Vector&, Vector&)>;

    LinearOperator() = default;
    LinearOperator(int size, Apply apply) : size_(size), apply_(std::move(apply)) {}

    static LinearOperator from_matrix(const SparseMatrix& a);
    static LinearOperator identity(int n);
    /// s * op
    static LinearOperator scaled(LinearOperator op, double s);

    int size() const { return size_; }
    void apply(const Vector& x, Vector& y) const { apply_(x, y); }
    Vector operator*(const Vector& x) const
    {
        Vector y;
        apply_(x, y);
        return y;
    }
    explicit operator bool() const { return static_cast<bool>(apply_); }

private:
    int size_ = 0;
    Apply apply_;
};

/// Sparse Cholesky factorization P^T A P = L L^T (AMD ordering).
class DirectFactor {
public:
    /// Throws NotSpdError on a non-positive pivot.
    explicit DirectFactor(const SparseMatrix& a);

    int size() const { return n_; }
    Vector solve(const Vector& b) const;
    /// Solve action as an operator.
    LinearOperator as_operator() const;

private:
    int n_ = 0;
    std::shared_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> llt_;
};

enum class SolveStatus { Converged, MaxIterations, Breakdown };
std::string to_string(SolveStatus s);

struct SolveReport {
    int iterations = 0;
    double relative_residual = 0.0;
    SolveStatus status = SolveStatus::Converged;

    bool converged() const { return status == SolveStatus::Converged; }
};

struct SolveResult {
    Vector x;
    SolveReport report;
};

/// Preconditioned CG from a zero initial guess. Stops when the unpreconditioned
/// residual satisfies ||b - A x|| <= tol ||b||.
SolveResult pcg(const LinearOperator& a, const LinearOperator& precond, const Vector& b,
                double tol, int maxit);

/// CG for a symmetric positive semidefinite operator with consistent rhs.
/// If `kernel` is given (a basis of ker A as columns), b is checked for
/// orthogonality and InconsistentRhsError raised beyond 1e-8 ||b||.
SolveResult semidefinite_pcg(const LinearOperator& a, const LinearOperator& precond,
                             const Vector& b, double tol, int maxit,
                             const DenseMatrix* kernel = nullptr);

/// Extreme eigenvalue estimates of P^{-1} A from a CG-Lanczos run.
struct SpectrumEstimate {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    int steps = 0;
};
SpectrumEstimate estimate_spectrum(const LinearOperator& a, const LinearOperator& precond_inv,
                                   int steps, std::uint64_t seed);

enum class OrderDirection { Above, Below };

/// Scale s with s P > A (Above: s = lambda_max (1 + margin)) or s P < A
/// (Below: s = lambda_min (1 - margin)), where P^{-1} is given as an action.
/// The scaled preconditioner inverse is P^{-1} / s.
double calibrate_spd_order(const LinearOperator& a, const LinearOperator& precond_inv,
                           OrderDirection direction, double margin, int steps = 20,
                           std::uint64_t seed = 1);

} // namespace ieti::la
