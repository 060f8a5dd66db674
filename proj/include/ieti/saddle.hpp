#pragma once

// Krylov solvers for symmetric saddle-point systems
//
//     [ K  C^T ] [x]   [f]
//     [ C   0  ] [y] = [g]
//
// that run CG in a non-standard inner product in which the preconditioned
// operator is self-adjoint and positive definite:
//
//  * Schoeberl-Zulehner: preconditioner [K^ C^T; C  C K^{-1} C^T - H^],
//    inner product diag(K^ - K, H - H^), H = C K^{-1} C^T. Needs K^ > K and
//    H^ < H; K itself may be semidefinite.
//  * Bramble-Pasciak: preconditioner [Q 0; B -S0], inner product
//    diag(A - Q, S0). Needs Q < A, so A must be definite.
//
// Both only use the inverse actions of the preconditioner blocks; the
// inner products are evaluated through the identity P r = rho for the
// preconditioned residual r.

#include "ieti/linalg.hpp"

namespace ieti::la {

struct SaddleResult {
    Vector x; // primal block
    Vector y; // multiplier block
    SolveReport report;
};

/// Reusable SZ-preconditioned CG for a fixed (K, C, K^, H^). The columns
/// K^{-1} C^T are computed once, so each iteration costs one K^ action.
class SzSolver {
public:
    SzSolver(SparseMatrix k, SparseMatrix c, LinearOperator khat_inv, DenseMatrix hhat);

    /// Convenience: H^ = scale * C K^{-1} C^T.
    static SzSolver with_scaled_schur(SparseMatrix k, SparseMatrix c, LinearOperator khat_inv,
                                      double scale);

    /// Throws OrderViolationError on negative curvature.
    SaddleResult solve(const Vector& f, const Vector& g, double tol, int maxit) const;

    /// H = C K^{-1} C^T (exact for the given K^).
    const DenseMatrix& inexact_schur() const { return h_; }

private:
    SparseMatrix k_;
    SparseMatrix c_;
    LinearOperator khat_inv_;
    DenseMatrix khat_inv_ct_;
    DenseMatrix h_;
    Eigen::LLT<DenseMatrix> hhat_llt_;
};

SaddleResult sz_pcg(const SparseMatrix& k, const SparseMatrix& c, const LinearOperator& khat_inv,
                    const DenseMatrix& hhat, const Vector& f, const Vector& g, double tol,
                    int maxit);

/// Bramble-Pasciak CG. `a` is the SPD upper-left block, `qinv` the inverse of
/// a preconditioner Q < A, `s0inv` the inverse of a Schur-complement
/// preconditioner. Stops on ||b - A_saddle z|| <= tol ||b||.
SaddleResult bpcg(const LinearOperator& a, const SparseMatrix& b, const LinearOperator& qinv,
                  const LinearOperator& s0inv, const Vector& f, const Vector& g, double tol,
                  int maxit);

} // namespace ieti::la
