#include "ieti/saddle.hpp"

#include <cmath>

#include "ieti/error.hpp"

namespace ieti::la {

SzSolver::SzSolver(SparseMatrix k, SparseMatrix c, LinearOperator khat_inv, DenseMatrix hhat)
    : k_(std::move(k)), c_(std::move(c)), khat_inv_(std::move(khat_inv))
{
    const int n = k_.rows();
    const int m = c_.rows();
    if (c_.cols() != n || khat_inv_.size() != n || hhat.rows() != m || hhat.cols() != m)
        throw ValidationError("sz_pcg: block dimensions do not match");
    khat_inv_ct_.resize(n, m);
    const SparseMatrix ct = c_.transpose();
    for (int j = 0; j < m; ++j) {
        Vector e = Vector::Zero(m);
        e[j] = 1.0;
        Vector col;
        khat_inv_.apply(ct * e, col);
        khat_inv_ct_.col(j) = col;
    }
    h_ = DenseMatrix(m, m);
    for (int j = 0; j < m; ++j)
        h_.col(j) = c_ * Vector(khat_inv_ct_.col(j));
    h_ = 0.5 * (h_ + h_.transpose()).eval();
    hhat_llt_.compute(hhat);
    if (m > 0 && hhat_llt_.info() != Eigen::Success)
        throw NotSpdError("sz_pcg: H^ is not positive definite");
}

SzSolver SzSolver::with_scaled_schur(SparseMatrix k, SparseMatrix c, LinearOperator khat_inv,
                                     double scale)
{
    // two-phase: build once with a placeholder to get H, then rebuild the LLT
    const int m = c.rows();
    SzSolver s(std::move(k), std::move(c), std::move(khat_inv), DenseMatrix::Identity(m, m));
    s.hhat_llt_.compute(scale * s.h_);
    if (m > 0 && s.hhat_llt_.info() != Eigen::Success)
        throw NotSpdError("sz_pcg: C K^{-1} C^T is not positive definite (rank-deficient C?)");
    return s;
}

SaddleResult SzSolver::solve(const Vector& f, const Vector& g, double tol, int maxit) const
{
    const int n = k_.rows();
    const int m = c_.rows();
    SaddleResult out{Vector::Zero(n), Vector::Zero(m), {}};
    const double bnorm = std::sqrt(f.squaredNorm() + g.squaredNorm());
    if (bnorm == 0.0)
        return out;

    auto apply_a = [&](const Vector& x, const Vector& y, Vector& ax, Vector& ay) {
        k_.multiply(x, ax);
        Vector cty;
        c_.multiply_transpose(y, cty);
        ax += cty;
        c_.multiply(x, ay);
    };
    auto apply_pinv = [&](const Vector& a, const Vector& b, Vector& x, Vector& y) {
        Vector xh;
        khat_inv_.apply(a, xh);
        y = m > 0 ? Vector(hhat_llt_.solve(c_ * xh - b)) : Vector(0);
        x = xh - khat_inv_ct_ * y;
    };

    // The SZ inner product is a difference of nearly equal terms, so once the
    // residual is small the recursively updated quantities (whose rounding
    // errors scale with the initial residual) no longer resolve it. The
    // iteration is restarted from the true residual periodically, before
    // accepting convergence, and when positivity is lost; only a loss of
    // positivity right after a restart is reported as an order violation.
    constexpr int restart_every = 25;
    Vector rho_x, rho_y, r_x, r_y, ar_x, ar_y, p_x, p_y, ap_x, ap_y;
    Vector w_x, w_y, aw_x, aw_y;
    double gamma = 0.0;
    auto restart = [&] {
        apply_a(out.x, out.y, ar_x, ar_y);
        rho_x = f - ar_x;
        rho_y = g - ar_y;
        apply_pinv(rho_x, rho_y, r_x, r_y);
        apply_a(r_x, r_y, ar_x, ar_y);
        gamma = rho_x.dot(r_x) + rho_y.dot(r_y) - ar_x.dot(r_x) - ar_y.dot(r_y);
        p_x = r_x;
        p_y = r_y;
        ap_x = ar_x;
        ap_y = ar_y;
        return std::sqrt(rho_x.squaredNorm() + rho_y.squaredNorm());
    };
    double rnorm = restart();
    int it = 0;
    int since_restart = 0;
    while (rnorm > tol * bnorm && it < maxit) {
        if (!(gamma > 0.0)) {
            if (since_restart > 0) {
                rnorm = restart();
                since_restart = 0;
                continue;
            }
            throw OrderViolationError("sz_pcg: non-positive residual norm in the SZ inner product");
        }
        apply_pinv(ap_x, ap_y, w_x, w_y);
        apply_a(w_x, w_y, aw_x, aw_y);
        const double delta = ap_x.dot(p_x) + ap_y.dot(p_y) - aw_x.dot(p_x) - aw_y.dot(p_y);
        if (!(delta > 0.0)) {
            if (since_restart > 0) {
                rnorm = restart();
                since_restart = 0;
                continue;
            }
            throw OrderViolationError("sz_pcg: negative curvature in the SZ inner product");
        }
        const double alpha = gamma / delta;
        out.x.noalias() += alpha * p_x;
        out.y.noalias() += alpha * p_y;
        rho_x.noalias() -= alpha * ap_x;
        rho_y.noalias() -= alpha * ap_y;
        r_x.noalias() -= alpha * w_x;
        r_y.noalias() -= alpha * w_y;
        ar_x.noalias() -= alpha * aw_x;
        ar_y.noalias() -= alpha * aw_y;
        ++it;
        ++since_restart;
        rnorm = std::sqrt(rho_x.squaredNorm() + rho_y.squaredNorm());
        if (!std::isfinite(rnorm)) {
            out.report.status = SolveStatus::Breakdown;
            break;
        }
        if (rnorm <= tol * bnorm || since_restart == restart_every) {
            rnorm = restart();
            since_restart = 0;
            continue;
        }
        const double gamma_new = rho_x.dot(r_x) + rho_y.dot(r_y) - ar_x.dot(r_x) - ar_y.dot(r_y);
        const double beta = gamma_new / gamma;
        p_x = r_x + beta * p_x;
        p_y = r_y + beta * p_y;
        ap_x = ar_x + beta * ap_x;
        ap_y = ar_y + beta * ap_y;
        gamma = gamma_new;
    }
    out.report.iterations = it;
    out.report.relative_residual = rnorm / bnorm;
    if (out.report.status != SolveStatus::Breakdown && rnorm > tol * bnorm)
        out.report.status = SolveStatus::MaxIterations;
    return out;
}

SaddleResult sz_pcg(const SparseMatrix& k, const SparseMatrix& c, const LinearOperator& khat_inv,
                    const DenseMatrix& hhat, const Vector& f, const Vector& g, double tol,
                    int maxit)
{
    return SzSolver(k, c, khat_inv, hhat).solve(f, g, tol, maxit);
}

SaddleResult bpcg(const LinearOperator& a, const SparseMatrix& b, const LinearOperator& qinv,
                  const LinearOperator& s0inv, const Vector& f, const Vector& g, double tol,
                  int maxit)
{
    const int n = a.size();
    const int m = b.rows();
    if (b.cols() != n || qinv.size() != n || s0inv.size() != m || f.size() != n || g.size() != m)
        throw ValidationError("bpcg: block dimensions do not match");
    SaddleResult out{Vector::Zero(n), Vector::Zero(m), {}};
    const double bnorm = std::sqrt(f.squaredNorm() + g.squaredNorm());
    if (bnorm == 0.0)
        return out;

    auto apply_pinv = [&](const Vector& a_u, const Vector& a_l, Vector& u, Vector& l) {
        qinv.apply(a_u, u);
        s0inv.apply(b * u - a_l, l);
    };
    // (z, z)_H for z = P^{-1} rho, given A z_u
    auto h_norm2 = [&](const Vector& az_u, const Vector& z_u, const Vector& z_l,
                       const Vector& rho_u, const Vector& rho_l) {
        return az_u.dot(z_u) - rho_u.dot(z_u) + (b * z_u - rho_l).dot(z_l);
    };

    Vector rho_u = f, rho_l = g;
    Vector r_u, r_l, ar_u;
    apply_pinv(rho_u, rho_l, r_u, r_l);
    a.apply(r_u, ar_u);
    double gamma = h_norm2(ar_u, r_u, r_l, rho_u, rho_l);
    Vector p_u = r_u, p_l = r_l, ap_u = ar_u;
    Vector z_u, z_l, w_u, w_l, aw_u, btp;
    double rnorm = bnorm;
    int it = 0;
    while (rnorm > tol * bnorm && it < maxit) {
        if (!(gamma > 0.0))
            throw OrderViolationError("bpcg: non-positive residual norm in the BP inner product");
        b.multiply_transpose(p_l, btp);
        z_u = ap_u + btp;
        z_l = b * p_u;
        apply_pinv(z_u, z_l, w_u, w_l);
        a.apply(w_u, aw_u);
        const double delta = aw_u.dot(p_u) - z_u.dot(p_u) + (b * w_u - z_l).dot(p_l);
        if (!(delta > 0.0))
            throw OrderViolationError("bpcg: negative curvature in the BP inner product");
        const double alpha = gamma / delta;
        out.x.noalias() += alpha * p_u;
        out.y.noalias() += alpha * p_l;
        rho_u.noalias() -= alpha * z_u;
        rho_l.noalias() -= alpha * z_l;
        r_u.noalias() -= alpha * w_u;
        r_l.noalias() -= alpha * w_l;
        ar_u.noalias() -= alpha * aw_u;
        ++it;
        rnorm = std::sqrt(rho_u.squaredNorm() + rho_l.squaredNorm());
        if (!std::isfinite(rnorm)) {
            out.report.status = SolveStatus::Breakdown;
            break;
        }
        if (rnorm <= tol * bnorm)
            break;
        const double gamma_new = h_norm2(ar_u, r_u, r_l, rho_u, rho_l);
        const double beta = gamma_new / gamma;
        p_u = r_u + beta * p_u;
        p_l = r_l + beta * p_l;
        ap_u = ar_u + beta * ap_u;
        gamma = gamma_new;
    }
    out.report.iterations = it;
    out.report.relative_residual = rnorm / bnorm;
    if (out.report.status != SolveStatus::Breakdown && rnorm > tol * bnorm)
        out.report.status = SolveStatus::MaxIterations;
    return out;
}

} // namespace ieti::la
