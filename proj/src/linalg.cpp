#include "ieti/linalg.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "ieti/error.hpp"

namespace ieti::la {

LinearOperator LinearOperator::from_matrix(const SparseMatrix& a)
{
    auto m = std::make_shared<const SparseMatrix>(a);
    return {a.rows(), [m](const Vector& x, Vector& y) { m->multiply(x, y); }};
}

LinearOperator LinearOperator::identity(int n)
{
    return {n, [](const Vector& x, Vector& y) { y = x; }};
}

LinearOperator LinearOperator::scaled(LinearOperator op, double s)
{
    const int n = op.size();
    return {n, [op = std::move(op), s](const Vector& x, Vector& y) {
                op.apply(x, y);
                y *= s;
            }};
}

DirectFactor::DirectFactor(const SparseMatrix& a)
    : n_(a.rows()), llt_(std::make_shared<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>())
{
    if (a.rows() != a.cols())
        throw ValidationError("factorize: matrix not square");
    if (n_ == 0)
        return;
    llt_->compute(a.to_eigen());
    if (llt_->info() != Eigen::Success)
        throw NotSpdError("factorize: matrix is not symmetric positive definite");
}

Vector DirectFactor::solve(const Vector& b) const
{
    if (n_ == 0)
        return Vector(0);
    return llt_->solve(b);
}

LinearOperator DirectFactor::as_operator() const
{
    auto self = *this;
    return {n_, [self](const Vector& x, Vector& y) { y = self.solve(x); }};
}

std::string to_string(SolveStatus s)
{
    switch (s) {
    case SolveStatus::Converged:
        return "converged";
    case SolveStatus::MaxIterations:
        return "max-iterations";
    case SolveStatus::Breakdown:
        return "breakdown";
    }
    return "unknown";
}

namespace {

SolveResult cg_core(const LinearOperator& a, const LinearOperator& precond, const Vector& b,
                    double tol, int maxit)
{
    const int n = static_cast<int>(b.size());
    SolveResult out{Vector::Zero(n), {}};
    const double bnorm = b.norm();
    if (bnorm == 0.0)
        return out;
    Vector r = b;
    Vector z, p, q;
    precond.apply(r, z);
    p = z;
    double rz = r.dot(z);
    double rnorm = bnorm;
    int it = 0;
    while (rnorm > tol * bnorm && it < maxit) {
        a.apply(p, q);
        const double pq = p.dot(q);
        if (!std::isfinite(pq) || !std::isfinite(rz) || pq <= 0.0) {
            out.report.status = SolveStatus::Breakdown;
            break;
        }
        const double alpha = rz / pq;
        out.x.noalias() += alpha * p;
        r.noalias() -= alpha * q;
        ++it;
        rnorm = r.norm();
        if (rnorm <= tol * bnorm)
            break;
        precond.apply(r, z);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    out.report.iterations = it;
    out.report.relative_residual = rnorm / bnorm;
    if (!std::isfinite(rnorm))
        out.report.status = SolveStatus::Breakdown;
    else if (out.report.status != SolveStatus::Breakdown && rnorm > tol * bnorm)
        out.report.status = SolveStatus::MaxIterations;
    return out;
}

} // namespace

SolveResult pcg(const LinearOperator& a, const LinearOperator& precond, const Vector& b,
                double tol, int maxit)
{
    return cg_core(a, precond, b, tol, maxit);
}

SolveResult semidefinite_pcg(const LinearOperator& a, const LinearOperator& precond,
                             const Vector& b, double tol, int maxit, const DenseMatrix* kernel)
{
    if (kernel != nullptr && kernel->cols() > 0) {
        // component of b in span(kernel), measured with an orthonormal basis
        const Eigen::HouseholderQR<DenseMatrix> qr(*kernel);
        const DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(kernel->rows(), kernel->cols());
        const double comp = (q.transpose() * b).norm();
        if (comp > 1e-8 * b.norm())
            throw InconsistentRhsError("semidefinite_pcg: rhs has a component in the kernel");
    }
    return cg_core(a, precond, b, tol, maxit);
}

SpectrumEstimate estimate_spectrum(const LinearOperator& a, const LinearOperator& precond_inv,
                                   int steps, std::uint64_t seed)
{
    const int n = a.size();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Vector x0(n);
    for (int i = 0; i < n; ++i)
        x0[i] = dist(rng);
    // A x0 keeps the Krylov space inside range(A) for semidefinite A
    Vector r;
    a.apply(x0, r);

    std::vector<double> alphas, betas;
    Vector z, p, q;
    precond_inv.apply(r, z);
    p = z;
    double rz = r.dot(z);
    const double rz0 = rz;
    for (int k = 0; k < steps && n > 0; ++k) {
        if (!(rz > 1e-28 * rz0))
            break;
        a.apply(p, q);
        const double pq = p.dot(q);
        if (!(pq > 0.0))
            break;
        const double alpha = rz / pq;
        r.noalias() -= alpha * q;
        precond_inv.apply(r, z);
        const double rz_new = r.dot(z);
        const double beta = rz_new / rz;
        alphas.push_back(alpha);
        betas.push_back(beta);
        p = z + beta * p;
        rz = rz_new;
    }

    SpectrumEstimate est;
    const int m = static_cast<int>(alphas.size());
    est.steps = m;
    if (m == 0) {
        // Lanczos broke down at once: power iteration on P^{-1} A instead
        Vector v = x0.normalized();
        Vector av, w;
        double rq = 0.0;
        for (int k = 0; k < std::max(steps, 1); ++k) {
            a.apply(v, av);
            precond_inv.apply(av, w);
            const double nw = w.norm();
            if (!(nw > 0.0))
                break;
            rq = v.dot(w);
            v = w / nw;
        }
        est.lambda_min = est.lambda_max = rq;
        return est;
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
        t(j, j) = 1.0 / alphas[j] + (j > 0 ? betas[j - 1] / alphas[j - 1] : 0.0);
        if (j + 1 < m) {
            const double off = std::sqrt(betas[j]) / alphas[j];
            t(j, j + 1) = off;
            t(j + 1, j) = off;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
    est.lambda_min = es.eigenvalues().minCoeff();
    est.lambda_max = es.eigenvalues().maxCoeff();
    return est;
}

double calibrate_spd_order(const LinearOperator& a, const LinearOperator& precond_inv,
                           OrderDirection direction, double margin, int steps, std::uint64_t seed)
{
    if (!(margin >= 0.0 && margin < 1.0))
        throw ValidationError("calibrate_spd_order: margin must lie in [0, 1)");
    const auto est = estimate_spectrum(a, precond_inv, steps, seed);
    return direction == OrderDirection::Above ? est.lambda_max * (1.0 + margin)
                                              : est.lambda_min * (1.0 - margin);
}

} // namespace ieti::la
