#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ieti/error.hpp"
#include "ieti/linalg.hpp"
#include "oracles.hpp"

using namespace ieti;
using la::DenseMatrix;
using la::LinearOperator;
using la::SparseMatrix;
using la::Vector;

namespace {

SparseMatrix laplace_1d(int n)
{
    std::vector<la::Triplet> t;
    for (int i = 0; i < n; ++i) {
        t.push_back({i, i, 2.0});
        if (i > 0)
            t.push_back({i, i - 1, -1.0});
        if (i + 1 < n)
            t.push_back({i, i + 1, -1.0});
    }
    return SparseMatrix::from_triplets(n, n, std::move(t));
}

DenseMatrix random_spd(int n, unsigned seed)
{
    std::mt19937 gen(seed);
    std::normal_distribution<double> d;
    DenseMatrix g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            g(i, j) = d(gen);
    return g * g.transpose() + n * DenseMatrix::Identity(n, n);
}

LinearOperator dense_op(const DenseMatrix& a)
{
    return {static_cast<int>(a.rows()), [a](const Vector& x, Vector& y) { y = a * x; }};
}

} // namespace

TEST_CASE("DirectFactor")
{
    DenseMatrix a(2, 2);
    a << 4, 1, 1, 3;
    const la::DirectFactor f(SparseMatrix::from_dense(a));
    const Vector b = Vector::Ones(2);
    CHECK((a * f.solve(b) - b).norm() < 1e-14);
    CHECK((f.as_operator() * b - f.solve(b)).norm() == 0.0);

    const auto k = laplace_1d(100);
    const Vector x = la::DirectFactor(k).solve(Vector::Ones(100));
    CHECK((k * x - Vector::Ones(100)).norm() < 1e-10);

    DenseMatrix indef(2, 2);
    indef << 1, 0, 0, -1;
    CHECK_THROWS_AS(la::DirectFactor(SparseMatrix::from_dense(indef)), NotSpdError);
    DenseMatrix singular = DenseMatrix::Zero(2, 2);
    singular(0, 0) = 1.0;
    CHECK_THROWS_AS(la::DirectFactor(SparseMatrix::from_dense(singular)), NotSpdError);
}

TEST_CASE("pcg agrees with textbook CG")
{
    const int n = 63; // 2^6 spans, both ends eliminated
    const auto k = laplace_1d(n);
    Vector b(n);
    for (int i = 0; i < n; ++i)
        b[i] = std::sin(0.3 * i) + 1.0;
    int its = 0;
    const Vector xo = oracle::textbook_cg(k.to_dense(), b, 1e-10, 500, &its);
    const auto res = la::pcg(LinearOperator::from_matrix(k), LinearOperator::identity(n), b, 1e-10, 500);
    CHECK(res.report.converged());
    CHECK(std::abs(res.report.iterations - its) <= 1);
    CHECK((res.x - xo).norm() < 1e-8 * xo.norm());
    CHECK((k * res.x - b).norm() <= 1e-10 * b.norm());

    // Jacobi-preconditioned on a random SPD matrix
    const DenseMatrix a = random_spd(40, 3);
    const Vector d = a.diagonal().cwiseInverse();
    const LinearOperator jac(40, [d](const Vector& x, Vector& y) { y = d.cwiseProduct(x); });
    const auto r2 = la::pcg(dense_op(a), jac, Vector::Ones(40), 1e-12, 200);
    CHECK(r2.report.converged());
    CHECK((a * r2.x - Vector::Ones(40)).norm() < 1e-11 * std::sqrt(40.0));

    CHECK(la::pcg(dense_op(a), jac, Vector::Zero(40), 1e-12, 200).x.norm() == 0.0);
    const auto capped = la::pcg(LinearOperator::from_matrix(k), LinearOperator::identity(n), b, 1e-14, 3);
    CHECK(capped.report.status == la::SolveStatus::MaxIterations);
    CHECK(capped.report.iterations == 3);
}

TEST_CASE("semidefinite CG")
{
    DenseMatrix a = DenseMatrix::Zero(3, 3);
    a(1, 1) = 1.0;
    a(2, 2) = 2.0;
    DenseMatrix kernel = DenseMatrix::Zero(3, 1);
    kernel(0, 0) = 1.0;
    Vector b(3);
    b << 0, 1, 2;
    const auto res = la::semidefinite_pcg(dense_op(a), LinearOperator::identity(3), b, 1e-12, 10, &kernel);
    CHECK(res.report.converged());
    CHECK((res.x - Vector(Eigen::Vector3d(0, 1, 1))).norm() < 1e-12);
    Vector bad(3);
    bad << 1, 1, 1;
    CHECK_THROWS_AS(la::semidefinite_pcg(dense_op(a), LinearOperator::identity(3), bad, 1e-12, 10, &kernel),
                    InconsistentRhsError);

    // floating 1D Neumann Laplacian: kernel = constants, rhs constructed as A x*
    const int n = 30;
    DenseMatrix k = laplace_1d(n).to_dense();
    k(0, 0) = 1.0;
    k(n - 1, n - 1) = 1.0;
    Vector xs(n);
    for (int i = 0; i < n; ++i)
        xs[i] = std::cos(0.2 * i);
    xs.array() -= xs.mean();
    const Vector rhs = k * xs;
    const DenseMatrix ones = DenseMatrix::Constant(n, 1, 1.0 / std::sqrt(n));
    const auto r = la::semidefinite_pcg(dense_op(k), LinearOperator::identity(n), rhs, 1e-12, 200, &ones);
    CHECK(r.report.converged());
    CHECK((k * r.x - rhs).norm() <= 1e-10 * rhs.norm());
    // CG from zero stays in range(A) = ker(A)^perp
    CHECK(std::abs(r.x.sum()) < 1e-10);
    CHECK((r.x - xs).norm() < 1e-8);
}

TEST_CASE("spectrum estimates and order calibration")
{
    DenseMatrix a = DenseMatrix::Zero(2, 2);
    a(0, 0) = 1.0;
    a(1, 1) = 2.0;
    const double above = la::calibrate_spd_order(dense_op(a), LinearOperator::identity(2),
                                                 la::OrderDirection::Above, 0.01);
    CHECK(above == doctest::Approx(2.02).epsilon(1e-10));
    const double below = la::calibrate_spd_order(dense_op(a), LinearOperator::identity(2),
                                                 la::OrderDirection::Below, 0.05);
    CHECK(below == doctest::Approx(0.95).epsilon(1e-10));

    const int n = 40;
    const DenseMatrix s = random_spd(n, 9);
    const Eigen::SelfAdjointEigenSolver<DenseMatrix> es(s);
    const auto est = la::estimate_spectrum(dense_op(s), LinearOperator::identity(n), n, 4);
    CHECK(est.lambda_max == doctest::Approx(es.eigenvalues()(n - 1)).epsilon(1e-6));
    // Ritz values lie inside the spectrum; the small end converges more slowly
    CHECK(est.lambda_min >= es.eigenvalues()(0) * (1 - 1e-12));
    CHECK(est.lambda_min == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-2));
    CHECK(est.lambda_max <= es.eigenvalues()(n - 1) * (1 + 1e-12));

    // Rayleigh probes: s_above * D > S and s_below * D < S for Jacobi D
    const Vector d = s.diagonal();
    const Vector dinv = d.cwiseInverse();
    const LinearOperator jac(n, [dinv](const Vector& x, Vector& y) { y = dinv.cwiseProduct(x); });
    const double sa = la::calibrate_spd_order(dense_op(s), jac, la::OrderDirection::Above, 0.01, n);
    const double sb = la::calibrate_spd_order(dense_op(s), jac, la::OrderDirection::Below, 0.05, n);
    std::mt19937 gen(11);
    std::normal_distribution<double> g;
    for (int probe = 0; probe < 100; ++probe) {
        Vector x(n);
        for (int i = 0; i < n; ++i)
            x[i] = g(gen);
        const double xsx = x.dot(s * x);
        const double xdx = x.dot(d.cwiseProduct(x));
        CHECK(xsx < sa * xdx);
        CHECK(xsx > sb * xdx);
    }
    CHECK_THROWS_AS(la::calibrate_spd_order(dense_op(a), LinearOperator::identity(2), la::OrderDirection::Above, -0.1), ValidationError);
}
