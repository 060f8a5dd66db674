#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "ieti/kernels.hpp"
#include "ieti/sparse.hpp"

using namespace ieti;
using la::SparseMatrix;
using la::Vector;

namespace {

SparseMatrix random_sparse(int rows, int cols, double density, unsigned seed)
{
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<la::Triplet> t;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            if (coin(gen) < density)
                t.push_back({i, j, u(gen)});
    return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

} // namespace

TEST_CASE("triplets are merged and sorted")
{
    auto a = SparseMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 2, 3.0}, {1, 0, -1.0}});
    CHECK(a.nnz() == 3);
    CHECK(a.coeff(1, 2) == 4.0);
    CHECK(a.coeff(0, 1) == 2.0);
    CHECK(a.coeff(0, 0) == 0.0);
    const auto ci = a.col_idx();
    CHECK(ci[1] == 0);
    CHECK(ci[2] == 2);
}

TEST_CASE("products agree with dense")
{
    const auto a = random_sparse(13, 9, 0.3, 1);
    const auto b = random_sparse(9, 7, 0.3, 2);
    const Vector x = Vector::LinSpaced(9, -1.0, 2.0);
    CHECK((a * x - a.to_dense() * x).norm() < 1e-14);
    Vector y;
    a.multiply_transpose(Vector::Ones(13), y);
    CHECK((y - a.to_dense().transpose() * Vector::Ones(13)).norm() < 1e-14);
    CHECK(((a * b).to_dense() - a.to_dense() * b.to_dense()).norm() < 1e-14);
    CHECK((a.transpose().to_dense() - a.to_dense().transpose()).norm() == 0.0);
    const la::DenseMatrix d = la::DenseMatrix::Random(9, 3);
    CHECK((a * d - a.to_dense() * d).norm() < 1e-14);
    CHECK((a.add(a, -1.0).to_dense()).norm() == 0.0);
}

TEST_CASE("kron and galerkin product")
{
    const auto a = SparseMatrix::from_dense((la::DenseMatrix(3, 2) << 1, 0, 0.5, 0.5, 0, 1).finished());
    const auto k = la::kron(a, a);
    CHECK(k.rows() == 9);
    CHECK(k.cols() == 4);
    // entry ((ia*rb + ib), (ja*cb + jb)) = a(ia,ja) a(ib,jb)
    CHECK(k.coeff(1 * 3 + 1, 0) == doctest::Approx(0.25));
    CHECK(k.coeff(2 * 3 + 0, 1 * 2 + 0) == doctest::Approx(1.0));
    const auto m = random_sparse(9, 9, 0.4, 3);
    const auto g = la::galerkin_product(k, m);
    const la::DenseMatrix kd = k.to_dense();
    CHECK((g.to_dense() - kd.transpose() * m.to_dense() * kd).norm() < 1e-13);
}

TEST_CASE("submatrix and diagonal")
{
    const auto a = random_sparse(8, 8, 0.5, 4);
    const std::vector<int> rows{5, 1, 7};
    const std::vector<int> cols{0, 3};
    const auto s = a.submatrix(rows, cols);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(s.coeff(i, j) == a.coeff(rows[i], cols[j]));
    CHECK((a.diagonal() - a.to_dense().diagonal()).norm() == 0.0);
}

TEST_CASE("matrix market round trip")
{
    const auto r = random_sparse(6, 6, 0.5, 5);
    const auto a = r.add(r.transpose());
    std::stringstream ss;
    la::write_matrix_market(ss, a, true);
    CHECK(ss.str().find("symmetric") != std::string::npos);
    const auto b = la::read_matrix_market(ss);
    CHECK((a.to_dense() - b.to_dense()).norm() < 1e-15);
    CHECK(b.symmetry_defect() == 0.0);

    std::stringstream gs;
    la::write_matrix_market(gs, r, false);
    CHECK((la::read_matrix_market(gs).to_dense() - r.to_dense()).norm() < 1e-15);
}

TEST_CASE("parallel kernels are bit-identical to the serial references")
{
    const auto a = random_sparse(5000, 5000, 0.002, 6);
    std::mt19937 gen(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x(5000), b(5000);
    for (auto& v : x)
        v = u(gen);
    for (auto& v : b)
        v = u(gen);
    for (int threads : {1, 2, 4}) {
        kernels::set_threads(threads);
        std::vector<double> y1(5000), y2(5000);
        kernels::spmv(a.view(), x, y1);
        kernels::spmv_serial(a.view(), x, y2);
        CHECK(y1 == y2);
        kernels::spmv_add(a.view(), 0.5, x, y1);
        kernels::spmv_add_serial(a.view(), 0.5, x, y2);
        CHECK(y1 == y2);
        kernels::residual(a.view(), x, b, y1);
        kernels::residual_serial(a.view(), x, b, y2);
        CHECK(y1 == y2);
    }
    kernels::set_threads(1);
    CHECK(kernels::max_threads() >= 1);
}
