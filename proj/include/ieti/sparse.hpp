#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <span>
#include <vector>

#include "ieti/kernels.hpp"

namespace ieti::la {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

struct Triplet {
    int row;
    int col;
    double value;
};

/// Compressed-row sparse matrix. Column indices are sorted within each row
/// and duplicates are merged on construction.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(int rows, int cols);

    /// Duplicate (row, col) entries are summed.
    static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> entries);
    static SparseMatrix identity(int n);
    /// Entries with |a_ij| <= drop_tol are skipped.
    static SparseMatrix from_dense(const DenseMatrix& a, double drop_tol = 0.0);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int nnz() const { return static_cast<int>(values_.size()); }

    std::span<const int> row_ptr() const { return row_ptr_; }
    std::span<const int> col_idx() const { return col_idx_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    kernels::CsrView view() const;

    /// Entry lookup by binary search; zero if not stored.
    double coeff(int i, int j) const;
    Vector diagonal() const;

    /// y = A x, OpenMP over rows.
    void multiply(const Vector& x, Vector& y) const;
    void multiply_serial(const Vector& x, Vector& y) const;
    /// y = A^T x
    void multiply_transpose(const Vector& x, Vector& y) const;
    Vector operator*(const Vector& x) const;
    DenseMatrix operator*(const DenseMatrix& x) const;

    SparseMatrix transpose() const;
    SparseMatrix operator*(const SparseMatrix& b) const;
    /// this + scale * b (patterns merged).
    SparseMatrix add(const SparseMatrix& b, double scale = 1.0) const;
    SparseMatrix scaled(double s) const;

    /// Rows and columns selected by index lists (in the given order).
    SparseMatrix submatrix(std::span<const int> row_ids, std::span<const int> col_ids) const;

    DenseMatrix to_dense() const;
    Eigen::SparseMatrix<double> to_eigen() const;

    /// Max |a_ij - a_ji| relative to max |a_ij|.
    double symmetry_defect() const;
    double max_abs() const;
    /// Max absolute row sum.
    double norm_inf() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<int> row_ptr_{0};
    std::vector<int> col_idx_;
    std::vector<double> values_;
};

/// Kronecker product a ⊗ b: entry ((i_a*rows_b + i_b), (j_a*cols_b + j_b)).
SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b);

/// P^T A P
SparseMatrix galerkin_product(const SparseMatrix& p, const SparseMatrix& a);

/// Matrix Market coordinate format. With `symmetric`, only the lower triangle
/// is written and the header says "symmetric".
void write_matrix_market(std::ostream& os, const SparseMatrix& a, bool symmetric);
SparseMatrix read_matrix_market(std::istream& is);

} // namespace ieti::la
