#include "ieti/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ieti/error.hpp"

namespace ieti::la {

SparseMatrix::SparseMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), row_ptr_(static_cast<std::size_t>(rows) + 1, 0)
{
}

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::vector<Triplet> entries)
{
    for (const auto& t : entries) {
        if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
            throw ValidationError("triplet index out of range");
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m(rows, cols);
    m.col_idx_.reserve(entries.size());
    m.values_.reserve(entries.size());
    std::vector<int> counts(static_cast<std::size_t>(rows), 0);
    for (std::size_t k = 0; k < entries.size();) {
        const int r = entries[k].row;
        const int c = entries[k].col;
        double v = 0.0;
        while (k < entries.size() && entries[k].row == r && entries[k].col == c)
            v += entries[k++].value;
        m.col_idx_.push_back(c);
        m.values_.push_back(v);
        ++counts[r];
    }
    for (int i = 0; i < rows; ++i)
        m.row_ptr_[i + 1] = m.row_ptr_[i] + counts[i];
    return m;
}

SparseMatrix SparseMatrix::identity(int n)
{
    SparseMatrix m(n, n);
    m.col_idx_.resize(n);
    m.values_.assign(n, 1.0);
    for (int i = 0; i < n; ++i) {
        m.col_idx_[i] = i;
        m.row_ptr_[i + 1] = i + 1;
    }
    return m;
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& a, double drop_tol)
{
    SparseMatrix m(static_cast<int>(a.rows()), static_cast<int>(a.cols()));
    for (int i = 0; i < m.rows_; ++i) {
        for (int j = 0; j < m.cols_; ++j) {
            if (std::abs(a(i, j)) > drop_tol) {
                m.col_idx_.push_back(j);
                m.values_.push_back(a(i, j));
            }
        }
        m.row_ptr_[i + 1] = static_cast<int>(m.col_idx_.size());
    }
    return m;
}

kernels::CsrView SparseMatrix::view() const
{
    return {rows_, cols_, row_ptr_, col_idx_, values_};
}

double SparseMatrix::coeff(int i, int j) const
{
    const auto first = col_idx_.begin() + row_ptr_[i];
    const auto last = col_idx_.begin() + row_ptr_[i + 1];
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j)
        return 0.0;
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

Vector SparseMatrix::diagonal() const
{
    Vector d = Vector::Zero(std::min(rows_, cols_));
    for (int i = 0; i < d.size(); ++i)
        d[i] = coeff(i, i);
    return d;
}

void SparseMatrix::multiply(const Vector& x, Vector& y) const
{
    y.resize(rows_);
    kernels::spmv(view(), {x.data(), static_cast<std::size_t>(x.size())},
                  {y.data(), static_cast<std::size_t>(y.size())});
}

void SparseMatrix::multiply_serial(const Vector& x, Vector& y) const
{
    y.resize(rows_);
    kernels::spmv_serial(view(), {x.data(), static_cast<std::size_t>(x.size())},
                         {y.data(), static_cast<std::size_t>(y.size())});
}

void SparseMatrix::multiply_transpose(const Vector& x, Vector& y) const
{
    y = Vector::Zero(cols_);
    for (int i = 0; i < rows_; ++i) {
        const double xi = x[i];
        if (xi == 0.0)
            continue;
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            y[col_idx_[k]] += values_[k] * xi;
    }
}

Vector SparseMatrix::operator*(const Vector& x) const
{
    Vector y;
    multiply(x, y);
    return y;
}

DenseMatrix SparseMatrix::operator*(const DenseMatrix& x) const
{
    DenseMatrix y = DenseMatrix::Zero(rows_, x.cols());
    for (int i = 0; i < rows_; ++i)
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            y.row(i) += values_[k] * x.row(col_idx_[k]);
    return y;
}

SparseMatrix SparseMatrix::transpose() const
{
    SparseMatrix t(cols_, rows_);
    std::vector<int> counts(static_cast<std::size_t>(cols_), 0);
    for (int c : col_idx_)
        ++counts[c];
    for (int j = 0; j < cols_; ++j)
        t.row_ptr_[j + 1] = t.row_ptr_[j] + counts[j];
    t.col_idx_.resize(col_idx_.size());
    t.values_.resize(values_.size());
    std::vector<int> next(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
    for (int i = 0; i < rows_; ++i) {
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            const int pos = next[col_idx_[k]]++;
            t.col_idx_[pos] = i;
            t.values_[pos] = values_[k];
        }
    }
    return t;
}

SparseMatrix SparseMatrix::operator*(const SparseMatrix& b) const
{
    if (cols_ != b.rows_)
        throw ValidationError("sparse product: dimension mismatch");
    SparseMatrix c(rows_, b.cols_);
    std::vector<double> acc(static_cast<std::size_t>(b.cols_), 0.0);
    std::vector<int> marker(static_cast<std::size_t>(b.cols_), -1);
    std::vector<int> pattern;
    for (int i = 0; i < rows_; ++i) {
        pattern.clear();
        for (int ka = row_ptr_[i]; ka < row_ptr_[i + 1]; ++ka) {
            const int j = col_idx_[ka];
            const double a = values_[ka];
            for (int kb = b.row_ptr_[j]; kb < b.row_ptr_[j + 1]; ++kb) {
                const int col = b.col_idx_[kb];
                if (marker[col] != i) {
                    marker[col] = i;
                    acc[col] = 0.0;
                    pattern.push_back(col);
                }
                acc[col] += a * b.values_[kb];
            }
        }
        std::sort(pattern.begin(), pattern.end());
        for (int col : pattern) {
            c.col_idx_.push_back(col);
            c.values_.push_back(acc[col]);
        }
        c.row_ptr_[i + 1] = static_cast<int>(c.col_idx_.size());
    }
    return c;
}

SparseMatrix SparseMatrix::add(const SparseMatrix& b, double scale) const
{
    if (rows_ != b.rows_ || cols_ != b.cols_)
        throw ValidationError("sparse add: dimension mismatch");
    SparseMatrix c(rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
        int ka = row_ptr_[i];
        int kb = b.row_ptr_[i];
        const int ea = row_ptr_[i + 1];
        const int eb = b.row_ptr_[i + 1];
        while (ka < ea || kb < eb) {
            const int ca = ka < ea ? col_idx_[ka] : cols_;
            const int cb = kb < eb ? b.col_idx_[kb] : cols_;
            if (ca == cb) {
                c.col_idx_.push_back(ca);
                c.values_.push_back(values_[ka++] + scale * b.values_[kb++]);
            } else if (ca < cb) {
                c.col_idx_.push_back(ca);
                c.values_.push_back(values_[ka++]);
            } else {
                c.col_idx_.push_back(cb);
                c.values_.push_back(scale * b.values_[kb++]);
            }
        }
        c.row_ptr_[i + 1] = static_cast<int>(c.col_idx_.size());
    }
    return c;
}

SparseMatrix SparseMatrix::scaled(double s) const
{
    SparseMatrix c = *this;
    for (double& v : c.values_)
        v *= s;
    return c;
}

SparseMatrix SparseMatrix::submatrix(std::span<const int> row_ids,
                                     std::span<const int> col_ids) const
{
    std::vector<int> col_map(static_cast<std::size_t>(cols_), -1);
    for (std::size_t j = 0; j < col_ids.size(); ++j)
        col_map[col_ids[j]] = static_cast<int>(j);
    SparseMatrix s(static_cast<int>(row_ids.size()), static_cast<int>(col_ids.size()));
    std::vector<std::pair<int, double>> row;
    for (std::size_t r = 0; r < row_ids.size(); ++r) {
        const int i = row_ids[r];
        row.clear();
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            const int j = col_map[col_idx_[k]];
            if (j >= 0)
                row.emplace_back(j, values_[k]);
        }
        std::sort(row.begin(), row.end());
        for (const auto& [j, v] : row) {
            s.col_idx_.push_back(j);
            s.values_.push_back(v);
        }
        s.row_ptr_[r + 1] = static_cast<int>(s.col_idx_.size());
    }
    return s;
}

DenseMatrix SparseMatrix::to_dense() const
{
    DenseMatrix d = DenseMatrix::Zero(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            d(i, col_idx_[k]) += values_[k];
    return d;
}

Eigen::SparseMatrix<double> SparseMatrix::to_eigen() const
{
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(values_.size());
    for (int i = 0; i < rows_; ++i)
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            t.emplace_back(i, col_idx_[k], values_[k]);
    Eigen::SparseMatrix<double> e(rows_, cols_);
    e.setFromTriplets(t.begin(), t.end());
    return e;
}

double SparseMatrix::symmetry_defect() const
{
    if (rows_ != cols_)
        return INFINITY;
    const double scale = max_abs();
    if (scale == 0.0)
        return 0.0;
    double defect = 0.0;
    for (int i = 0; i < rows_; ++i)
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            defect = std::max(defect, std::abs(values_[k] - coeff(col_idx_[k], i)));
    return defect / scale;
}

double SparseMatrix::max_abs() const
{
    double m = 0.0;
    for (double v : values_)
        m = std::max(m, std::abs(v));
    return m;
}

double SparseMatrix::norm_inf() const
{
    double m = 0.0;
    for (int i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            s += std::abs(values_[k]);
        m = std::max(m, s);
    }
    return m;
}

SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b)
{
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(a.nnz()) * static_cast<std::size_t>(b.nnz()));
    const auto arp = a.row_ptr();
    const auto aci = a.col_idx();
    const auto av = a.values();
    const auto brp = b.row_ptr();
    const auto bci = b.col_idx();
    const auto bv = b.values();
    for (int ia = 0; ia < a.rows(); ++ia)
        for (int ka = arp[ia]; ka < arp[ia + 1]; ++ka)
            for (int ib = 0; ib < b.rows(); ++ib)
                for (int kb = brp[ib]; kb < brp[ib + 1]; ++kb)
                    t.push_back({ia * b.rows() + ib, aci[ka] * b.cols() + bci[kb], av[ka] * bv[kb]});
    return SparseMatrix::from_triplets(a.rows() * b.rows(), a.cols() * b.cols(), std::move(t));
}

SparseMatrix galerkin_product(const SparseMatrix& p, const SparseMatrix& a)
{
    return p.transpose() * (a * p);
}

void write_matrix_market(std::ostream& os, const SparseMatrix& a, bool symmetric)
{
    std::vector<Triplet> entries;
    const auto rp = a.row_ptr();
    const auto ci = a.col_idx();
    const auto v = a.values();
    for (int i = 0; i < a.rows(); ++i)
        for (int k = rp[i]; k < rp[i + 1]; ++k)
            if (!symmetric || ci[k] <= i)
                entries.push_back({i, ci[k], v[k]});
    os << "%%MatrixMarket matrix coordinate real " << (symmetric ? "symmetric" : "general") << "\n";
    os << a.rows() << " " << a.cols() << " " << entries.size() << "\n";
    os.precision(17);
    for (const auto& e : entries)
        os << e.row + 1 << " " << e.col + 1 << " " << e.value << "\n";
}

SparseMatrix read_matrix_market(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0)
        throw ValidationError("matrix market: missing header");
    std::istringstream header(line);
    std::string banner, object, format, field, symmetry;
    header >> banner >> object >> format >> field >> symmetry;
    if (object != "matrix" || format != "coordinate" || field != "real")
        throw ValidationError("matrix market: only real coordinate matrices are supported");
    const bool symmetric = symmetry == "symmetric";
    if (!symmetric && symmetry != "general")
        throw ValidationError("matrix market: unsupported symmetry '" + symmetry + "'");
    while (std::getline(is, line) && (line.empty() || line[0] == '%')) {
    }
    std::istringstream dims(line);
    int rows = 0, cols = 0;
    long nnz = 0;
    if (!(dims >> rows >> cols >> nnz))
        throw ValidationError("matrix market: bad size line");
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
    for (long k = 0; k < nnz; ++k) {
        int i = 0, j = 0;
        double v = 0.0;
        if (!(is >> i >> j >> v))
            throw ValidationError("matrix market: truncated entry list");
        t.push_back({i - 1, j - 1, v});
        if (symmetric && i != j)
            t.push_back({j - 1, i - 1, v});
    }
    return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

} // namespace ieti::la
