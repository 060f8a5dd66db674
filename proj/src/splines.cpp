#include "ieti/splines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ieti/error.hpp"

namespace ieti::splines {

KnotVector::KnotVector(int degree, std::vector<double> knots)
    : degree_(degree), knots_(std::move(knots))
{
    if (degree_ < 1)
        throw ValidationError("knot vector: degree must be >= 1");
    const int p = degree_;
    const int n = static_cast<int>(knots_.size());
    if (n < 2 * (p + 1))
        throw ValidationError("knot vector: need at least 2(p+1) knots");
    if (!std::is_sorted(knots_.begin(), knots_.end()))
        throw ValidationError("knot vector: knots not sorted");
    for (int i = 0; i <= p; ++i) {
        if (knots_[i] != 0.0 || knots_[n - 1 - i] != 1.0)
            throw ValidationError("knot vector: not open on [0,1]");
    }
    if (knots_[p + 1] == 0.0 || knots_[n - p - 2] == 1.0)
        throw ValidationError("knot vector: end knot multiplicity exceeds p+1");
    for (int i = p + 1; i < n - p - 1; ++i) {
        if (knots_[i] == knots_[i - 1] && i > p + 1)
            throw ValidationError("knot vector: interior knot multiplicity must be 1");
    }
}

KnotVector KnotVector::uniform(int degree, int spans)
{
    if (spans < 1)
        throw ValidationError("knot vector: need at least one span");
    std::vector<double> k(static_cast<std::size_t>(degree + 1), 0.0);
    for (int i = 1; i < spans; ++i)
        k.push_back(static_cast<double>(i) / spans);
    k.insert(k.end(), static_cast<std::size_t>(degree + 1), 1.0);
    return KnotVector(degree, std::move(k));
}

int KnotVector::num_spans() const
{
    return static_cast<int>(breakpoints().size()) - 1;
}

std::vector<double> KnotVector::breakpoints() const
{
    std::vector<double> b(knots_.begin(), knots_.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

int KnotVector::find_span(double x) const
{
    const int m = size();
    if (x >= knots_[m])
        return m - 1;
    // last index s with knots[s] <= x, restricted to [p, m-1]
    const auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + m + 1, x);
    return static_cast<int>(it - knots_.begin()) - 1;
}

std::vector<double> KnotVector::basis_integrals() const
{
    std::vector<double> w(static_cast<std::size_t>(size()));
    for (int i = 0; i < size(); ++i)
        w[i] = (knots_[i + degree_ + 1] - knots_[i]) / (degree_ + 1);
    return w;
}

KnotVector KnotVector::reversed() const
{
    std::vector<double> k(knots_.rbegin(), knots_.rend());
    for (double& t : k)
        t = 1.0 - t;
    return KnotVector(degree_, std::move(k));
}

BasisTable eval_basis(const KnotVector& kv, double x, int nderiv)
{
    if (!(x >= 0.0 && x <= 1.0))
        throw DomainError("eval_basis: parameter " + std::to_string(x) + " outside [0,1]");
    const int p = kv.degree();
    if (nderiv < 0 || nderiv > p)
        throw DomainError("eval_basis: nderiv must lie in [0, p]");
    const auto u = kv.knots();
    const int span = kv.find_span(x);

    // Triangular table of basis values (upper) and knot differences (lower),
    // then derivatives by the standard recurrence on the table.
    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(static_cast<std::size_t>(p + 1)), right(static_cast<std::size_t>(p + 1));
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - u[span + 1 - j];
        right[j] = u[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }

    BasisTable out;
    out.first_active = span - p;
    out.values = Eigen::MatrixXd::Zero(nderiv + 1, p + 1);
    for (int j = 0; j <= p; ++j)
        out.values(0, j) = ndu(j, p);

    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        for (int k = 1; k <= nderiv; ++k) {
            double d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            out.values(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double factor = p;
    for (int k = 1; k <= nderiv; ++k) {
        out.values.row(k) *= factor;
        factor *= (p - k);
    }
    return out;
}

double partition_of_unity_check(const KnotVector& kv, std::span<const double> samples)
{
    double dev = 0.0;
    for (double x : samples) {
        const auto t = eval_basis(kv, x, 0);
        dev = std::max(dev, std::abs(t.values.row(0).sum() - 1.0));
    }
    return dev;
}

KnotVector dyadic_refine(const KnotVector& kv)
{
    std::vector<double> k(kv.knots().begin(), kv.knots().end());
    const auto bp = kv.breakpoints();
    for (std::size_t i = 0; i + 1 < bp.size(); ++i)
        k.push_back(0.5 * (bp[i] + bp[i + 1]));
    std::sort(k.begin(), k.end());
    return KnotVector(kv.degree(), std::move(k));
}

namespace {

// Boehm insertion of one knot t: returns the (n+1) x n insertion matrix.
Eigen::MatrixXd insert_knot_matrix(std::vector<double>& knots, int p, double t)
{
    const int n = static_cast<int>(knots.size()) - p - 1;
    // k: knots[k] <= t < knots[k+1]
    int k = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin()) - 1;
    k = std::min(k, n - 1);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n);
    for (int i = 0; i <= n; ++i) {
        if (i <= k - p) {
            a(i, i) = 1.0;
        } else if (i <= k) {
            const double alpha = (t - knots[i]) / (knots[i + p] - knots[i]);
            a(i, i) = alpha;
            a(i, i - 1) = 1.0 - alpha;
        } else {
            a(i, i - 1) = 1.0;
        }
    }
    knots.insert(knots.begin() + k + 1, t);
    return a;
}

} // namespace

la::SparseMatrix prolongation_1d(const KnotVector& coarse, const KnotVector& fine)
{
    if (coarse.degree() != fine.degree())
        throw ValidationError("prolongation_1d: degree mismatch");
    const int p = coarse.degree();
    // fine must contain all coarse knots (as a multiset)
    std::vector<double> extra;
    {
        const auto c = coarse.knots();
        const auto f = fine.knots();
        std::size_t ic = 0;
        for (double t : f) {
            if (ic < c.size() && c[ic] == t)
                ++ic;
            else
                extra.push_back(t);
        }
        if (ic != c.size())
            throw ValidationError("prolongation_1d: spaces are not nested");
    }
    std::vector<double> knots(coarse.knots().begin(), coarse.knots().end());
    Eigen::MatrixXd p_total = Eigen::MatrixXd::Identity(coarse.size(), coarse.size());
    for (double t : extra)
        p_total = insert_knot_matrix(knots, p, t) * p_total;
    return la::SparseMatrix::from_dense(p_total, 1e-15);
}

TensorSplineSpace::TensorSplineSpace(KnotVector dir1, KnotVector dir2)
    : dirs_{std::move(dir1), std::move(dir2)}
{
}

TensorSplineSpace TensorSplineSpace::uniform(int degree, int spans)
{
    return {KnotVector::uniform(degree, spans), KnotVector::uniform(degree, spans)};
}

TensorSplineSpace TensorSplineSpace::refined() const
{
    return {dyadic_refine(dirs_[0]), dyadic_refine(dirs_[1])};
}

la::SparseMatrix tensor_prolongation(const TensorSplineSpace& coarse,
                                     const TensorSplineSpace& fine)
{
    const auto p1 = prolongation_1d(coarse.knots(0), fine.knots(0));
    const auto p2 = prolongation_1d(coarse.knots(1), fine.knots(1));
    // direction 1 runs fastest, so it is the inner Kronecker factor
    return la::kron(p2, p1);
}

double evaluate(const TensorSplineSpace& space, std::span<const double> coefs, double xi,
                double eta)
{
    const auto b1 = eval_basis(space.knots(0), xi, 0);
    const auto b2 = eval_basis(space.knots(1), eta, 0);
    double s = 0.0;
    for (int j = 0; j < b2.values.cols(); ++j)
        for (int i = 0; i < b1.values.cols(); ++i)
            s += coefs[space.flat_index(b1.first_active + i, b2.first_active + j)] *
                 b1.values(0, i) * b2.values(0, j);
    return s;
}

} // namespace ieti::splines
