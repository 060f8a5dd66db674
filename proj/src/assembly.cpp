#include "ieti/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ieti/error.hpp"

namespace ieti::assembly {

QuadratureRule gauss_legendre(int n)
{
    // Golub-Welsch on [-1,1], then mapped to [0,1]
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double b = i / std::sqrt(4.0 * i * i - 1.0);
        jac(i, i - 1) = b;
        jac(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    QuadratureRule q;
    for (int i = 0; i < n; ++i) {
        const double v0 = es.eigenvectors()(0, i);
        q.nodes.push_back(0.5 * (es.eigenvalues()[i] + 1.0));
        q.weights.push_back(v0 * v0);
    }
    return q;
}

namespace {

// Tabulated 1D basis values/derivatives at all quadrature points of all spans.
struct Tabulated1d {
    std::vector<double> points;
    std::vector<double> weights;
    std::vector<int> first;
    std::vector<Eigen::MatrixXd> table; // 2 x (p+1)
};

Tabulated1d tabulate(const splines::KnotVector& kv, int npts)
{
    const auto rule = gauss_legendre(npts);
    const auto bp = kv.breakpoints();
    Tabulated1d t;
    for (std::size_t s = 0; s + 1 < bp.size(); ++s) {
        const double a = bp[s];
        const double h = bp[s + 1] - bp[s];
        for (int q = 0; q < npts; ++q) {
            const double x = a + h * rule.nodes[q];
            auto b = splines::eval_basis(kv, x, 1);
            t.points.push_back(x);
            t.weights.push_back(h * rule.weights[q]);
            t.first.push_back(b.first_active);
            t.table.push_back(std::move(b.values));
        }
    }
    return t;
}

// Iterates all tensor quadrature points: fn(q1, q2).
template <typename Fn>
void for_each_point(const Tabulated1d& t1, const Tabulated1d& t2, Fn&& fn)
{
    for (std::size_t q2 = 0; q2 < t2.points.size(); ++q2)
        for (std::size_t q1 = 0; q1 < t1.points.size(); ++q1)
            fn(q1, q2);
}

} // namespace

la::SparseMatrix assemble_stiffness(const splines::TensorSplineSpace& space,
                                    const geometry::GeometryMap& geo)
{
    const int p1 = space.knots(0).degree();
    const int p2 = space.knots(1).degree();
    const auto t1 = tabulate(space.knots(0), p1 + 1);
    const auto t2 = tabulate(space.knots(1), p2 + 1);
    const int nloc = (p1 + 1) * (p2 + 1);
    std::vector<la::Triplet> trip;
    trip.reserve(t1.points.size() * t2.points.size() * static_cast<std::size_t>(nloc * nloc) /
                 static_cast<std::size_t>((p1 + 1) * (p2 + 1)) + 16);
    Eigen::MatrixXd grads(2, nloc);
    std::vector<int> ids(static_cast<std::size_t>(nloc));
    Eigen::MatrixXd local(nloc, nloc);
    for_each_point(t1, t2, [&](std::size_t q1, std::size_t q2) {
        const double xi = t1.points[q1];
        const double eta = t2.points[q2];
        const geometry::Jacobian jac = geo.jacobian(xi, eta);
        const double det = jac.determinant();
        if (!(det > 0.0))
            throw AssemblyError("assemble_stiffness: non-positive Jacobian determinant");
        const Eigen::Matrix2d jinv_t = jac.inverse().transpose();
        const auto& b1 = t1.table[q1];
        const auto& b2 = t2.table[q2];
        for (int j = 0; j <= p2; ++j) {
            for (int i = 0; i <= p1; ++i) {
                const int a = i + (p1 + 1) * j;
                ids[a] = space.flat_index(t1.first[q1] + i, t2.first[q2] + j);
                const Eigen::Vector2d ref(b1(1, i) * b2(0, j), b1(0, i) * b2(1, j));
                grads.col(a) = jinv_t * ref;
            }
        }
        local.noalias() = grads.transpose() * grads;
        local *= det * t1.weights[q1] * t2.weights[q2];
        for (int a = 0; a < nloc; ++a)
            for (int b = 0; b < nloc; ++b)
                trip.push_back({ids[a], ids[b], local(a, b)});
    });
    auto k = la::SparseMatrix::from_triplets(space.size(), space.size(), std::move(trip));
    return k;
}

la::SparseMatrix assemble_mass_1d(const splines::KnotVector& kv)
{
    const int p = kv.degree();
    const auto t = tabulate(kv, p + 1);
    std::vector<la::Triplet> trip;
    for (std::size_t q = 0; q < t.points.size(); ++q)
        for (int a = 0; a <= p; ++a)
            for (int b = 0; b <= p; ++b)
                trip.push_back({t.first[q] + a, t.first[q] + b,
                                t.weights[q] * t.table[q](0, a) * t.table[q](0, b)});
    return la::SparseMatrix::from_triplets(kv.size(), kv.size(), std::move(trip));
}

la::SparseMatrix assemble_parameter_mass(const splines::TensorSplineSpace& space)
{
    return la::kron(assemble_mass_1d(space.knots(1)), assemble_mass_1d(space.knots(0)));
}

la::Vector assemble_load(const splines::TensorSplineSpace& space, const geometry::GeometryMap& geo,
                         const ScalarField& f)
{
    const int p1 = space.knots(0).degree();
    const int p2 = space.knots(1).degree();
    const auto t1 = tabulate(space.knots(0), p1 + 1);
    const auto t2 = tabulate(space.knots(1), p2 + 1);
    la::Vector load = la::Vector::Zero(space.size());
    for_each_point(t1, t2, [&](std::size_t q1, std::size_t q2) {
        const double xi = t1.points[q1];
        const double eta = t2.points[q2];
        const double det = geo.jacobian(xi, eta).determinant();
        const double w = f(geo.eval(xi, eta)) * det * t1.weights[q1] * t2.weights[q2];
        if (w == 0.0)
            return;
        const auto& b1 = t1.table[q1];
        const auto& b2 = t2.table[q2];
        for (int j = 0; j <= p2; ++j)
            for (int i = 0; i <= p1; ++i)
                load[space.flat_index(t1.first[q1] + i, t2.first[q2] + j)] += w * b1(0, i) * b2(0, j);
    });
    return load;
}

PatchSystem eliminate_dirichlet(const la::SparseMatrix& k, const la::Vector& f,
                                std::span<const int> eliminated)
{
    const int n = k.rows();
    PatchSystem sys;
    sys.full_to_active.assign(static_cast<std::size_t>(n), 0);
    for (int d : eliminated)
        sys.full_to_active.at(static_cast<std::size_t>(d)) = -1;
    for (int i = 0; i < n; ++i) {
        if (sys.full_to_active[i] == 0) {
            sys.full_to_active[i] = static_cast<int>(sys.active.size());
            sys.active.push_back(i);
        }
    }
    sys.stiffness = k.submatrix(sys.active, sys.active);
    sys.load.resize(static_cast<Eigen::Index>(sys.active.size()));
    for (std::size_t a = 0; a < sys.active.size(); ++a)
        sys.load[static_cast<Eigen::Index>(a)] = f[sys.active[a]];
    return sys;
}

std::vector<int> dofs_on_sides(const splines::TensorSplineSpace& space,
                               std::span<const geometry::Side> sides)
{
    std::vector<int> dofs;
    for (auto s : sides) {
        auto d = geometry::side_dofs(space, s);
        dofs.insert(dofs.end(), d.begin(), d.end());
    }
    std::sort(dofs.begin(), dofs.end());
    dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
    return dofs;
}

double l2_error_squared(const splines::TensorSplineSpace& space, const geometry::GeometryMap& geo,
                        std::span<const double> coefs, const ScalarField& exact)
{
    const int p1 = space.knots(0).degree();
    const int p2 = space.knots(1).degree();
    const auto t1 = tabulate(space.knots(0), p1 + 3);
    const auto t2 = tabulate(space.knots(1), p2 + 3);
    double err = 0.0;
    for_each_point(t1, t2, [&](std::size_t q1, std::size_t q2) {
        const double xi = t1.points[q1];
        const double eta = t2.points[q2];
        const auto& b1 = t1.table[q1];
        const auto& b2 = t2.table[q2];
        double uh = 0.0;
        for (int j = 0; j <= p2; ++j)
            for (int i = 0; i <= p1; ++i)
                uh += coefs[space.flat_index(t1.first[q1] + i, t2.first[q2] + j)] * b1(0, i) * b2(0, j);
        const double det = geo.jacobian(xi, eta).determinant();
        const double e = uh - exact(geo.eval(xi, eta));
        err += e * e * det * t1.weights[q1] * t2.weights[q2];
    });
    return err;
}

double ManufacturedSolution::u(const geometry::Point& x) const
{
    const double r2 = x.squaredNorm();
    const double theta = std::atan2(x.y(), x.x());
    return (r2 - r0 * r0) * (r1 * r1 - r2) * std::sin(2.0 * theta);
}

double ManufacturedSolution::f(const geometry::Point& x) const
{
    // u = g(r) sin(2 theta) with g = (r^2 - a)(b - r^2):
    // -Laplace(u) = -(g'' + g'/r - 4 g / r^2) sin(2 theta) = (12 r^2 - 4ab / r^2) sin(2 theta)
    const double r2 = x.squaredNorm();
    const double theta = std::atan2(x.y(), x.x());
    const double a = r0 * r0;
    const double b = r1 * r1;
    return (12.0 * r2 - 4.0 * a * b / r2) * std::sin(2.0 * theta);
}

} // namespace ieti::assembly
