#include "ieti/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "ieti/error.hpp"

namespace ieti::geometry {

AffineBoxMap::AffineBoxMap(double x0, double x1, double y0, double y1)
    : x0_(x0), x1_(x1), y0_(y0), y1_(y1)
{
}

Point AffineBoxMap::eval(double xi, double eta) const
{
    return {x0_ + xi * (x1_ - x0_), y0_ + eta * (y1_ - y0_)};
}

Jacobian AffineBoxMap::jacobian(double, double) const
{
    Jacobian j;
    j << x1_ - x0_, 0.0, 0.0, y1_ - y0_;
    return j;
}

PolarBoxMap::PolarBoxMap(double r0, double r1, double theta0, double theta1)
    : r0_(r0), r1_(r1), t0_(theta0), t1_(theta1)
{
}

Point PolarBoxMap::eval(double xi, double eta) const
{
    const double r = r0_ + xi * (r1_ - r0_);
    const double t = t0_ + eta * (t1_ - t0_);
    return {r * std::cos(t), r * std::sin(t)};
}

Jacobian PolarBoxMap::jacobian(double xi, double eta) const
{
    const double r = r0_ + xi * (r1_ - r0_);
    const double t = t0_ + eta * (t1_ - t0_);
    const double dr = r1_ - r0_;
    const double dt = t1_ - t0_;
    Jacobian j;
    j << std::cos(t) * dr, -r * std::sin(t) * dt, std::sin(t) * dr, r * std::cos(t) * dt;
    return j;
}

SplineGeometryMap::SplineGeometryMap(splines::TensorSplineSpace space,
                                     std::vector<Point> control_points)
    : space_(std::move(space)), control_(std::move(control_points))
{
    if (static_cast<int>(control_.size()) != space_.size())
        throw ValidationError("spline geometry: control point count does not match the space");
}

Point SplineGeometryMap::eval(double xi, double eta) const
{
    const auto b1 = splines::eval_basis(space_.knots(0), xi, 0);
    const auto b2 = splines::eval_basis(space_.knots(1), eta, 0);
    Point x = Point::Zero();
    for (int j = 0; j < b2.values.cols(); ++j)
        for (int i = 0; i < b1.values.cols(); ++i)
            x += b1.values(0, i) * b2.values(0, j) *
                 control_[space_.flat_index(b1.first_active + i, b2.first_active + j)];
    return x;
}

Jacobian SplineGeometryMap::jacobian(double xi, double eta) const
{
    const auto b1 = splines::eval_basis(space_.knots(0), xi, 1);
    const auto b2 = splines::eval_basis(space_.knots(1), eta, 1);
    Jacobian jac = Jacobian::Zero();
    for (int j = 0; j < b2.values.cols(); ++j) {
        for (int i = 0; i < b1.values.cols(); ++i) {
            const Point& p = control_[space_.flat_index(b1.first_active + i, b2.first_active + j)];
            jac.col(0) += b1.values(1, i) * b2.values(0, j) * p;
            jac.col(1) += b1.values(0, i) * b2.values(1, j) * p;
        }
    }
    return jac;
}

std::vector<int> side_dofs(const splines::TensorSplineSpace& space, Side side)
{
    const int m1 = space.size(0);
    const int m2 = space.size(1);
    std::vector<int> dofs;
    switch (side) {
    case Side::West:
    case Side::East: {
        const int i1 = side == Side::West ? 0 : m1 - 1;
        for (int i2 = 0; i2 < m2; ++i2)
            dofs.push_back(space.flat_index(i1, i2));
        break;
    }
    case Side::South:
    case Side::North: {
        const int i2 = side == Side::South ? 0 : m2 - 1;
        for (int i1 = 0; i1 < m1; ++i1)
            dofs.push_back(space.flat_index(i1, i2));
        break;
    }
    }
    return dofs;
}

const splines::KnotVector& side_knots(const splines::TensorSplineSpace& space, Side side)
{
    return (side == Side::West || side == Side::East) ? space.knots(1) : space.knots(0);
}

int corner_dof(const splines::TensorSplineSpace& space, Corner corner)
{
    const int i1 = (corner == Corner::SE || corner == Corner::NE) ? space.size(0) - 1 : 0;
    const int i2 = (corner == Corner::NW || corner == Corner::NE) ? space.size(1) - 1 : 0;
    return space.flat_index(i1, i2);
}

std::array<Side, 2> corner_sides(Corner corner)
{
    switch (corner) {
    case Corner::SW:
        return {Side::South, Side::West};
    case Corner::SE:
        return {Side::South, Side::East};
    case Corner::NW:
        return {Side::North, Side::West};
    case Corner::NE:
        return {Side::North, Side::East};
    }
    return {Side::South, Side::West};
}

std::array<Corner, 2> side_corners(Side side)
{
    switch (side) {
    case Side::West:
        return {Corner::SW, Corner::NW};
    case Side::East:
        return {Corner::SE, Corner::NE};
    case Side::South:
        return {Corner::SW, Corner::SE};
    case Side::North:
        return {Corner::NW, Corner::NE};
    }
    return {Corner::SW, Corner::NW};
}

std::pair<double, double> side_point(Side side, double t)
{
    switch (side) {
    case Side::West:
        return {0.0, t};
    case Side::East:
        return {1.0, t};
    case Side::South:
        return {t, 0.0};
    case Side::North:
        return {t, 1.0};
    }
    return {0.0, t};
}

MultiPatch::MultiPatch(std::vector<Patch> patches, std::vector<Interface> interfaces,
                       std::vector<Vertex> vertices,
                       std::vector<std::pair<int, Side>> dirichlet_sides)
    : patches_(std::move(patches)), interfaces_(std::move(interfaces)),
      vertices_(std::move(vertices)), dirichlet_(std::move(dirichlet_sides))
{
    const int n = num_patches();
    std::vector<std::array<int, 4>> use(static_cast<std::size_t>(n), {0, 0, 0, 0});
    auto mark = [&](int k, Side s) {
        if (k < 0 || k >= n)
            throw ValidationError("multipatch: patch index out of range");
        ++use[k][static_cast<int>(s)];
    };
    for (const auto& i : interfaces_) {
        mark(i.patch_a, i.side_a);
        mark(i.patch_b, i.side_b);
        if (i.patch_a == i.patch_b)
            throw ValidationError("multipatch: self-interfaces are not supported");
    }
    for (const auto& [k, s] : dirichlet_)
        mark(k, s);
    for (int k = 0; k < n; ++k)
        for (int s = 0; s < 4; ++s)
            if (use[k][s] != 1)
                throw ValidationError("multipatch: side " + std::to_string(s) + " of patch " +
                                      std::to_string(k) +
                                      " must be exactly one of interface or Dirichlet boundary");
}

bool MultiPatch::is_dirichlet(int patch, Side side) const
{
    return std::find(dirichlet_.begin(), dirichlet_.end(), std::pair{patch, side}) != dirichlet_.end();
}

std::optional<int> MultiPatch::interface_of(int patch, Side side) const
{
    for (std::size_t i = 0; i < interfaces_.size(); ++i) {
        const auto& f = interfaces_[i];
        if ((f.patch_a == patch && f.side_a == side) || (f.patch_b == patch && f.side_b == side))
            return static_cast<int>(i);
    }
    return std::nullopt;
}

bool MultiPatch::is_floating(int patch) const
{
    for (const auto& [k, s] : dirichlet_)
        if (k == patch)
            return false;
    return true;
}

std::size_t MultiPatch::total_dofs() const
{
    std::size_t n = 0;
    for (const auto& p : patches_)
        n += static_cast<std::size_t>(p.space.size());
    return n;
}

namespace {

// Shared structured-grid topology: patch (i, j) with i along xi-neighbors
// (East/West) and j along eta-neighbors (North/South).
struct GridTopology {
    std::vector<Interface> interfaces;
    std::vector<Vertex> vertices;
    std::vector<std::pair<int, Side>> dirichlet;
};

GridTopology grid_topology(int n_xi, int n_eta, auto&& index)
{
    GridTopology t;
    for (int j = 0; j < n_eta; ++j) {
        for (int i = 0; i < n_xi; ++i) {
            const int k = index(i, j);
            if (i + 1 < n_xi)
                t.interfaces.push_back({k, Side::East, index(i + 1, j), Side::West, false});
            if (j + 1 < n_eta)
                t.interfaces.push_back({k, Side::North, index(i, j + 1), Side::South, false});
            if (i == 0)
                t.dirichlet.emplace_back(k, Side::West);
            if (i == n_xi - 1)
                t.dirichlet.emplace_back(k, Side::East);
            if (j == 0)
                t.dirichlet.emplace_back(k, Side::South);
            if (j == n_eta - 1)
                t.dirichlet.emplace_back(k, Side::North);
        }
    }
    for (int b = 0; b <= n_eta; ++b) {
        for (int a = 0; a <= n_xi; ++a) {
            Vertex v;
            if (a > 0 && b > 0)
                v.corners.emplace_back(index(a - 1, b - 1), Corner::NE);
            if (a < n_xi && b > 0)
                v.corners.emplace_back(index(a, b - 1), Corner::NW);
            if (a > 0 && b < n_eta)
                v.corners.emplace_back(index(a - 1, b), Corner::SE);
            if (a < n_xi && b < n_eta)
                v.corners.emplace_back(index(a, b), Corner::SW);
            std::sort(v.corners.begin(), v.corners.end());
            t.vertices.push_back(std::move(v));
        }
    }
    return t;
}

} // namespace

MultiPatch build_quarter_annulus(int n_theta, int n_radial, int degree, int refinements,
                                 double r0, double r1)
{
    if (n_theta < 1 || n_radial < 1 || degree < 1 || refinements < 0)
        throw ValidationError("quarter annulus: invalid parameters");
    const double half_pi = std::numbers::pi / 2.0;
    const auto space = splines::TensorSplineSpace::uniform(degree, 1 << refinements);
    std::vector<Patch> patches;
    for (int i = 0; i < n_theta; ++i) {
        for (int j = 0; j < n_radial; ++j) {
            const double ra = r0 + (r1 - r0) * j / n_radial;
            const double rb = r0 + (r1 - r0) * (j + 1) / n_radial;
            const double ta = half_pi * i / n_theta;
            const double tb = half_pi * (i + 1) / n_theta;
            patches.push_back({std::make_shared<PolarBoxMap>(ra, rb, ta, tb), space});
        }
    }
    // xi runs along the radius (index j), eta along the angle (index i)
    auto topo = grid_topology(n_radial, n_theta, [n_radial](int j, int i) { return j + n_radial * i; });
    return MultiPatch(std::move(patches), std::move(topo.interfaces), std::move(topo.vertices),
                      std::move(topo.dirichlet));
}

MultiPatch build_rectangle_grid(int nx, int ny, int degree, int refinements)
{
    if (nx < 1 || ny < 1 || degree < 1 || refinements < 0)
        throw ValidationError("rectangle grid: invalid parameters");
    const auto space = splines::TensorSplineSpace::uniform(degree, 1 << refinements);
    std::vector<Patch> patches;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            patches.push_back({std::make_shared<AffineBoxMap>(static_cast<double>(i) / nx,
                                                              static_cast<double>(i + 1) / nx,
                                                              static_cast<double>(j) / ny,
                                                              static_cast<double>(j + 1) / ny),
                               space});
    auto topo = grid_topology(nx, ny, [nx](int i, int j) { return i + nx * j; });
    return MultiPatch(std::move(patches), std::move(topo.interfaces), std::move(topo.vertices),
                      std::move(topo.dirichlet));
}

std::vector<std::pair<int, int>> match_interface_dofs(const MultiPatch& mp, int k, int l)
{
    for (const auto& f : mp.interfaces()) {
        const bool forward = f.patch_a == k && f.patch_b == l;
        const bool backward = f.patch_a == l && f.patch_b == k;
        if (!forward && !backward)
            continue;
        const Side sk = forward ? f.side_a : f.side_b;
        const Side sl = forward ? f.side_b : f.side_a;
        const auto& space_k = mp.patch(k).space;
        const auto& space_l = mp.patch(l).space;
        const auto& kv_k = side_knots(space_k, sk);
        const auto& kv_l = side_knots(space_l, sl);
        if (!(kv_k == (f.reversed ? kv_l.reversed() : kv_l)))
            throw ValidationError("match_interface_dofs: non-matching trace spaces");
        auto dk = side_dofs(space_k, sk);
        auto dl = side_dofs(space_l, sl);
        if (f.reversed)
            std::reverse(dl.begin(), dl.end());
        std::vector<std::pair<int, int>> pairs;
        for (std::size_t i = 0; i < dk.size(); ++i)
            pairs.emplace_back(dk[i], dl[i]);
        return pairs;
    }
    throw ValidationError("match_interface_dofs: patches " + std::to_string(k) + " and " +
                          std::to_string(l) + " share no interface");
}

} // namespace ieti::geometry
