#pragma once

#include <array>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ieti/splines.hpp"

namespace ieti::geometry {

using Point = Eigen::Vector2d;
using Jacobian = Eigen::Matrix2d;

/// Map G: [0,1]^2 -> R^2 with Jacobian J(xi) = dG/dxi (columns: d/dxi1, d/dxi2).
class GeometryMap {
public:
    virtual ~GeometryMap() = default;
    virtual Point eval(double xi, double eta) const = 0;
    virtual Jacobian jacobian(double xi, double eta) const = 0;
};

/// Axis-parallel box [x0,x1] x [y0,y1].
class AffineBoxMap final : public GeometryMap {
public:
    AffineBoxMap(double x0, double x1, double y0, double y1);
    Point eval(double xi, double eta) const override;
    Jacobian jacobian(double xi, double eta) const override;

private:
    double x0_, x1_, y0_, y1_;
};

/// Polar box: xi -> radius in [r0,r1], eta -> angle in [t0,t1].
class PolarBoxMap final : public GeometryMap {
public:
    PolarBoxMap(double r0, double r1, double theta0, double theta1);
    Point eval(double xi, double eta) const override;
    Jacobian jacobian(double xi, double eta) const override;

private:
    double r0_, r1_, t0_, t1_;
};

/// Tensor B-spline map G(xi) = sum_i P_i N_i(xi).
class SplineGeometryMap final : public GeometryMap {
public:
    SplineGeometryMap(splines::TensorSplineSpace space, std::vector<Point> control_points);
    Point eval(double xi, double eta) const override;
    Jacobian jacobian(double xi, double eta) const override;

private:
    splines::TensorSplineSpace space_;
    std::vector<Point> control_;
};

/// Patch sides: West xi=0, East xi=1, South eta=0, North eta=1.
enum class Side { West = 0, East = 1, South = 2, North = 3 };
/// Patch corners, named by (xi, eta) = (0|1, 0|1).
enum class Corner { SW = 0, SE = 1, NW = 2, NE = 3 };

/// Flat dofs along a side, ordered by increasing parameter along the side.
std::vector<int> side_dofs(const splines::TensorSplineSpace& space, Side side);
/// Knot vector of the trace space on a side.
const splines::KnotVector& side_knots(const splines::TensorSplineSpace& space, Side side);
int corner_dof(const splines::TensorSplineSpace& space, Corner corner);
/// The two sides meeting at a corner.
std::array<Side, 2> corner_sides(Corner corner);
/// Corners at the start and end of a side (in side parameter order).
std::array<Corner, 2> side_corners(Side side);
/// Parameter point on a side at side parameter t.
std::pair<double, double> side_point(Side side, double t);

struct Patch {
    std::shared_ptr<const GeometryMap> geometry;
    splines::TensorSplineSpace space;
};

/// Two patch sides glued together. With `reversed`, the side parameter of
/// `side_b` runs opposite to that of `side_a`.
struct Interface {
    int patch_a;
    Side side_a;
    int patch_b;
    Side side_b;
    bool reversed = false;
};

/// A geometric vertex of the patch layout and the patch corners meeting there.
struct Vertex {
    std::vector<std::pair<int, Corner>> corners;
};

class MultiPatch {
public:
    MultiPatch(std::vector<Patch> patches, std::vector<Interface> interfaces,
               std::vector<Vertex> vertices,
               std::vector<std::pair<int, Side>> dirichlet_sides);

    int num_patches() const { return static_cast<int>(patches_.size()); }
    const Patch& patch(int k) const { return patches_[k]; }
    const std::vector<Patch>& patches() const { return patches_; }
    const std::vector<Interface>& interfaces() const { return interfaces_; }
    const std::vector<Vertex>& vertices() const { return vertices_; }
    const std::vector<std::pair<int, Side>>& dirichlet_sides() const { return dirichlet_; }

    bool is_dirichlet(int patch, Side side) const;
    /// Index into interfaces() of the interface containing (patch, side), if any.
    std::optional<int> interface_of(int patch, Side side) const;
    /// Patch touches no Dirichlet side.
    bool is_floating(int patch) const;
    std::size_t total_dofs() const;

private:
    std::vector<Patch> patches_;
    std::vector<Interface> interfaces_;
    std::vector<Vertex> vertices_;
    std::vector<std::pair<int, Side>> dirichlet_;
};

/// Default annulus radii.
inline constexpr double kInnerRadius = 1.0;
inline constexpr double kOuterRadius = 2.0;

/// Structured n_theta x n_radial decomposition of the quarter annulus
/// {r in [r0,r1], theta in [0, pi/2]}. Patch (i, j) (angle i, radius j) has
/// flat index j + n_radial * i and covers [r_j, r_{j+1}] x [theta_i, theta_{i+1}].
/// Each patch carries degree-p splines with 2^L uniform spans per direction;
/// all of the outer boundary is Dirichlet.
MultiPatch build_quarter_annulus(int n_theta, int n_radial, int degree, int refinements,
                                 double r0 = kInnerRadius, double r1 = kOuterRadius);

/// Structured nx x ny grid of axis-parallel boxes tiling [0,1]^2; patch (i, j)
/// has flat index i + nx * j. All outer sides are Dirichlet.
MultiPatch build_rectangle_grid(int nx, int ny, int degree, int refinements);

/// Pairs (dof in k, dof in l) of trace dofs identified across the interface
/// shared by patches k and l, ordered by the side parameter of patch k.
std::vector<std::pair<int, int>> match_interface_dofs(const MultiPatch& mp, int k, int l);

} // namespace ieti::geometry
