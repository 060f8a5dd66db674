#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "ieti/assembly.hpp"
#include "ieti/error.hpp"
#include "ieti/geometry.hpp"

using namespace ieti;
using geometry::Side;

namespace {

geometry::Jacobian fd_jacobian(const geometry::GeometryMap& g, double xi, double eta)
{
    const double h = 1e-6;
    geometry::Jacobian j;
    j.col(0) = (g.eval(xi + h, eta) - g.eval(xi - h, eta)) / (2 * h);
    j.col(1) = (g.eval(xi, eta + h) - g.eval(xi, eta - h)) / (2 * h);
    return j;
}

} // namespace

TEST_CASE("analytic jacobians match finite differences")
{
    const geometry::PolarBoxMap polar(1.0, 2.0, 0.1, 0.7);
    const geometry::AffineBoxMap box(0.0, 2.0, -1.0, 0.5);
    for (double xi : {0.2, 0.5, 0.8})
        for (double eta : {0.1, 0.6}) {
            CHECK((polar.jacobian(xi, eta) - fd_jacobian(polar, xi, eta)).norm() < 1e-8);
            CHECK((box.jacobian(xi, eta) - fd_jacobian(box, xi, eta)).norm() < 1e-8);
            CHECK(polar.jacobian(xi, eta).determinant() > 0.0);
        }
    // spline map reproducing an affine box through Greville control points
    const auto space = splines::TensorSplineSpace::uniform(2, 2);
    std::vector<geometry::Point> cps;
    for (int i = 0; i < space.size(); ++i) {
        const auto mi = space.multi_index(i);
        auto greville = [&](int dir, int k) {
            const auto t = space.knots(dir).knots();
            return (t[k + 1] + t[k + 2]) / 2.0;
        };
        cps.push_back(box.eval(greville(0, mi[0]), greville(1, mi[1])));
    }
    const geometry::SplineGeometryMap spline(space, cps);
    CHECK((spline.eval(0.3, 0.7) - box.eval(0.3, 0.7)).norm() < 1e-13);
    CHECK((spline.jacobian(0.3, 0.7) - box.jacobian(0.3, 0.7)).norm() < 1e-12);
}

TEST_CASE("quarter annulus topology")
{
    const auto mp = geometry::build_quarter_annulus(8, 4, 2, 1);
    CHECK(mp.num_patches() == 32);
    CHECK(mp.interfaces().size() == 52);
    // an 8 x 4 patch grid has 9 x 5 vertices, 7 x 3 of them interior
    CHECK(mp.vertices().size() == 45);
    int interior = 0;
    for (const auto& v : mp.vertices())
        if (v.corners.size() == 4)
            ++interior;
    CHECK(interior == 21);
    int floating = 0;
    for (int k = 0; k < mp.num_patches(); ++k)
        floating += mp.is_floating(k) ? 1 : 0;
    CHECK(floating == 12);

    const auto single = geometry::build_quarter_annulus(1, 1, 1, 0);
    CHECK(single.num_patches() == 1);
    CHECK(single.interfaces().empty());
    CHECK(single.total_dofs() == 4);
}

TEST_CASE("annulus area")
{
    for (int l : {0, 2}) {
        const auto mp = geometry::build_quarter_annulus(8, 4, 2, l);
        double area = 0.0;
        for (const auto& p : mp.patches()) {
            const auto load = assembly::assemble_load(p.space, *p.geometry,
                                                      [](const geometry::Point&) { return 1.0; });
            area += load.sum();
        }
        CHECK(area == doctest::Approx(std::numbers::pi * 3.0 / 4.0).epsilon(1e-8));
    }
}

TEST_CASE("det J > 0 for all quarter annulus grids up to 16 x 16")
{
    const auto rule = assembly::gauss_legendre(3);
    for (int nt : {1, 3, 16})
        for (int nr : {1, 5, 16}) {
            const auto mp = geometry::build_quarter_annulus(nt, nr, 2, 0);
            double min_det = 1e300;
            for (const auto& p : mp.patches())
                for (double x : rule.nodes)
                    for (double y : rule.nodes)
                        min_det = std::min(min_det, p.geometry->jacobian(x, y).determinant());
            CHECK(min_det > 0.0);
        }
}

TEST_CASE("interfaces match geometrically and in their traces")
{
    const auto mp = geometry::build_quarter_annulus(3, 2, 2, 2);
    for (const auto& f : mp.interfaces()) {
        const auto& ga = *mp.patch(f.patch_a).geometry;
        const auto& gb = *mp.patch(f.patch_b).geometry;
        const auto pairs = geometry::match_interface_dofs(mp, f.patch_a, f.patch_b);
        CHECK(pairs.size() == geometry::side_dofs(mp.patch(f.patch_a).space, f.side_a).size());
        for (int s = 0; s <= 20; ++s) {
            const double t = s / 20.0;
            const auto [xa, ya] = geometry::side_point(f.side_a, t);
            const auto [xb, yb] = geometry::side_point(f.side_b, f.reversed ? 1.0 - t : t);
            CHECK((ga.eval(xa, ya) - gb.eval(xb, yb)).norm() < 1e-10);
            // basis traces of paired dofs coincide
            for (const auto& [da, db] : pairs) {
                std::vector<double> ca(mp.patch(f.patch_a).space.size(), 0.0);
                std::vector<double> cb(mp.patch(f.patch_b).space.size(), 0.0);
                ca[da] = 1.0;
                cb[db] = 1.0;
                CHECK(splines::evaluate(mp.patch(f.patch_a).space, ca, xa, ya) ==
                      doctest::Approx(splines::evaluate(mp.patch(f.patch_b).space, cb, xb, yb)).epsilon(1e-12).scale(1.0));
            }
        }
        // symmetric: (l, k) returns the transposed pairs
        const auto back = geometry::match_interface_dofs(mp, f.patch_b, f.patch_a);
        REQUIRE(back.size() == pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i)
            CHECK(std::find(back.begin(), back.end(), std::pair{pairs[i].second, pairs[i].first}) != back.end());
    }
}

TEST_CASE("match_interface_dofs: two p=1 patches, reversed orientation, mismatch")
{
    const auto space = splines::TensorSplineSpace::uniform(1, 2);
    auto left = std::make_shared<geometry::AffineBoxMap>(0.0, 1.0, 0.0, 1.0);
    auto right = std::make_shared<geometry::AffineBoxMap>(1.0, 2.0, 0.0, 1.0);
    std::vector<std::pair<int, Side>> dir{{0, Side::West}, {0, Side::South}, {0, Side::North},
                                          {1, Side::East}, {1, Side::South}, {1, Side::North}};
    const geometry::MultiPatch mp({{left, space}, {right, space}}, {{0, Side::East, 1, Side::West, false}},
                                  {}, dir);
    const auto pairs = geometry::match_interface_dofs(mp, 0, 1);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0] == std::pair{2, 0});
    CHECK(pairs[1] == std::pair{5, 3});
    CHECK(pairs[2] == std::pair{8, 6});

    const geometry::MultiPatch rev({{left, space}, {right, space}}, {{0, Side::East, 1, Side::West, true}},
                                   {}, dir);
    const auto rp = geometry::match_interface_dofs(rev, 0, 1);
    CHECK(rp[0] == std::pair{2, 6});
    CHECK(rp[2] == std::pair{8, 0});

    const geometry::MultiPatch bad({{left, space}, {right, splines::TensorSplineSpace::uniform(1, 3)}},
                                   {{0, Side::East, 1, Side::West, false}}, {}, dir);
    CHECK_THROWS_AS(geometry::match_interface_dofs(bad, 0, 1), ValidationError);
}

TEST_CASE("multipatch validation")
{
    const auto space = splines::TensorSplineSpace::uniform(1, 1);
    auto g = std::make_shared<geometry::AffineBoxMap>(0.0, 1.0, 0.0, 1.0);
    // side neither interface nor Dirichlet
    CHECK_THROWS_AS(geometry::MultiPatch({{g, space}}, {}, {}, {{0, Side::West}}), ValidationError);
    // side both
    CHECK_THROWS_AS(geometry::MultiPatch({{g, space}, {g, space}}, {{0, Side::East, 1, Side::West, false}}, {},
                                         {{0, Side::West}, {0, Side::East}, {0, Side::South}, {0, Side::North},
                                          {1, Side::West}, {1, Side::East}, {1, Side::South}, {1, Side::North}}),
                    ValidationError);
}

TEST_CASE("Monte-Carlo coverage of the annulus")
{
    const auto mp = geometry::build_quarter_annulus(8, 4, 1, 0);
    std::mt19937 gen(2);
    std::uniform_real_distribution<double> r(1.0, 2.0), t(0.0, std::numbers::pi / 2);
    for (int s = 0; s < 1000; ++s) {
        const double rr = r(gen), tt = t(gen);
        const geometry::Point x(rr * std::cos(tt), rr * std::sin(tt));
        int inside = 0;
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 4; ++j) {
                const double r0 = 1.0 + j * 0.25, t0 = i * std::numbers::pi / 16;
                if (rr > r0 && rr < r0 + 0.25 && tt > t0 && tt < t0 + std::numbers::pi / 16) {
                    ++inside;
                    // the patch map hits x at the local polar coordinates
                    const auto& g = *mp.patch(j + 4 * i).geometry;
                    CHECK((g.eval((rr - r0) / 0.25, (tt - t0) / (std::numbers::pi / 16)) - x).norm() < 1e-12);
                }
            }
        CHECK(inside == 1);
    }
}
