#include "ieti/multigrid.hpp"

#include <algorithm>
#include <cmath>

#include "ieti/assembly.hpp"
#include "ieti/error.hpp"

namespace ieti::mg {

void MgConfig::validate() const
{
    if (pre_smooth < 0 || post_smooth < 0 || pre_smooth + post_smooth < 1)
        throw ValidationError("mg config: need at least one smoothing step");
    if (cycles < 1)
        throw ValidationError("mg config: cycles must be >= 1");
    if (alpha < 0.0)
        throw ValidationError("mg config: alpha must be >= 0");
}

MgHierarchy::MgHierarchy(std::vector<MgLevel> levels)
    : levels_(std::move(levels)), coarse_(levels_.at(0).a)
{
}

la::Vector MgHierarchy::v_cycle(const MgConfig& cfg, const la::Vector& b) const
{
    la::Vector x = la::Vector::Zero(b.size());
    cycle(num_levels() - 1, cfg, b, x);
    return x;
}

void MgHierarchy::cycle(int l, const MgConfig& cfg, const la::Vector& b, la::Vector& x) const
{
    if (l == 0) {
        x = coarse_.solve(b);
        return;
    }
    const auto& a = levels_[l].a;
    const auto& p = levels_[l - 1].p;
    gauss_seidel(a, x, b, cfg.pre_smooth, SweepOrder::Forward);
    la::Vector r(b.size());
    kernels::residual(a.view(), {x.data(), static_cast<std::size_t>(x.size())},
                      {b.data(), static_cast<std::size_t>(b.size())},
                      {r.data(), static_cast<std::size_t>(r.size())});
    la::Vector rc;
    p.multiply_transpose(r, rc);
    la::Vector xc = la::Vector::Zero(rc.size());
    cycle(l - 1, cfg, rc, xc);
    x += p * xc;
    gauss_seidel(a, x, b, cfg.post_smooth, SweepOrder::Backward);
}

int max_levels(const splines::TensorSplineSpace& fine_space)
{
    const int spans = std::min(fine_space.knots(0).num_spans(), fine_space.knots(1).num_spans());
    int l = 1;
    for (int s = spans; s > 1 && s % 2 == 0; s /= 2)
        ++l;
    return l;
}

namespace {

// Coarsens a dyadic knot vector by removing every second interior knot.
splines::KnotVector coarsen(const splines::KnotVector& kv)
{
    const auto bp = kv.breakpoints();
    std::vector<double> k(static_cast<std::size_t>(kv.degree() + 1), 0.0);
    for (std::size_t i = 2; i + 1 < bp.size(); i += 2)
        k.push_back(bp[i]);
    k.insert(k.end(), static_cast<std::size_t>(kv.degree() + 1), 1.0);
    return {kv.degree(), std::move(k)};
}

std::vector<int> kept_dofs(const splines::TensorSplineSpace& space,
                           std::span<const geometry::Side> sides)
{
    const auto removed = assembly::dofs_on_sides(space, sides);
    std::vector<int> kept;
    for (int i = 0, r = 0; i < space.size(); ++i) {
        if (r < static_cast<int>(removed.size()) && removed[r] == i)
            ++r;
        else
            kept.push_back(i);
    }
    return kept;
}

} // namespace

MgHierarchy build_hierarchy(const splines::TensorSplineSpace& fine_space,
                            const la::SparseMatrix& fine_full,
                            std::span<const geometry::Side> eliminated_sides, double alpha,
                            int levels)
{
    if (levels < 1)
        throw ValidationError("build_hierarchy: need at least one level");
    if (alpha < 0.0)
        throw ValidationError("build_hierarchy: alpha must be >= 0");
    levels = std::min(levels, max_levels(fine_space));

    std::vector<splines::TensorSplineSpace> spaces{fine_space};
    for (int l = 1; l < levels; ++l) {
        const auto& s = spaces.back();
        splines::TensorSplineSpace c(coarsen(s.knots(0)), coarsen(s.knots(1)));
        if (kept_dofs(c, eliminated_sides).empty())
            break;
        spaces.push_back(std::move(c));
    }
    std::reverse(spaces.begin(), spaces.end()); // coarsest first

    la::SparseMatrix a_fine = fine_full;
    if (alpha > 0.0)
        a_fine = a_fine.add(assembly::assemble_parameter_mass(fine_space), alpha);
    const auto fine_kept = kept_dofs(fine_space, eliminated_sides);
    if (fine_kept.empty())
        throw ValidationError("build_hierarchy: no dofs left after elimination");

    const int nl = static_cast<int>(spaces.size());
    std::vector<MgLevel> lv(static_cast<std::size_t>(nl));
    lv[nl - 1].a = a_fine.submatrix(fine_kept, fine_kept);
    for (int l = nl - 2; l >= 0; --l) {
        const auto full_p = splines::tensor_prolongation(spaces[l], spaces[l + 1]);
        const auto rows = kept_dofs(spaces[l + 1], eliminated_sides);
        const auto cols = kept_dofs(spaces[l], eliminated_sides);
        lv[l].p = full_p.submatrix(rows, cols);
        lv[l].a = la::galerkin_product(lv[l].p, lv[l + 1].a);
    }
    return MgHierarchy(std::move(lv));
}

MgHierarchy build_hierarchy(const splines::TensorSplineSpace& fine_space,
                            const geometry::GeometryMap& geo,
                            std::span<const geometry::Side> eliminated_sides, double alpha,
                            int levels)
{
    return build_hierarchy(fine_space, assembly::assemble_stiffness(fine_space, geo),
                           eliminated_sides, alpha, levels);
}

void gauss_seidel(const la::SparseMatrix& a, la::Vector& x, const la::Vector& b, int sweeps,
                  SweepOrder order)
{
    const auto rp = a.row_ptr();
    const auto ci = a.col_idx();
    const auto v = a.values();
    const int n = a.rows();
    auto relax = [&](int i) {
        double s = b[i];
        double d = 0.0;
        for (int k = rp[i]; k < rp[i + 1]; ++k) {
            if (ci[k] == i)
                d = v[k];
            else
                s -= v[k] * x[ci[k]];
        }
        if (d == 0.0)
            throw ValidationError("gauss_seidel: zero diagonal entry");
        x[i] = s / d;
    };
    for (int s = 0; s < sweeps; ++s) {
        if (order == SweepOrder::Forward)
            for (int i = 0; i < n; ++i)
                relax(i);
        else
            for (int i = n - 1; i >= 0; --i)
                relax(i);
    }
}

la::LinearOperator mg_preconditioner(std::shared_ptr<const MgHierarchy> h, MgConfig cfg)
{
    cfg.validate();
    const int n = h->size();
    return {n, [h = std::move(h), cfg](const la::Vector& b, la::Vector& x) {
                x = h->v_cycle(cfg, b);
                for (int c = 1; c < cfg.cycles; ++c)
                    x += h->v_cycle(cfg, b - h->fine_matrix() * x);
            }};
}

} // namespace ieti::mg
