#include "ieti/solver.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>

#include "ieti/error.hpp"

namespace ieti::dp {

using la::DenseMatrix;
using la::SparseMatrix;
using la::Vector;

std::string to_string(Variant v)
{
    switch (v) {
    case Variant::DD: return "DD";
    case Variant::MGD: return "MGD";
    case Variant::MGMG: return "MGMG";
    case Variant::MGMGS: return "MGMGS";
    }
    return "?";
}

Variant parse_variant(std::string_view name)
{
    std::string s;
    for (char c : name)
        if (c != '-' && c != '_')
            s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (s == "DD")
        return Variant::DD;
    if (s == "MGD")
        return Variant::MGD;
    if (s == "MGMG")
        return Variant::MGMG;
    if (s == "MGMGS")
        return Variant::MGMGS;
    throw ValidationError("unknown variant '" + std::string(name) + "'");
}

void SolverConfig::validate() const
{
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0))
            throw ValidationError(std::string("solver config: ") + what + " must be positive");
    };
    positive(outer_tol, "outer_tol");
    positive(inner_tol, "inner_tol");
    positive(basis_tol, "basis_tol");
    positive(alpha, "alpha");
    positive(above_margin, "above_margin");
    positive(below_margin, "below_margin");
    if (below_margin >= 1.0)
        throw ValidationError("solver config: below_margin must be < 1");
    if (max_outer < 1 || max_inner < 1 || precond_cycles < 1 || saddle_cycles < 1 ||
        smoothing_steps < 1 || lanczos_steps < 2)
        throw ValidationError("solver config: iteration counts must be positive");
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// OpenMP loop over patches; the first exception is rethrown after the loop.
template <class Fn>
void for_each_patch(int n, Fn&& fn)
{
    std::exception_ptr error;
    std::mutex m;
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < n; ++k) {
        try {
            fn(k);
        } catch (...) {
            std::lock_guard lock(m);
            if (!error)
                error = std::current_exception();
        }
    }
    if (error)
        std::rethrow_exception(error);
}

Vector gather(const Vector& x, const std::vector<int>& idx)
{
    Vector y(static_cast<int>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
        y[static_cast<int>(i)] = x[idx[i]];
    return y;
}

void scatter_add(const Vector& x, const std::vector<int>& idx, Vector& y)
{
    for (std::size_t i = 0; i < idx.size(); ++i)
        y[idx[i]] += x[static_cast<int>(i)];
}

void require(const la::SolveReport& r, const char* stage)
{
    if (!r.converged())
        throw SolveFailure(stage, la::to_string(r.status) + " after " + std::to_string(r.iterations) +
                                      " iterations (relative residual " +
                                      std::to_string(r.relative_residual) + ")");
}

} // namespace

struct IetiSolver::Local {
    SparseMatrix k_full;
    SparseMatrix k; // active
    Vector f;       // active
    SparseMatrix k_ii, k_ib, k_bi, k_bb;
    SparseMatrix c;        // n_pi x n_active
    la::DenseMatrix kernel; // constants on floating patches
    std::vector<int> glob;  // local primal row -> global primal id

    std::optional<la::DirectFactor> k_ii_factor;
    std::shared_ptr<const mg::MgHierarchy> dirichlet_mg;

    // K x + C^T mu = f, C x = g via (K + C^T C)
    std::optional<la::DirectFactor> k_aug;
    DenseMatrix k_aug_inv_ct;
    Eigen::LLT<DenseMatrix> h_aug;

    std::shared_ptr<const mg::MgHierarchy> neumann_mg;
    la::LinearOperator neumann_pc; // one V-cycle

    std::pair<Vector, Vector> solve_constrained(const Vector& rhs, const Vector& g) const
    {
        Vector b = rhs + c.transpose() * g;
        Vector kb = k_aug->solve(b);
        Vector mu = h_aug.solve(c * kb - g);
        Vector x = kb - k_aug_inv_ct * mu;
        return {x, mu};
    }
};

struct IetiSolver::Saddle {
    int n_pi = 0;
    int size = 0;
    std::vector<int> offset;              // start of the r-block of patch k
    std::vector<std::vector<int>> r_idx;  // r-coordinate -> active index
    std::vector<SparseMatrix> t;          // n_active x (n_r + n_pi(k))
    std::vector<SparseMatrix> tt;         // transposes
    std::vector<DenseMatrix> phi_r;       // phi_bar rows at r-coordinates
    std::vector<la::LinearOperator> local_mg;
    SparseMatrix b;
    la::LinearOperator ktilde;
    la::LinearOperator qinv;
    double scale = 1.0;

    Vector local_coords(int k, const Vector& x, const std::vector<int>& glob) const
    {
        const int nr = static_cast<int>(r_idx[k].size());
        Vector tk(nr + static_cast<int>(glob.size()));
        tk.head(nr) = x.segment(offset[k], nr);
        for (std::size_t j = 0; j < glob.size(); ++j)
            tk[nr + static_cast<int>(j)] = x[glob[j]];
        return tk;
    }

    void add_local(int k, const Vector& zk, const std::vector<int>& glob, Vector& y) const
    {
        const int nr = static_cast<int>(r_idx[k].size());
        y.segment(offset[k], nr) += zk.head(nr);
        for (std::size_t j = 0; j < glob.size(); ++j)
            y[glob[j]] += zk[nr + static_cast<int>(j)];
    }
};

IetiSolver::~IetiSolver() = default;

IetiSolver::IetiSolver(geometry::MultiPatch mp, const assembly::ScalarField& f, SolverConfig cfg)
    : mp_(std::move(mp)), cfg_(cfg)
{
    cfg_.validate();
    const auto t0 = std::chrono::steady_clock::now();
    part_ = build_partition(mp_);
    pc_ = build_constraints(mp_, part_);
    jumps_ = build_jump_operators(part_, pc_.primal_nodes);

    const int np = mp_.num_patches();
    local_.resize(static_cast<std::size_t>(np));
    for (auto& l : local_)
        l = std::make_unique<Local>();
    for_each_patch(np, [&](int k) {
        auto& loc = *local_[k];
        const auto& pp = part_.patches[k];
        const auto& patch = mp_.patch(k);
        loc.k_full = assembly::assemble_stiffness(patch.space, *patch.geometry);
        const Vector f_full = assembly::assemble_load(patch.space, *patch.geometry, f);
        const auto eliminated = assembly::dofs_on_sides(patch.space, pp.dirichlet_sides);
        auto sys = assembly::eliminate_dirichlet(loc.k_full, f_full, eliminated);
        loc.k = std::move(sys.stiffness);
        loc.f = std::move(sys.load);
        loc.k_ii = loc.k.submatrix(pp.interior, pp.interior);
        loc.k_ib = loc.k.submatrix(pp.interior, pp.boundary);
        loc.k_bi = loc.k.submatrix(pp.boundary, pp.interior);
        loc.k_bb = loc.k.submatrix(pp.boundary, pp.boundary);
        const auto& pk = pc_.patches[k];
        std::vector<la::Triplet> t;
        for (int r = 0; r < pk.size(); ++r)
            for (const auto& [pos, w] : pk.rows[r].entries)
                t.push_back({r, pp.boundary[pos], w});
        loc.c = SparseMatrix::from_triplets(pk.size(), pp.num_active(), std::move(t));
        loc.glob = pk.global_ids();
        if (mp_.is_floating(k))
            loc.kernel = DenseMatrix::Ones(pp.num_active(), 1);
    });
    const auto zeros = [np] { return std::vector<InnerStats>(static_cast<std::size_t>(np)); };
    gtilde_stats_ = zeros();
    basis_stats_ = zeros();
    dual_stats_ = zeros();
    recovery_stats_ = zeros();
    t_assembly_ = seconds_since(t0);
}

const SparseMatrix& IetiSolver::stiffness(int k) const { return local_[k]->k; }
const Vector& IetiSolver::load(int k) const { return local_[k]->f; }
const SparseMatrix& IetiSolver::constraint_active(int k) const { return local_[k]->c; }

IetiSolver::InteriorMode IetiSolver::msd_mode() const
{
    return cfg_.variant == Variant::DD ? InteriorMode::Direct : InteriorMode::Cycles;
}

void IetiSolver::setup_local(int k)
{
    auto& loc = *local_[k];
    const auto& pp = part_.patches[k];
    const auto& space = mp_.patch(k).space;
    const int levels = mg::max_levels(space);
    const Variant v = cfg_.variant;

    if (!pp.interior.empty()) {
        if (v == Variant::DD) {
            loc.k_ii_factor.emplace(loc.k_ii);
        } else {
            const std::vector<geometry::Side> all{geometry::Side::West, geometry::Side::East,
                                                  geometry::Side::South, geometry::Side::North};
            loc.dirichlet_mg = std::make_shared<const mg::MgHierarchy>(
                mg::build_hierarchy(space, loc.k_full, all, 0.0, levels));
        }
    }
    if (v == Variant::DD || v == Variant::MGD) {
        try {
            loc.k_aug.emplace(loc.k.add(loc.c.transpose() * loc.c));
        } catch (const NotSpdError&) {
            throw ConstraintError("patch " + std::to_string(k) +
                                  ": primal constraints do not fix the kernel of the local problem");
        }
        const DenseMatrix ct = loc.c.transpose().to_dense();
        loc.k_aug_inv_ct.resize(pp.num_active(), loc.c.rows());
        for (int j = 0; j < loc.c.rows(); ++j)
            loc.k_aug_inv_ct.col(j) = loc.k_aug->solve(ct.col(j));
        loc.h_aug.compute(loc.c * loc.k_aug_inv_ct);
        if (loc.h_aug.info() != Eigen::Success)
            throw ConstraintError("patch " + std::to_string(k) + ": rank-deficient primal constraints");
    } else {
        loc.neumann_mg = std::make_shared<const mg::MgHierarchy>(
            mg::build_hierarchy(space, loc.k_full, pp.dirichlet_sides, cfg_.alpha, levels));
        mg::MgConfig mc;
        mc.pre_smooth = mc.post_smooth = cfg_.smoothing_steps;
        loc.neumann_pc = mg::mg_preconditioner(loc.neumann_mg, mc);
    }
}

void IetiSolver::setup_basis(int k)
{
    auto& loc = *local_[k];
    const auto& pp = part_.patches[k];
    const int npi = loc.c.rows();
    DenseMatrix phi_bar(pp.num_active(), npi);
    if (npi > 0) {
        if (loc.k_aug) {
            // phi_bar = K_aug^{-1} C^T H^{-1}
            phi_bar = loc.k_aug_inv_ct * loc.h_aug.solve(DenseMatrix::Identity(npi, npi));
        } else {
            const auto a = la::LinearOperator::from_matrix(loc.k);
            const double s = la::calibrate_spd_order(a, loc.neumann_pc, la::OrderDirection::Above,
                                                     cfg_.above_margin, cfg_.lanczos_steps,
                                                     cfg_.seed + static_cast<std::uint64_t>(k));
            const auto khat_inv = la::LinearOperator::scaled(loc.neumann_pc, 1.0 / s);
            std::optional<la::SzSolver> sz;
            try {
                sz.emplace(la::SzSolver::with_scaled_schur(loc.k, loc.c, khat_inv, 0.99));
            } catch (const NotSpdError&) {
                throw ConstraintError("patch " + std::to_string(k) + ": rank-deficient primal constraints");
            }
            const Vector zero = Vector::Zero(pp.num_active());
            for (int j = 0; j < npi; ++j) {
                const auto res = sz->solve(zero, Vector::Unit(npi, j), cfg_.basis_tol, cfg_.max_inner);
                basis_stats_[k].record(res.report.iterations);
                require(res.report, "primal basis");
                phi_bar.col(j) = res.x;
            }
        }
    }
    DenseMatrix phi(pp.num_boundary(), npi);
    for (int b = 0; b < pp.num_boundary(); ++b)
        phi.row(b) = phi_bar.row(pp.boundary[b]);
    basis_.phi_bar[k] = std::move(phi_bar);
    basis_.phi[k] = std::move(phi);
}

void IetiSolver::setup()
{
    if (ready_)
        return;
    const auto t0 = std::chrono::steady_clock::now();
    const int np = mp_.num_patches();
    for_each_patch(np, [&](int k) { setup_local(k); });

    basis_.phi_bar.assign(static_cast<std::size_t>(np), {});
    basis_.phi.assign(static_cast<std::size_t>(np), {});
    for_each_patch(np, [&](int k) { setup_basis(k); });

    const int npi = pc_.num_primal();
    basis_.s_pipi = DenseMatrix::Zero(npi, npi);
    for (int k = 0; k < np; ++k) {
        const auto& loc = *local_[k];
        const auto& pb = basis_.phi_bar[k];
        DenseMatrix kphi(pb.rows(), pb.cols());
        for (int j = 0; j < pb.cols(); ++j)
            kphi.col(j) = loc.k * Vector(pb.col(j));
        const DenseMatrix sk = pb.transpose() * kphi;
        for (int i = 0; i < sk.rows(); ++i)
            for (int j = 0; j < sk.cols(); ++j)
                basis_.s_pipi(loc.glob[i], loc.glob[j]) += sk(i, j);
    }
    basis_.s_pipi = 0.5 * (basis_.s_pipi + basis_.s_pipi.transpose()).eval();
    if (npi > 0) {
        s_pipi_llt_.compute(basis_.s_pipi);
        if (s_pipi_llt_.info() != Eigen::Success)
            throw ConstraintError("primal Schur complement is not positive definite");
    }

    if (cfg_.variant == Variant::MGMGS) {
        setup_saddle();
    } else {
        gtilde_ = zero_trace(part_);
        const auto mode = cfg_.variant == Variant::DD ? InteriorMode::Direct : InteriorMode::Pcg;
        for_each_patch(np, [&](int k) {
            const auto& loc = *local_[k];
            const auto& pp = part_.patches[k];
            const Vector fi = gather(loc.f, pp.interior);
            Vector g = gather(loc.f, pp.boundary);
            if (!pp.interior.empty())
                g -= loc.k_bi * solve_interior(k, fi, mode, &gtilde_stats_[k]);
            gtilde_[k] = g;
        });
    }
    ready_ = true;
    t_setup_ = seconds_since(t0);
}

Vector IetiSolver::solve_interior(int k, const Vector& b, InteriorMode mode, InnerStats* stats) const
{
    const auto& loc = *local_[k];
    if (b.size() == 0)
        return b;
    if (loc.k_ii_factor)
        return loc.k_ii_factor->solve(b);
    mg::MgConfig mc;
    mc.pre_smooth = mc.post_smooth = cfg_.smoothing_steps;
    if (mode == InteriorMode::Cycles) {
        mc.cycles = cfg_.precond_cycles;
        Vector x = loc.dirichlet_mg->v_cycle(mc, b);
        for (int c = 1; c < mc.cycles; ++c)
            x += loc.dirichlet_mg->v_cycle(mc, b - loc.k_ii * x);
        return x;
    }
    if (!loc.dirichlet_mg)
        throw Error("solve_interior: no interior solver for this variant");
    const auto res = la::pcg(la::LinearOperator::from_matrix(loc.k_ii),
                             mg::mg_preconditioner(loc.dirichlet_mg, mc), b, cfg_.inner_tol,
                             cfg_.max_inner);
    if (stats)
        stats->record(res.report.iterations);
    require(res.report, "interior solve");
    return res.x;
}

Vector IetiSolver::schur(int k, const Vector& w, InteriorMode mode) const
{
    const auto& loc = *local_[k];
    Vector y = loc.k_bb * w;
    if (loc.k_ii.rows() > 0)
        y -= loc.k_bi * solve_interior(k, loc.k_ib * w, mode, nullptr);
    return y;
}

Vector IetiSolver::apply_schur(int k, const Vector& w) const
{
    const auto& loc = *local_[k];
    Vector y = loc.k_bb * w;
    if (loc.k_ii.rows() > 0) {
        if (loc.k_ii_factor)
            y -= loc.k_bi * loc.k_ii_factor->solve(loc.k_ib * w);
        else
            y -= loc.k_bi * solve_interior(k, loc.k_ib * w, InteriorMode::Pcg, nullptr);
    }
    return y;
}

Vector IetiSolver::solve_dual(int k, const Vector& r) const
{
    // w in ker C with S w - r in range C^T
    const auto& loc = *local_[k];
    const auto& pp = part_.patches[k];
    const auto& phi = basis_.phi[k];
    const auto& cb = pc_.patches[k].c;
    if (loc.k_aug) {
        Vector rhs = Vector::Zero(pp.num_active());
        scatter_add(r, pp.boundary, rhs);
        const Vector x = loc.solve_constrained(rhs, Vector::Zero(loc.c.rows())).first;
        return gather(x, pp.boundary);
    }
    const Vector rp = r - cb.transpose() * Vector(phi.transpose() * r);
    Vector rhs = Vector::Zero(pp.num_active());
    scatter_add(rp, pp.boundary, rhs);
    if (rhs.norm() == 0.0)
        return Vector::Zero(pp.num_boundary());
    const auto res = la::semidefinite_pcg(la::LinearOperator::from_matrix(loc.k), loc.neumann_pc, rhs,
                                          cfg_.inner_tol, cfg_.max_inner,
                                          loc.kernel.size() ? &loc.kernel : nullptr);
    dual_stats_[k].record(res.report.iterations);
    require(res.report, "dual solve");
    const Vector u = gather(res.x, pp.boundary);
    return u - phi * (cb * u);
}

TraceVector IetiSolver::apply_stilde_inv(const TraceVector& r) const
{
    const int np = part_.num_patches();
    Vector rpi = Vector::Zero(pc_.num_primal());
    for (int k = 0; k < np; ++k)
        scatter_add(basis_.phi[k].transpose() * r[k], local_[k]->glob, rpi);
    const Vector upi = pc_.num_primal() > 0 ? Vector(s_pipi_llt_.solve(rpi)) : rpi;
    TraceVector w(static_cast<std::size_t>(np));
    for_each_patch(np, [&](int k) {
        w[k] = basis_.phi[k] * gather(upi, local_[k]->glob) + solve_dual(k, r[k]);
    });
    return w;
}

Vector IetiSolver::apply_f(const Vector& lambda) const
{
    TraceVector r = zero_trace(part_);
    jumps_.apply_transpose_add(lambda, r);
    return jumps_.apply(apply_stilde_inv(r));
}

Vector IetiSolver::rhs_d() const { return jumps_.apply(apply_stilde_inv(gtilde_)); }

Vector IetiSolver::apply_msd(const Vector& lambda) const
{
    TraceVector x = zero_trace(part_);
    jumps_.apply_scaled_transpose_add(lambda, x);
    const auto mode = msd_mode();
    for_each_patch(part_.num_patches(), [&](int k) {
        Vector& xk = x[k];
        const auto& rows = pc_.patches[k].rows;
        // E: set the designated dof so that the edge average vanishes
        for (const auto& row : rows) {
            if (row.kind != PrimalKind::Edge)
                continue;
            double s = 0.0, wd = 0.0;
            for (const auto& [pos, w] : row.entries) {
                if (pos == row.designated)
                    wd = w;
                else
                    s += w * xk[pos];
            }
            xk[row.designated] = -s / wd;
        }
        Vector y = schur(k, xk, mode);
        // E^T
        for (const auto& row : rows) {
            if (row.kind != PrimalKind::Edge)
                continue;
            double wd = 0.0;
            for (const auto& [pos, w] : row.entries)
                if (pos == row.designated)
                    wd = w;
            const double yd = y[row.designated];
            for (const auto& [pos, w] : row.entries)
                if (pos != row.designated)
                    y[pos] -= w / wd * yd;
            y[row.designated] = 0.0;
        }
        xk = std::move(y);
    });
    return jumps_.apply_scaled(x);
}

Vector IetiSolver::to_full(int k, const Vector& active) const
{
    const auto& pp = part_.patches[k];
    Vector u = Vector::Zero(static_cast<int>(pp.full_to_active.size()));
    for (int a = 0; a < pp.num_active(); ++a)
        u[pp.active[a]] = active[a];
    return u;
}

void IetiSolver::setup_saddle()
{
    auto sd = std::make_unique<Saddle>();
    const int np = part_.num_patches();
    sd->n_pi = pc_.num_primal();
    int off = sd->n_pi;
    sd->offset.resize(static_cast<std::size_t>(np));
    sd->r_idx.resize(static_cast<std::size_t>(np));
    sd->t.resize(static_cast<std::size_t>(np));
    sd->tt.resize(static_cast<std::size_t>(np));
    sd->phi_r.resize(static_cast<std::size_t>(np));
    sd->local_mg.resize(static_cast<std::size_t>(np));
    std::vector<std::vector<int>> r_pos(static_cast<std::size_t>(np));

    for (int k = 0; k < np; ++k) {
        const auto& pp = part_.patches[k];
        const auto& rows = pc_.patches[k].rows;
        const int na = pp.num_active();
        // coordinate column of each active dof that keeps an identity column
        std::vector<int> col(static_cast<std::size_t>(na), -2);
        std::vector<int> designated_active(rows.size(), -1);
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const auto& row = rows[j];
            if (row.kind == PrimalKind::Edge)
                designated_active[j] = pp.boundary[row.designated];
            else
                col[pp.boundary[row.entries.front().first]] = -1; // vertex: primal column
        }
        for (int d : designated_active)
            if (d >= 0)
                col[d] = -3;
        auto& r = sd->r_idx[k];
        r_pos[k].assign(static_cast<std::size_t>(na), -1);
        for (int a = 0; a < na; ++a) {
            if (col[a] == -2) {
                r_pos[k][a] = static_cast<int>(r.size());
                col[a] = static_cast<int>(r.size());
                r.push_back(a);
            }
        }
        const int nr = static_cast<int>(r.size());
        for (std::size_t j = 0; j < rows.size(); ++j)
            if (rows[j].kind == PrimalKind::Vertex)
                col[pp.boundary[rows[j].entries.front().first]] = nr + static_cast<int>(j);

        std::vector<la::Triplet> t;
        for (int a = 0; a < na; ++a)
            if (col[a] >= 0)
                t.push_back({a, col[a], 1.0});
        for (std::size_t j = 0; j < rows.size(); ++j) {
            const auto& row = rows[j];
            if (row.kind != PrimalKind::Edge)
                continue;
            double wd = 0.0;
            for (const auto& [pos, w] : row.entries)
                if (pos == row.designated)
                    wd = w;
            const int d = designated_active[j];
            t.push_back({d, nr + static_cast<int>(j), 1.0 / wd});
            for (const auto& [pos, w] : row.entries)
                if (pos != row.designated)
                    t.push_back({d, col[pp.boundary[pos]], -w / wd});
        }
        sd->t[k] = SparseMatrix::from_triplets(na, nr + static_cast<int>(rows.size()), std::move(t));
        sd->tt[k] = sd->t[k].transpose();
        sd->offset[k] = off;
        off += nr;

        const auto& pb = basis_.phi_bar[k];
        sd->phi_r[k].resize(nr, pb.cols());
        for (int i = 0; i < nr; ++i)
            sd->phi_r[k].row(i) = pb.row(r[i]);

        mg::MgConfig mc;
        mc.pre_smooth = mc.post_smooth = cfg_.smoothing_steps;
        mc.cycles = cfg_.saddle_cycles;
        sd->local_mg[k] = mg::mg_preconditioner(local_[k]->neumann_mg, mc);
    }
    sd->size = off;

    std::vector<la::Triplet> bt;
    for (int row = 0; row < jumps_.size(); ++row) {
        const auto& j = jumps_.rows[row];
        for (const auto& [copy, sign] : {std::pair{j.plus, 1.0}, std::pair{j.minus, -1.0}}) {
            const int a = part_.patches[copy.patch].boundary[copy.pos];
            const int rp = r_pos[copy.patch][a];
            if (rp < 0)
                throw Error("setup_saddle: multiplier acts on a primal coordinate");
            bt.push_back({row, sd->offset[copy.patch] + rp, sign});
        }
    }
    sd->b = SparseMatrix::from_triplets(jumps_.size(), sd->size, std::move(bt));

    const Saddle* s = sd.get();
    sd->ktilde = la::LinearOperator(sd->size, [this, s, np](const Vector& x, Vector& y) {
        std::vector<Vector> z(static_cast<std::size_t>(np));
        for_each_patch(np, [&](int k) {
            const Vector u = s->t[k] * s->local_coords(k, x, local_[k]->glob);
            z[k] = s->tt[k] * (local_[k]->k * u);
        });
        y = Vector::Zero(s->size);
        for (int k = 0; k < np; ++k)
            s->add_local(k, z[k], local_[k]->glob, y);
    });

    // Q^{-1}: exact coarse correction on the primal basis plus local multigrid
    // on the complement (functions with vanishing primal values).
    auto qinv = [this, s, np](const Vector& y, Vector& x) {
        Vector c = y.head(s->n_pi);
        for (int k = 0; k < np; ++k) {
            const int nr = static_cast<int>(s->r_idx[k].size());
            scatter_add(s->phi_r[k].transpose() * y.segment(s->offset[k], nr), local_[k]->glob, c);
        }
        const Vector z = s->n_pi > 0 ? Vector(s_pipi_llt_.solve(c)) : c;
        x = Vector::Zero(s->size);
        x.head(s->n_pi) = z;
        for_each_patch(np, [&](int k) {
            const auto& loc = *local_[k];
            const auto& pb = basis_.phi_bar[k];
            const auto& r = s->r_idx[k];
            const int nr = static_cast<int>(r.size());
            Vector rho = Vector::Zero(part_.patches[k].num_active());
            for (int i = 0; i < nr; ++i)
                rho[r[i]] = y[s->offset[k] + i];
            if (pb.cols() > 0)
                rho -= loc.c.transpose() * Vector(pb.transpose() * rho);
            Vector v = s->local_mg[k] * rho;
            if (pb.cols() > 0)
                v -= pb * (loc.c * v);
            x.segment(s->offset[k], nr) = s->phi_r[k] * gather(z, loc.glob) + gather(v, r);
        });
    };
    const la::LinearOperator q(sd->size, qinv);
    sd->scale = la::calibrate_spd_order(sd->ktilde, q, la::OrderDirection::Below, cfg_.below_margin,
                                        cfg_.lanczos_steps, cfg_.seed);
    sd->qinv = la::LinearOperator::scaled(q, 1.0 / sd->scale);
    saddle_ = std::move(sd);
}

IetiSolution IetiSolver::solve_dual_system()
{
    IetiSolution sol;
    const int np = part_.num_patches();
    const auto f_op = la::LinearOperator(num_multipliers(), [this](const Vector& x, Vector& y) { y = apply_f(x); });
    const auto m_op = la::LinearOperator(num_multipliers(), [this](const Vector& x, Vector& y) { y = apply_msd(x); });
    const Vector d = rhs_d();
    if (num_multipliers() > 0 && d.norm() > 0.0) {
        auto res = la::pcg(f_op, m_op, d, cfg_.outer_tol, cfg_.max_outer);
        sol.stats.outer = res.report;
        sol.lambda = std::move(res.x);
    } else {
        sol.lambda = Vector::Zero(num_multipliers());
    }
    require(sol.stats.outer, "outer");

    TraceVector r = gtilde_;
    for (auto& v : r)
        v = -v;
    jumps_.apply_transpose_add(sol.lambda, r);
    for (auto& v : r)
        v = -v;
    const TraceVector w = apply_stilde_inv(r);

    const auto mode = cfg_.variant == Variant::DD ? InteriorMode::Direct : InteriorMode::Pcg;
    sol.u.resize(static_cast<std::size_t>(np));
    for_each_patch(np, [&](int k) {
        const auto& loc = *local_[k];
        const auto& pp = part_.patches[k];
        Vector ua = Vector::Zero(pp.num_active());
        for (int b = 0; b < pp.num_boundary(); ++b)
            ua[pp.boundary[b]] = w[k][b];
        if (!pp.interior.empty()) {
            const Vector rhs = gather(loc.f, pp.interior) - loc.k_ib * w[k];
            const Vector ui = solve_interior(k, rhs, mode, &recovery_stats_[k]);
            for (std::size_t i = 0; i < pp.interior.size(); ++i)
                ua[pp.interior[i]] = ui[static_cast<int>(i)];
        }
        sol.u[k] = to_full(k, ua);
    });
    return sol;
}

IetiSolution IetiSolver::solve_saddle_system()
{
    IetiSolution sol;
    const auto& s = *saddle_;
    const int np = part_.num_patches();
    Vector ft = Vector::Zero(s.size);
    for (int k = 0; k < np; ++k)
        s.add_local(k, s.tt[k] * local_[k]->f, local_[k]->glob, ft);
    const auto m_op = la::LinearOperator(num_multipliers(), [this](const Vector& x, Vector& y) { y = apply_msd(x); });
    auto res = la::bpcg(s.ktilde, s.b, s.qinv, m_op, ft, Vector::Zero(num_multipliers()),
                        cfg_.outer_tol, cfg_.max_outer);
    sol.stats.outer = res.report;
    require(res.report, "outer");
    sol.lambda = std::move(res.y);
    sol.u.resize(static_cast<std::size_t>(np));
    for (int k = 0; k < np; ++k)
        sol.u[k] = to_full(k, s.t[k] * s.local_coords(k, res.x, local_[k]->glob));
    return sol;
}

IetiSolution IetiSolver::solve()
{
    IetiSolution sol;
    try {
        setup();
        const auto t0 = std::chrono::steady_clock::now();
        sol = cfg_.variant == Variant::MGMGS ? solve_saddle_system() : solve_dual_system();
        sol.stats.t_solve = seconds_since(t0);
        sol.converged = true;
    } catch (const SolveFailure& e) {
        sol.failed_stage = e.stage();
        sol.message = e.what();
    } catch (const OrderViolationError& e) {
        sol.failed_stage = cfg_.variant == Variant::MGMGS ? "outer" : "primal basis";
        sol.message = e.what();
    }
    for (std::size_t k = 0; k < gtilde_stats_.size(); ++k) {
        sol.stats.gtilde += gtilde_stats_[k];
        sol.stats.basis += basis_stats_[k];
        sol.stats.dual += dual_stats_[k];
        sol.stats.recovery += recovery_stats_[k];
    }
    sol.stats.t_assembly = t_assembly_;
    sol.stats.t_setup = t_setup_;
    return sol;
}

double continuity_residual(const DofPartition& part, const std::vector<la::Vector>& u_full)
{
    double m = 0.0;
    for (const auto& copies : part.node_copies) {
        const auto value = [&](const NodeCopy& c) {
            const auto& pp = part.patches[c.patch];
            return u_full[c.patch][pp.active[pp.boundary[c.pos]]];
        };
        const double v0 = value(copies.front());
        for (std::size_t i = 1; i < copies.size(); ++i)
            m = std::max(m, std::abs(value(copies[i]) - v0));
    }
    return m;
}

double l2_error(const geometry::MultiPatch& mp, const std::vector<la::Vector>& u_full,
                const assembly::ScalarField& exact)
{
    double e2 = 0.0;
    for (int k = 0; k < mp.num_patches(); ++k) {
        const auto& p = mp.patch(k);
        e2 += assembly::l2_error_squared(
            p.space, *p.geometry, std::span<const double>(u_full[k].data(), u_full[k].size()), exact);
    }
    return std::sqrt(e2);
}

} // namespace ieti::dp
