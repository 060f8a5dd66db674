// Acceptance run: one PASS/FAIL line per criterion. The exit code counts the
// failing criteria that are not listed with --known-deviation.

#include <chrono>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "ieti/error.hpp"
#include "ieti/experiment.hpp"
#include "ieti/saddle.hpp"
#include "ieti/solver.hpp"
#include "oracles.hpp"

using namespace ieti;
using la::DenseMatrix;
using la::Vector;

namespace {

const assembly::ManufacturedSolution kMs;
double f_rhs(const geometry::Point& x) { return kMs.f(x); }

const std::vector<dp::Variant> kVariants{dp::Variant::DD, dp::Variant::MGD, dp::Variant::MGMG,
                                         dp::Variant::MGMGS};

struct Run {
    int outer = 0;
    bool converged = false;
    dp::SolveStats stats;
    std::vector<Vector> u;
};

double rel(const DenseMatrix& a, const DenseMatrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-6); }

double max_abs(const std::vector<Vector>& u)
{
    double m = 0.0;
    for (const auto& v : u)
        m = std::max(m, v.lpNorm<Eigen::Infinity>());
    return m;
}

double max_diff(const std::vector<Vector>& a, const std::vector<Vector>& b)
{
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        m = std::max(m, (a[k] - b[k]).lpNorm<Eigen::Infinity>());
    return m;
}

class Report {
public:
    explicit Report(std::set<int> known) : known_(std::move(known)) {}
    void add(int id, bool pass, const std::string& detail)
    {
        std::printf("%s criterion %d: %s%s\n", pass ? "PASS" : "FAIL", id, detail.c_str(),
                    !pass && known_.count(id) ? " [known deviation]" : "");
        std::fflush(stdout);
        if (!pass && !known_.count(id))
            ++blocking_;
    }
    int blocking() const { return blocking_; }

private:
    std::set<int> known_;
    int blocking_ = 0;
};

std::string fmt(const char* f, double a) { char b[64]; std::snprintf(b, sizeof b, f, a); return b; }

/// Named sub-check accumulator for the invariant criterion.
struct Checks {
    std::string failed;
    void operator()(const std::string& name, bool ok)
    {
        if (!ok)
            failed += (failed.empty() ? "" : ", ") + name;
    }
};

DenseMatrix random_matrix(int r, int c, std::mt19937& gen)
{
    std::normal_distribution<double> d;
    DenseMatrix m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            m(i, j) = d(gen);
    return m;
}

la::LinearOperator dense_op(const DenseMatrix& a)
{
    return {static_cast<int>(a.rows()), [a](const Vector& x, Vector& y) { y = a * x; }};
}

la::LinearOperator dense_inverse(const DenseMatrix& a)
{
    auto llt = std::make_shared<Eigen::LLT<DenseMatrix>>(a);
    return {static_cast<int>(a.rows()), [llt](const Vector& x, Vector& y) { y = llt->solve(x); }};
}

/// Max relative deviation of SZ-PCG and BPCG from a dense KKT solve on random instances.
double saddle_oracle_deviation()
{
    std::mt19937 gen(17);
    double worst = 0.0;
    for (int trial = 0; trial < 4; ++trial) {
        const int n = 80 + 30 * trial, m = 10 + 5 * trial; // n + m <= 200
        const DenseMatrix g = random_matrix(n, n, gen);
        DenseMatrix k = g * g.transpose() / n + 0.1 * DenseMatrix::Identity(n, n);
        const DenseMatrix c = random_matrix(m, n, gen);
        const Vector f = random_matrix(n, 1, gen), h = random_matrix(m, 1, gen);
        DenseMatrix a = DenseMatrix::Zero(n + m, n + m);
        a.topLeftCorner(n, n) = k;
        a.topRightCorner(n, m) = c.transpose();
        a.bottomLeftCorner(m, n) = c;
        Vector rhs(n + m);
        rhs << f, h;
        const Vector z = a.fullPivLu().solve(rhs);
        const auto dev = [&](const la::SaddleResult& r) {
            if (!r.report.converged())
                return 1.0;
            return std::max((r.x - z.head(n)).norm() / z.head(n).norm(), (r.y - z.tail(m)).norm() / z.tail(m).norm());
        };
        const Eigen::SelfAdjointEigenSolver<DenseMatrix> es(k);
        const DenseMatrix khat = k + 0.2 * es.eigenvalues().maxCoeff() * DenseMatrix::Identity(n, n);
        worst = std::max(worst, dev(la::SzSolver::with_scaled_schur(la::SparseMatrix::from_dense(k),
                                                                    la::SparseMatrix::from_dense(c),
                                                                    dense_inverse(khat), 0.9)
                                        .solve(f, h, 1e-12, 1000)));
        const double q = 0.9 * es.eigenvalues().minCoeff();
        worst = std::max(worst, dev(la::bpcg(dense_op(k), la::SparseMatrix::from_dense(c),
                                             la::LinearOperator::scaled(la::LinearOperator::identity(n), 1.0 / q),
                                             dense_inverse(c * c.transpose() / q), f, h, 1e-12, 2000)));
    }
    return worst;
}

std::shared_ptr<const mg::MgHierarchy> square_hierarchy(int l)
{
    const std::vector<geometry::Side> all{geometry::Side::West, geometry::Side::East, geometry::Side::South,
                                          geometry::Side::North};
    const auto space = splines::TensorSplineSpace::uniform(2, 1 << l);
    return std::make_shared<const mg::MgHierarchy>(
        mg::build_hierarchy(space, geometry::AffineBoxMap(0, 1, 0, 1), all, 0.0, l + 1));
}

/// Energy-norm contraction of the V-cycle over `probes` random errors (max ratio
/// after a few warm-up cycles per probe).
double vcycle_contraction(const mg::MgHierarchy& h, int probes)
{
    std::mt19937 gen(5);
    const auto& a = h.fine_matrix();
    double rho = 0.0;
    for (int p = 0; p < probes; ++p) {
        Vector e = random_matrix(h.size(), 1, gen);
        for (int s = 0; s < 6; ++s) {
            const double before = std::sqrt(e.dot(a * e));
            e -= h.v_cycle({}, a * e);
            const double after = std::sqrt(e.dot(a * e));
            if (s >= 3)
                rho = std::max(rho, after / before);
            e /= after;
        }
    }
    return rho;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"IETI-DP acceptance criteria"};
    int max_level = 5;
    std::vector<int> known;
    app.add_option("--max-level", max_level, "finest refinement level of the iteration study")->check(CLI::Range(3, 7));
    app.add_option("--known-deviation", known, "criteria reported but excluded from the exit code");
    CLI11_PARSE(app, argc, argv);
    kernels::configure_threads_from_env();
    Report report(std::set<int>(known.begin(), known.end()));
    const auto t_start = std::chrono::steady_clock::now();

    // iteration study on the 8 x 4 annulus, p = 2
    std::vector<int> levels;
    for (int l = 2; l <= max_level; ++l)
        levels.push_back(l);
    std::map<std::pair<dp::Variant, int>, Run> runs;
    std::printf("%-6s %5s %8s %6s %8s %8s %8s %9s %8s\n", "variant", "level", "dofs", "outer", "g~", "basis",
                "dual", "basis_max", "time[s]");
    for (int l : levels) {
        const auto mp = geometry::build_quarter_annulus(8, 4, 2, l);
        for (auto v : kVariants) {
            dp::SolverConfig cfg;
            cfg.variant = v;
            dp::IetiSolver solver(mp, f_rhs, cfg);
            auto sol = solver.solve();
            Run r{sol.stats.outer.iterations, sol.converged, sol.stats, {}};
            if (l <= 4)
                r.u = std::move(sol.u);
            std::printf("%-6s %5d %8zu %6d %8.2f %8.2f %8.2f %9ld %8.2f%s\n", dp::to_string(v).c_str(), l,
                        mp.total_dofs(), r.outer, r.stats.gtilde.average(), r.stats.basis.average(),
                        r.stats.dual.average(), r.stats.basis.max_iterations,
                        r.stats.t_assembly + r.stats.t_setup + r.stats.t_solve,
                        sol.converged ? "" : (" FAILED: " + sol.failed_stage).c_str());
            runs[{v, l}] = std::move(r);
        }
    }
    const double t_study =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    const auto its = [&](dp::Variant v) {
        std::string s;
        for (int l : levels)
            s += (s.empty() ? "" : ",") + std::to_string(runs[{v, l}].outer);
        return s;
    };
    const auto all_converged = [&](dp::Variant v) {
        for (int l : levels)
            if (!runs[{v, l}].converged)
                return false;
        return true;
    };

    {
        bool ok = all_converged(dp::Variant::DD) && t_study < 300.0;
        for (std::size_t i = 0; i < levels.size(); ++i) {
            const int it = runs[{dp::Variant::DD, levels[i]}].outer;
            ok = ok && it >= 7 && it <= 14;
            if (i > 0)
                ok = ok && it - runs[{dp::Variant::DD, levels[i - 1]}].outer <= 2;
        }
        report.add(1, ok, "DD outer iterations " + its(dp::Variant::DD) + " (required in [7,14], +<=2 per level); " +
                              fmt("study time %.1f s", t_study));
    }
    for (auto [id, v] : {std::pair{2, dp::Variant::MGD}, std::pair{3, dp::Variant::MGMG}}) {
        bool ok = all_converged(v);
        for (int l : levels)
            ok = ok && std::abs(runs[{v, l}].outer - runs[{dp::Variant::DD, l}].outer) <= 1;
        report.add(id, ok, dp::to_string(v) + " " + its(v) + " vs DD " + its(dp::Variant::DD) + " (+-1)");
    }
    {
        bool ok = all_converged(dp::Variant::MGMGS);
        double worst = 0.0;
        for (int l : levels) {
            const double ratio = static_cast<double>(runs[{dp::Variant::MGMGS, l}].outer) /
                                 runs[{dp::Variant::DD, l}].outer;
            worst = std::max(worst, ratio);
        }
        ok = ok && worst <= 2.0;
        report.add(4, ok, "MGMGS " + its(dp::Variant::MGMGS) + fmt(", max ratio to DD %.2f (<= 2.0)", worst));
    }
    {
        bool ok = all_converged(dp::Variant::MGMG);
        std::string detail;
        const auto& ref = runs[{dp::Variant::MGMG, 3}].stats;
        for (auto [name, pick] : {std::pair{"g~", &dp::SolveStats::gtilde}, std::pair{"basis", &dp::SolveStats::basis},
                                  std::pair{"dual", &dp::SolveStats::dual}}) {
            detail += std::string(detail.empty() ? "" : "; ") + name;
            for (int l : levels) {
                if (l < 3)
                    continue;
                const double avg = (runs[{dp::Variant::MGMG, l}].stats.*pick).average();
                ok = ok && std::abs(avg - (ref.*pick).average()) <= 3.0;
                detail += fmt(" %.1f", avg);
            }
        }
        report.add(5, ok, "MGMG inner averages L3.. (" + detail + "), band +-3");
    }
    {
        double worst = 0.0;
        for (int l : levels) {
            if (l > 4)
                continue;
            const auto& ref = runs[{dp::Variant::DD, l}].u;
            for (auto v : kVariants)
                worst = std::max(worst, max_diff(runs[{v, l}].u, ref) / max_abs(ref));
        }
        const auto toy = geometry::build_quarter_annulus(2, 2, 2, 2);
        const auto mono = oracle::solve_monolithic(toy, f_rhs);
        double worst_mono = 0.0;
        for (auto v : kVariants) {
            dp::SolverConfig cfg;
            cfg.variant = v;
            dp::IetiSolver s(toy, f_rhs, cfg);
            const auto sol = s.solve();
            worst_mono = sol.converged ? std::max(worst_mono, max_diff(sol.u, mono) / max_abs(mono)) : 1.0;
        }
        report.add(6, worst <= 1e-5 && worst_mono <= 1e-5,
                   fmt("max rel. deviation between variants %.2e", worst) +
                       fmt(", vs monolithic on 2x2 toy %.2e (<= 1e-5)", worst_mono));
    }
    {
        double dev_f = 0.0, dev_s = 0.0, dev_g = 0.0;
        for (const auto& mp : {geometry::build_rectangle_grid(2, 1, 2, 2), geometry::build_rectangle_grid(2, 2, 2, 2),
                               geometry::build_quarter_annulus(2, 1, 2, 2), geometry::build_quarter_annulus(2, 2, 2, 2)}) {
            dp::IetiSolver s(mp, f_rhs, {});
            s.setup();
            const auto ref = oracle::dense_dual(s);
            const int m = s.num_multipliers();
            dev_f = std::max(dev_f, rel(oracle::dense_of(m, [&](const Vector& x) { return s.apply_f(x); }), ref.f));
            dev_f = std::max(dev_f, rel(s.rhs_d(), ref.d));
            dev_s = std::max(dev_s, rel(s.basis().s_pipi, oracle::dense_spipi(s)));
            const auto off = oracle::trace_offsets(s.partition());
            for (int k = 0; k < mp.num_patches(); ++k)
                dev_g = std::max(dev_g, rel(s.condensed_rhs()[k], ref.g.segment(off[k], off[k + 1] - off[k])));
        }
        const double dev_saddle = saddle_oracle_deviation();
        report.add(7, dev_f <= 1e-7 && dev_s <= 1e-7 && dev_g <= 1e-7 && dev_saddle <= 1e-8,
                   fmt("F,d %.1e", dev_f) + fmt(", S_PiPi %.1e", dev_s) + fmt(", g~ %.1e (<= 1e-7)", dev_g) +
                       fmt("; SZ/BP vs dense KKT %.1e (<= 1e-8)", dev_saddle));
    }
    {
        Checks check;
        std::mt19937 gen(3);
        // splines
        double pu = 0.0;
        for (int p = 1; p <= 4; ++p) {
            const auto kv = splines::KnotVector::uniform(p, 8);
            std::vector<double> xs;
            for (int i = 0; i < 100; ++i)
                xs.push_back(i / 99.0);
            pu = std::max(pu, splines::partition_of_unity_check(kv, xs));
            const auto fine = splines::dyadic_refine(kv);
            const Vector ones = splines::prolongation_1d(kv, fine) * Vector(Vector::Ones(kv.size()));
            check("prolongation constant reproduction", (ones - Vector::Ones(fine.size())).lpNorm<Eigen::Infinity>() == 0.0);
        }
        check("partition of unity", pu <= 1e-13);
        // multigrid
        double rho = 0.0;
        for (int l = 3; l <= 6; ++l) {
            const auto h = square_hierarchy(l);
            for (int i = 0; i + 1 < h->num_levels(); ++i) {
                const DenseMatrix pap = la::galerkin_product(h->level(i).p, h->level(i + 1).a).to_dense();
                check("Galerkin identity", (pap - h->level(i).a.to_dense()).norm() <= 1e-12 * h->level(i).a.to_dense().norm());
            }
            const Vector x = random_matrix(h->size(), 1, gen), y = random_matrix(h->size(), 1, gen);
            const double xy = x.dot(h->v_cycle({}, y)), yx = y.dot(h->v_cycle({}, x));
            check("V-cycle symmetry", std::abs(xy - yx) <= 1e-10 * std::abs(xy));
            rho = std::max(rho, vcycle_contraction(*h, 10));
        }
        check("V-cycle contraction", rho < 0.5);
        // IETI-DP
        const auto mp = geometry::build_quarter_annulus(4, 3, 2, 2);
        double c_phi = 0.0, orth = 0.0, pou = 0.0, spipi = 0.0, fsym = 0.0, proj = 0.0;
        for (auto v : {dp::Variant::DD, dp::Variant::MGMG}) {
            dp::SolverConfig cfg;
            cfg.variant = v;
            dp::IetiSolver s(mp, f_rhs, cfg);
            s.setup();
            for (int k = 0; k < mp.num_patches(); ++k) {
                const auto& pb = s.basis().phi_bar[k];
                const DenseMatrix c = s.constraint_active(k).to_dense();
                const DenseMatrix kk = s.stiffness(k).to_dense();
                c_phi = std::max(c_phi, (c * pb - DenseMatrix::Identity(c.rows(), c.rows())).norm());
                const DenseMatrix z = oracle::null_space(c);
                orth = std::max(orth, (z.transpose() * kk * pb).norm() / (kk.norm() * pb.norm()));
                if (mp.is_floating(k))
                    pou = std::max(pou, (pb.rowwise().sum() - Vector::Ones(pb.rows())).lpNorm<Eigen::Infinity>());
                const DenseMatrix p = DenseMatrix::Identity(kk.rows(), kk.rows()) - pb * c;
                proj = std::max(proj, (p * p - p).norm() / p.norm());
            }
            spipi = std::max(spipi, rel(s.basis().s_pipi, oracle::dense_spipi(s)));
            const DenseMatrix f = oracle::dense_of(s.num_multipliers(), [&](const Vector& x) { return s.apply_f(x); });
            fsym = std::max(fsym, rel(f, f.transpose()));
        }
        check("C Phi = I", c_phi <= 1e-8);
        check("S-orthogonality", orth <= 1e-7);
        check("sum phi = 1", pou <= 1e-7);
        check("S_PiPi identity", spipi <= 1e-7);
        check("F symmetry", fsym <= 1e-8);
        check("projection idempotence", proj <= 1e-10);
        report.add(8, check.failed.empty(),
                   check.failed.empty()
                       ? fmt("all invariants hold (V-cycle rho %.3f", rho) + fmt(", C Phi %.1e", c_phi) +
                             fmt(", S-orth %.1e", orth) + fmt(", F sym %.1e)", fsym)
                       : "violated: " + check.failed);
    }
    {
        bool ok = true;
        std::string detail;
        for (int p : {1, 2}) {
            exp::ExperimentConfig cfg;
            cfg.degree = p;
            cfg.levels = {1, 2, 3, 4};
            const auto rows = exp::run_convergence(cfg);
            detail += " p=" + std::to_string(p) + ":";
            for (const auto& r : rows) {
                ok = ok && r.converged;
                if (r.level > 1)
                    detail += fmt(" %.2f", r.rate);
            }
            ok = ok && rows[2].rate >= p + 0.7 && rows[3].rate >= p + 0.7;
        }
        report.add(9, ok, "L2 rates (8x4 annulus, levels 1..4)" + detail + " (last two >= p+0.7)");
    }
    {
        // K^ = s MG^{-1} with s calibrated above K: probe x^T K x < x^T K^ x, x = MG y
        long violations = 0;
        int patches = 0;
        for (int l = 2; l <= max_level; ++l) {
            const auto mp = geometry::build_quarter_annulus(8, 4, 2, l);
            for (int k = 0; k < mp.num_patches(); ++k) {
                if (!mp.is_floating(k))
                    continue;
                ++patches;
                const auto& patch = mp.patch(k);
                const auto kfull = assembly::assemble_stiffness(patch.space, *patch.geometry);
                const auto h = std::make_shared<const mg::MgHierarchy>(
                    mg::build_hierarchy(patch.space, kfull, {}, 1e-2, mg::max_levels(patch.space)));
                const auto pc = mg::mg_preconditioner(h, {});
                const auto a = la::LinearOperator::from_matrix(kfull);
                const double s = la::calibrate_spd_order(a, pc, la::OrderDirection::Above, 0.01, 30, 1 + k);
                std::mt19937 gen(static_cast<unsigned>(100 * l + k));
                for (int probe = 0; probe < 100; ++probe) {
                    const Vector y = random_matrix(h->size(), 1, gen);
                    const Vector x = pc * y;
                    if (!(x.dot(kfull * x) < s * y.dot(x)))
                        ++violations;
                }
            }
        }
        long sz_max = 0;
        bool sz_ok = true;
        for (int l : levels) {
            const auto& r = runs[{dp::Variant::MGMG, l}];
            sz_ok = sz_ok && r.converged;
            sz_max = std::max(sz_max, r.stats.basis.max_iterations);
        }
        report.add(10, violations == 0 && sz_ok && sz_max <= 200,
                   std::to_string(violations) + " Rayleigh-probe violations over " + std::to_string(patches) +
                       " floating patches x 100 probes; SZ-PCG max iterations " + std::to_string(sz_max) +
                       " (<= 200)");
    }
    std::printf("total time %.1f s\n",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count());
    return report.blocking() == 0 ? 0 : 1;
}
