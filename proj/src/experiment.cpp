#include "ieti/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "ieti/error.hpp"

namespace ieti::exp {

using nlohmann::json;

void ExperimentConfig::validate() const
{
    if (n_theta < 1 || n_radial < 1)
        throw ValidationError("config: patch counts must be >= 1");
    if (degree < 1)
        throw ValidationError("config: degree must be >= 1");
    if (levels.empty())
        throw ValidationError("config: levels must not be empty");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] < 0)
            throw ValidationError("config: levels must be >= 0");
        if (i > 0 && levels[i] <= levels[i - 1])
            throw ValidationError("config: levels must be increasing");
    }
    if (variants.empty())
        throw ValidationError("config: variants must not be empty");
    solver.validate();
    for (double t : {solver.outer_tol, solver.inner_tol, solver.basis_tol})
        if (t >= 1.0)
            throw ValidationError("config: tolerances must lie in (0, 1)");
}

ExperimentConfig parse_config(const std::string& json_text)
{
    ExperimentConfig cfg;
    try {
        const json j = json::parse(json_text);
        if (j.contains("domain")) {
            const auto& d = j.at("domain");
            if (d.contains("patches")) {
                const auto p = d.at("patches").get<std::vector<int>>();
                if (p.size() != 2)
                    throw ValidationError("config: domain.patches must be [n_theta, n_radial]");
                cfg.n_theta = p[0];
                cfg.n_radial = p[1];
            }
            cfg.degree = d.value("degree", cfg.degree);
            if (d.contains("levels"))
                cfg.levels = d.at("levels").get<std::vector<int>>();
        }
        if (j.contains("variants")) {
            cfg.variants.clear();
            for (const auto& v : j.at("variants"))
                cfg.variants.push_back(dp::parse_variant(v.get<std::string>()));
        }
        if (j.contains("tolerances")) {
            const auto& t = j.at("tolerances");
            cfg.solver.outer_tol = t.value("outer", cfg.solver.outer_tol);
            cfg.solver.basis_tol = t.value("basis", cfg.solver.basis_tol);
            cfg.solver.inner_tol = t.value("inner", cfg.solver.inner_tol);
        }
        if (j.contains("rhs")) {
            const auto r = j.at("rhs").get<std::string>();
            if (r == "manufactured")
                cfg.rhs = RhsKind::Manufactured;
            else if (r == "constant")
                cfg.rhs = RhsKind::Constant;
            else
                throw ValidationError("config: rhs must be 'manufactured' or 'constant'");
        }
        if (j.contains("output")) {
            cfg.csv_path = j.at("output").value("csv", "");
            cfg.json_path = j.at("output").value("json", "");
        }
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    cfg.solver.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

assembly::ScalarField rhs_field(RhsKind kind)
{
    if (kind == RhsKind::Constant)
        return [](const geometry::Point&) { return 1.0; };
    return [ms = assembly::ManufacturedSolution{}](const geometry::Point& x) { return ms.f(x); };
}

} // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    std::vector<RunRecord> rows;
    const auto f = rhs_field(cfg.rhs);
    for (int level : cfg.levels) {
        for (auto variant : cfg.variants) {
            RunRecord rec;
            rec.variant = dp::to_string(variant);
            rec.level = level;
            try {
                auto mp = geometry::build_quarter_annulus(cfg.n_theta, cfg.n_radial, cfg.degree, level);
                rec.dofs = static_cast<long>(mp.total_dofs());
                auto sc = cfg.solver;
                sc.variant = variant;
                sc.seed = cfg.seed;
                dp::IetiSolver solver(std::move(mp), f, sc);
                const auto sol = solver.solve();
                rec.outer_it = sol.stats.outer.iterations;
                rec.inner_it_gtilde = sol.stats.gtilde.average();
                rec.inner_it_basis = sol.stats.basis.average();
                rec.inner_it_dual = sol.stats.dual.average();
                rec.t_assembly_s = sol.stats.t_assembly;
                rec.t_setup_s = sol.stats.t_setup;
                rec.t_solve_s = sol.stats.t_solve;
                rec.residual = sol.stats.outer.relative_residual;
                rec.converged = sol.converged;
                rec.failed_stage = sol.failed_stage;
            } catch (const Error&) {
                rec.converged = false;
                rec.failed_stage = "setup";
            }
            rows.push_back(rec);
        }
    }
    return rows;
}

namespace {

const char* kHeader = "variant,level,dofs,outer_it,inner_it_gtilde,inner_it_basis,inner_it_dual,"
                      "t_assembly_s,t_setup_s,t_solve_s,residual,converged,failed_stage";

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, sep))
        out.push_back(cell);
    if (!line.empty() && line.back() == sep)
        out.emplace_back();
    return out;
}

} // namespace

void write_csv(std::ostream& os, const std::vector<RunRecord>& rows)
{
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << kHeader << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : rows) {
        os << r.variant << ',' << r.level << ',' << r.dofs << ',' << r.outer_it << ','
           << r.inner_it_gtilde << ',' << r.inner_it_basis << ',' << r.inner_it_dual << ','
           << r.t_assembly_s << ',' << r.t_setup_s << ',' << r.t_solve_s << ',' << r.residual << ','
           << (r.converged ? 1 : 0) << ',' << r.failed_stage << '\n';
    }
    os.flags(flags);
    os.precision(prec);
}

std::vector<RunRecord> read_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != kHeader)
        throw ValidationError("read_csv: unexpected header");
    std::vector<RunRecord> rows;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const auto c = split(line, ',');
        if (c.size() != 13)
            throw ValidationError("read_csv: expected 13 columns in '" + line + "'");
        try {
            RunRecord r;
            r.variant = c[0];
            r.level = std::stoi(c[1]);
            r.dofs = std::stol(c[2]);
            r.outer_it = std::stoi(c[3]);
            r.inner_it_gtilde = std::stod(c[4]);
            r.inner_it_basis = std::stod(c[5]);
            r.inner_it_dual = std::stod(c[6]);
            r.t_assembly_s = std::stod(c[7]);
            r.t_setup_s = std::stod(c[8]);
            r.t_solve_s = std::stod(c[9]);
            r.residual = std::stod(c[10]);
            r.converged = c[11] == "1";
            r.failed_stage = c[12];
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ValidationError("read_csv: malformed row '" + line + "'");
        }
    }
    return rows;
}

std::string to_json(const std::vector<RunRecord>& rows)
{
    json arr = json::array();
    for (const auto& r : rows) {
        arr.push_back({{"variant", r.variant},
                       {"level", r.level},
                       {"dofs", r.dofs},
                       {"outer_it", r.outer_it},
                       {"inner_it_gtilde", r.inner_it_gtilde},
                       {"inner_it_basis", r.inner_it_basis},
                       {"inner_it_dual", r.inner_it_dual},
                       {"t_assembly_s", r.t_assembly_s},
                       {"t_setup_s", r.t_setup_s},
                       {"t_solve_s", r.t_solve_s},
                       {"residual", r.residual},
                       {"converged", r.converged},
                       {"failed_stage", r.failed_stage}});
    }
    return arr.dump(2);
}

void write_outputs(const ExperimentConfig& cfg, const std::vector<RunRecord>& rows)
{
    if (!cfg.csv_path.empty()) {
        std::ofstream out(cfg.csv_path);
        if (!out)
            throw ValidationError("cannot write '" + cfg.csv_path + "'");
        write_csv(out, rows);
    }
    if (!cfg.json_path.empty()) {
        std::ofstream out(cfg.json_path);
        if (!out)
            throw ValidationError("cannot write '" + cfg.json_path + "'");
        out << to_json(rows) << '\n';
    }
}

std::vector<ConvergenceRow> run_convergence(const ExperimentConfig& cfg)
{
    cfg.validate();
    if (cfg.rhs != RhsKind::Manufactured)
        throw ValidationError("run_convergence needs the manufactured right-hand side");
    const assembly::ManufacturedSolution ms;
    const auto f = [ms](const geometry::Point& x) { return ms.f(x); };
    const auto u = [ms](const geometry::Point& x) { return ms.u(x); };
    std::vector<ConvergenceRow> rows;
    for (int level : cfg.levels) {
        ConvergenceRow row;
        row.level = level;
        row.h = std::ldexp(1.0, -level);
        auto sc = cfg.solver;
        sc.variant = dp::Variant::DD;
        sc.seed = cfg.seed;
        dp::IetiSolver solver(geometry::build_quarter_annulus(cfg.n_theta, cfg.n_radial, cfg.degree, level),
                              f, sc);
        const auto sol = solver.solve();
        row.converged = sol.converged;
        if (sol.converged) {
            row.l2_error = dp::l2_error(solver.multipatch(), sol.u, u);
            if (!rows.empty() && rows.back().converged && rows.back().l2_error > 0.0)
                row.rate = std::log2(rows.back().l2_error / row.l2_error) /
                           (row.level - rows.back().level);
        }
        rows.push_back(row);
    }
    return rows;
}

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows)
{
    const auto prec = os.precision();
    os << "level,h,l2_error,rate,converged\n" << std::setprecision(10);
    for (const auto& r : rows)
        os << r.level << ',' << r.h << ',' << r.l2_error << ',' << r.rate << ','
           << (r.converged ? 1 : 0) << '\n';
    os.precision(prec);
}

} // namespace ieti::exp
