#include "ncfem/ncfem.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace ncfem;

struct Overrides
{
    std::string command;
    std::string config;
    std::optional<std::string> problem, domain, out;
    std::optional<int> levels, initial_refinements;
    std::optional<double> theta, tol;
    std::optional<Index> max_free_dofs;
    std::optional<std::uint64_t> seed;
    bool perturb_jacobian = false;
};

RunConfig resolve(const Overrides& o)
{
    RunConfig cfg;
    if (!o.config.empty()) read_config_file(o.config, cfg);
    auto c = parse_command(o.command);
    if (!c) throw UsageError("unknown command '" + o.command + "'");
    cfg.command = *c;
    if (o.problem) cfg.problem = *o.problem;
    if (o.domain) cfg.domain = *o.domain;
    if (o.out) cfg.output_dir = *o.out;
    if (o.levels) cfg.levels = *o.levels;
    if (o.initial_refinements) cfg.initial_refinements = *o.initial_refinements;
    if (o.theta) cfg.theta = *o.theta;
    if (o.tol) cfg.tol = *o.tol;
    if (o.max_free_dofs) cfg.max_free_dofs = *o.max_free_dofs;
    if (o.seed) cfg.seed = *o.seed;
    cfg.perturb_jacobian = o.perturb_jacobian;
    cfg.validate();

    const auto names = registry_names();
    if (std::find(names.begin(), names.end(), cfg.problem) == names.end()) {
        std::string list;
        for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
        throw UsageError("unknown problem '" + cfg.problem + "'; available: " + list);
    }
    return cfg;
}

Triangulation initial_mesh(const RunConfig& cfg, const Manufactured& m)
{
    Triangulation mesh = load_domain(cfg.domain.empty() ? m.default_domain : cfg.domain);
    return mesh;
}

std::string fmt(double v, const char* spec = "%.6e")
{
    if (std::isnan(v)) return "-";
    char buf[40];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void print_records(const std::vector<ConvergenceRecord>& records)
{
    std::printf("%5s %9s %12s %12s %12s %6s %8s %8s\n", "level", "n_free", "h_max", "error_pw", "eta_total", "newton",
                "rate_e", "rate_eta");
    for (const auto& r : records)
        std::printf("%5d %9d %12s %12s %12s %6d %8s %8s\n", r.level, r.n_free, fmt(r.h_max).c_str(), fmt(r.error_pw).c_str(),
                    fmt(r.eta_total).c_str(), r.newton_iters, fmt(r.rate_error, "%.3f").c_str(), fmt(r.rate_eta, "%.3f").c_str());
}

void write_outputs(const RunConfig& cfg, const std::vector<ConvergenceRecord>& records, const std::string& stem)
{
    std::filesystem::create_directories(cfg.output_dir);
    const auto csv = std::filesystem::path(cfg.output_dir) / (stem + ".csv");
    std::ofstream out(csv);
    if (!out) throw Error("cannot write " + csv.string());
    write_csv(out, records);
    emit_plots(records, cfg.output_dir, stem + ".svg");
    std::cout << "wrote " << csv.string() << "\n";
}

int run_solve(const RunConfig& cfg, const Manufactured& m)
{
    Triangulation mesh = initial_mesh(cfg, m);
    for (int l = 0; l < cfg.initial_refinements; ++l) mesh = uniform_refine(mesh);
    const FESpace fe = make_space(std::move(mesh), space_for(m.problem.kind));
    const Assembler as(fe, m.problem);
    const auto u0 = DiscreteFunction::zero(fe, components(m.problem.kind));
    const auto k = kantorovich_report(as, u0, 1000, cfg.seed);
    std::printf("kantorovich: beta0=%s delta=%s gamma>=%s m=%s h=%s r_minus=%s rho=%s condition_met=%d\n",
                fmt(k.beta0).c_str(), fmt(k.delta).c_str(), fmt(k.gamma_norm_estimate).c_str(), fmt(k.m).c_str(),
                fmt(k.h).c_str(), fmt(k.r_minus).c_str(), fmt(k.rho).c_str(), k.condition_met ? 1 : 0);
    const auto res = newton_solve(as, u0, cfg.tol);
    std::printf("%4s %14s %14s %14s\n", "iter", "residual", "correction", "ratio");
    for (std::size_t i = 0; i < res.trace.steps.size(); ++i) {
        const auto& s = res.trace.steps[i];
        std::printf("%4zu %14s %14s %14s\n", i + 1, fmt(s.residual_dual_norm).c_str(), fmt(s.correction_norm).c_str(),
                    fmt(s.quadratic_ratio).c_str());
    }
    if (!res.trace.converged) {
        std::cerr << "error: Newton did not converge\n";
        return 1;
    }
    const auto rep = estimate(fe, res.solution, m.problem);
    ConvergenceRecord rec;
    rec.level = 1;
    rec.n_free = fe.n_free();
    rec.h_max = fe.geo.h_max;
    rec.error_pw = energy_error(fe, res.solution, m);
    rec.eta_total = rep.eta_total;
    rec.newton_iters = res.trace.iterations;
    std::printf("S=%s osc=%s\n", fmt(rep.avg_term_S()).c_str(), fmt(std::sqrt(rep.osc_sq)).c_str());
    print_records({rec});
    write_outputs(cfg, {rec}, "solve");
    return 0;
}

int run_study_command(const RunConfig& cfg, const Manufactured& m)
{
    SolveOptions opt;
    opt.tol = cfg.tol;
    opt.seed = cfg.seed;
    const auto res = run_uniform_study(m, initial_mesh(cfg, m), cfg.initial_refinements, cfg.levels, opt);
    print_records(res.records);
    write_outputs(cfg, res.records, "study");
    if (!res.completed) {
        std::cerr << "error: " << res.message << "\n";
        return 1;
    }
    return 0;
}

int run_afem_command(const RunConfig& cfg, const Manufactured& m)
{
    AfemOptions opt;
    opt.theta = cfg.theta;
    opt.max_free_dofs = cfg.max_free_dofs;
    opt.solve.tol = cfg.tol;
    opt.solve.seed = cfg.seed;
    Triangulation mesh = initial_mesh(cfg, m);
    for (int l = 0; l < cfg.initial_refinements; ++l) mesh = uniform_refine(mesh);
    const auto res = afem_loop(m, std::move(mesh), opt);
    print_records(res.records);
    write_outputs(cfg, res.records, "afem");
    if (!res.completed) {
        std::cerr << "error: " << res.message << "\n";
        return 1;
    }
    return 0;
}

int run_infsup_command(const RunConfig& cfg, const Manufactured& m)
{
    Triangulation mesh = initial_mesh(cfg, m);
    for (int l = 0; l < cfg.initial_refinements; ++l) mesh = uniform_refine(mesh);
    std::filesystem::create_directories(cfg.output_dir);
    const auto path = std::filesystem::path(cfg.output_dir) / "infsup.csv";
    std::ofstream csv(path);
    csv << "level,n_free,h_max,beta\n";
    std::printf("%5s %9s %12s %14s\n", "level", "n_free", "h_max", "beta");
    for (int k = 1; k <= cfg.levels; ++k) {
        const FESpace fe = make_space(mesh, space_for(m.problem.kind));
        const Assembler as(fe, m.problem);
        const SparseMatrix gram = as.energy_gram();
        DiscreteFunction u = DiscreteFunction::zero(fe, as.n_components());
        if (is_fourth_order(m.problem.kind)) {
            auto res = newton_solve(as, u, cfg.tol);
            if (!res.trace.converged) {
                std::cerr << "error: Newton did not converge on level " << k << "\n";
                return 1;
            }
            u = std::move(res.solution);
        }
        const SparseMatrix jac = as.jacobian(u);
        const double beta = infsup_constant(SparseMatrix(jac.transpose()), gram, gram);
        std::printf("%5d %9d %12s %14s\n", k, fe.n_free(), fmt(fe.geo.h_max).c_str(), fmt(beta).c_str());
        csv << k << ',' << fe.n_free() << ',' << detail::csv_number(fe.geo.h_max) << ',' << detail::csv_number(beta) << '\n';
        if (k < cfg.levels) mesh = uniform_refine(mesh);
    }
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int run_verify_command(const RunConfig& cfg, const Manufactured& m)
{
    Triangulation mesh = initial_mesh(cfg, m);
    for (int l = 0; l < cfg.initial_refinements; ++l) mesh = uniform_refine(mesh);
    const auto checks = run_identity_suite(mesh, cfg.seed, cfg.perturb_jacobian);
    bool ok = true;
    for (const auto& c : checks) {
        std::printf("%-36s defect=%-12s threshold=%-8s %s\n", c.name.c_str(), fmt(c.defect, "%.3e").c_str(),
                    fmt(c.threshold, "%.0e").c_str(), c.passed() ? "PASS" : "FAIL");
        ok = ok && c.passed();
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Nonconforming finite element solver for Navier-Stokes (stream function), von Karman and "
                 "indefinite second-order problems"};
    Overrides o;
    app.add_option("command", o.command, "solve | afem | study | infsup | verify")->required();
    app.add_option("--config", o.config, "key=value configuration file");
    app.add_option("--problem", o.problem, "registry problem name");
    app.add_option("--domain", o.domain, "unit_square, l_shape or a mesh file");
    app.add_option("--levels", o.levels, "number of levels");
    app.add_option("--initial-refinements", o.initial_refinements, "uniform refinements before the first level");
    app.add_option("--theta", o.theta, "Dorfler bulk parameter");
    app.add_option("--tol", o.tol, "Newton tolerance");
    app.add_option("--max-free-dofs", o.max_free_dofs, "AFEM stopping size");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--seed", o.seed, "seed for randomized checks");
    app.add_flag("--perturb-jacobian", o.perturb_jacobian, "corrupt one Jacobian entry in the finite-difference check")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    RunConfig cfg;
    Manufactured m;
    try {
        cfg = resolve(o);
        m = manufactured(cfg.problem);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        switch (cfg.command) {
        case Command::Solve: return run_solve(cfg, m);
        case Command::Study: return run_study_command(cfg, m);
        case Command::Afem: return run_afem_command(cfg, m);
        case Command::Infsup: return run_infsup_command(cfg, m);
        case Command::Verify: return run_verify_command(cfg, m);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const MeshError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
