#pragma once

#include "ncfem/estimator.hpp"
#include "ncfem/newton.hpp"
#include "ncfem/refine.hpp"

#include <optional>

namespace ncfem {

struct ConvergenceRecord
{
    int level = 0;
    Index n_free = 0;
    double h_max = 0.0;
    double error_pw = std::numeric_limits<double>::quiet_NaN();
    double eta_total = 0.0;
    int newton_iters = 0;
    double rate_error = std::numeric_limits<double>::quiet_NaN();
    double rate_eta = std::numeric_limits<double>::quiet_NaN();
};

/// Everything computed on one level; handed to observers.
struct LevelResult
{
    int level = 0;
    const FESpace* space = nullptr;
    DiscreteFunction solution;
    NewtonTrace trace;
    EstimatorReport report;
    double error_pw = std::numeric_limits<double>::quiet_NaN();
    std::optional<KantorovichReport> kantorovich;
};

using LevelObserver = std::function<void(const LevelResult&)>;

struct StudyResult
{
    std::vector<ConvergenceRecord> records;
    bool completed = true;
    std::string message;
};

inline Space space_for(ProblemKind kind) { return is_fourth_order(kind) ? Space::Morley : Space::CrouzeixRaviart; }

/// Dispatch to the estimator of the problem family.
inline EstimatorReport estimate(const FESpace& fe, const DiscreteFunction& u, const ProblemSpec& problem)
{
    switch (problem.kind) {
    case ProblemKind::NavierStokesMorley: return estimate_ns_morley(fe, u, problem.load);
    case ProblemKind::VonKarmanMorley: return estimate_vk_morley(fe, u, problem.load, problem.second_load);
    case ProblemKind::SecondOrderCR: return estimate_cr(fe, u, problem);
    }
    throw Error("unknown problem kind");
}

/// Broken energy error over all components; NaN without an exact solution.
inline double energy_error(const FESpace& fe, const DiscreteFunction& u, const Manufactured& m)
{
    if (!m.exact) return std::numeric_limits<double>::quiet_NaN();
    double e = std::pow(broken_energy_error(fe, u, *m.exact, 0), 2);
    if (u.n_components == 2) {
        if (!m.exact_second) return std::numeric_limits<double>::quiet_NaN();
        e += std::pow(broken_energy_error(fe, u, *m.exact_second, 1), 2);
    }
    return std::sqrt(e);
}

/// Observed rates log(e_{k-1}/e_k) / log(h_{k-1}/h_k) with h = h_max, or n_free^{-1/2} when h_max is unchanged.
inline void fill_rates(std::vector<ConvergenceRecord>& records)
{
    for (std::size_t k = 1; k < records.size(); ++k) {
        const auto& a = records[k - 1];
        auto& b = records[k];
        double dh = std::log(a.h_max / b.h_max);
        if (std::abs(dh) < 1e-12) dh = 0.5 * std::log(static_cast<double>(b.n_free) / static_cast<double>(a.n_free));
        auto rate = [&](double ea, double eb) {
            if (!(ea > 0.0 && eb > 0.0) || dh == 0.0) return std::numeric_limits<double>::quiet_NaN();
            return std::log(ea / eb) / dh;
        };
        b.rate_error = rate(a.error_pw, b.error_pw);
        b.rate_eta = rate(a.eta_total, b.eta_total);
    }
}

struct SolveOptions
{
    double tol = 1e-10;
    int max_iter = 20;
    bool kantorovich = false;
    std::uint64_t seed = 1;
};

namespace detail {

/// SOLVE and ESTIMATE on one mesh; returns false on Newton failure.
inline bool solve_level(const Manufactured& m, const FESpace& fe, DiscreteFunction u0, int level, const SolveOptions& opt,
                        LevelResult& out)
{
    const Assembler as(fe, m.problem);
    out = LevelResult{};
    out.level = level;
    out.space = &fe;
    if (opt.kantorovich) out.kantorovich = kantorovich_report(as, u0, 1000, opt.seed);
    auto res = newton_solve(as, std::move(u0), opt.tol, opt.max_iter);
    out.solution = std::move(res.solution);
    out.trace = res.trace;
    if (!out.trace.converged) return false;
    out.report = estimate(fe, out.solution, m.problem);
    out.error_pw = energy_error(fe, out.solution, m);
    return true;
}

inline ConvergenceRecord to_record(const LevelResult& r)
{
    ConvergenceRecord rec;
    rec.level = r.level;
    rec.n_free = r.space->n_free();
    rec.h_max = r.space->geo.h_max;
    rec.error_pw = r.error_pw;
    rec.eta_total = r.report.eta_total;
    rec.newton_iters = r.trace.iterations;
    return rec;
}

} // namespace detail

/**
 * Uniform refinement study with levels numbered 1, ..., levels. Level k is mesh0 uniformly
 * refined initial_refinements + k - 1 times. Each level starts Newton from the previous solution
 * transferred to the refined mesh (zero on level 1).
 */
inline StudyResult run_uniform_study(const Manufactured& m, Triangulation mesh0, int initial_refinements, int levels,
                                     const SolveOptions& opt = {}, const LevelObserver& observer = {})
{
    if (levels < 1) throw Error("levels must be at least 1");
    if (initial_refinements < 0) throw Error("initial_refinements must be nonnegative");
    const Space sp = space_for(m.problem.kind);
    const int nc = components(m.problem.kind);
    Triangulation mesh = std::move(mesh0);
    for (int l = 0; l < initial_refinements; ++l) mesh = uniform_refine(mesh);

    StudyResult out;
    auto fe = std::make_unique<FESpace>(make_space(mesh, sp));
    DiscreteFunction u0 = DiscreteFunction::zero(*fe, nc);
    for (int k = 0; k < levels; ++k) {
        LevelResult res;
        const bool ok = detail::solve_level(m, *fe, std::move(u0), k + 1, opt, res);
        if (!ok) {
            out.completed = false;
            out.message = "Newton did not converge on level " + std::to_string(k + 1);
            break;
        }
        out.records.push_back(detail::to_record(res));
        if (observer) observer(res);
        if (k + 1 == levels) break;
        auto ref = uniform_refine_with_parents(fe->mesh);
        auto fine = std::make_unique<FESpace>(make_space(std::move(ref.mesh), sp));
        u0 = transfer(*fe, res.solution, *fine, ref.parent);
        fe = std::move(fine);
    }
    fill_rates(out.records);
    return out;
}

struct AfemOptions
{
    double theta = 0.5;
    Index max_free_dofs = 10000;
    int max_levels = 100;
    SolveOptions solve;
};

/// SOLVE, ESTIMATE, MARK, REFINE until n_free exceeds max_free_dofs.
inline StudyResult afem_loop(const Manufactured& m, Triangulation mesh0, const AfemOptions& opt = {},
                             const LevelObserver& observer = {})
{
    if (!(opt.theta > 0.0 && opt.theta <= 1.0)) throw Error("Dorfler parameter theta must lie in (0, 1]");
    const Space sp = space_for(m.problem.kind);
    const int nc = components(m.problem.kind);
    StudyResult out;
    auto fe = std::make_unique<FESpace>(make_space(std::move(mesh0), sp));
    DiscreteFunction u0 = DiscreteFunction::zero(*fe, nc);
    for (int level = 0; level < opt.max_levels; ++level) {
        LevelResult res;
        if (!detail::solve_level(m, *fe, std::move(u0), level, opt.solve, res)) {
            out.completed = false;
            out.message = "Newton did not converge on level " + std::to_string(level);
            break;
        }
        out.records.push_back(detail::to_record(res));
        if (observer) observer(res);
        if (fe->n_free() > opt.max_free_dofs) break;
        const auto marked = dorfler_mark(res.report, opt.theta);
        auto ref = bisect_with_parents(fe->mesh, marked.empty() ? all_triangles(fe->mesh) : marked);
        auto fine = std::make_unique<FESpace>(make_space(std::move(ref.mesh), sp));
        u0 = transfer(*fe, res.solution, *fine, ref.parent);
        fe = std::move(fine);
    }
    fill_rates(out.records);
    return out;
}

/// Fraction of triangles whose closure meets the closed disc of radius r around c.
inline double fraction_near(const Triangulation& mesh, const Point2& c, double r)
{
    if (mesh.num_triangles() == 0) return 0.0;
    auto seg_dist = [](const Point2& p, const Point2& a, const Point2& b) {
        const Vec2 d = b - a;
        const double s = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
        return (p - (a + s * d)).norm();
    };
    Index count = 0;
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.triangles[t];
        const Point2 &a = mesh.vertices[v[0]], &b = mesh.vertices[v[1]], &d = mesh.vertices[v[2]];
        const bool inside = cross2(b - a, c - a) >= 0 && cross2(d - b, c - b) >= 0 && cross2(a - d, c - d) >= 0;
        const double dist = inside ? 0.0 : std::min({seg_dist(c, a, b), seg_dist(c, b, d), seg_dist(c, d, a)});
        if (dist <= r) ++count;
    }
    return static_cast<double>(count) / mesh.num_triangles();
}

} // namespace ncfem
