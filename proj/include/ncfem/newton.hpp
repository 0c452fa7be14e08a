#pragma once

#include "ncfem/linalg.hpp"

#include <random>

namespace ncfem {

struct NewtonStep
{
    double residual_dual_norm = 0.0; // after the update
    double correction_norm = 0.0;
    double quadratic_ratio = std::numeric_limits<double>::quiet_NaN(); // |d_k| / |d_{k-1}|^2
};

struct NewtonTrace
{
    double initial_residual = 0.0;
    std::vector<NewtonStep> steps;
    bool converged = false;
    int iterations = 0;
};

struct NewtonResult
{
    DiscreteFunction solution;
    NewtonTrace trace;
};

/// Undamped Newton iteration; stops once the correction norm or the residual dual norm drops to tol.
inline NewtonResult newton_solve(const Assembler& as, DiscreteFunction u0, double tol = 1e-10, int max_iter = 20)
{
    if (!(tol > 0.0)) throw Error("Newton tolerance must be positive");
    if (max_iter < 1) throw Error("max_iter must be at least 1");
    const EnergyNorm energy(as.energy_gram());
    NewtonResult out{std::move(u0), {}};
    auto& u = out.solution;
    auto& trace = out.trace;

    Eigen::VectorXd r = as.residual(u);
    trace.initial_residual = energy.dual_norm(r);
    if (trace.initial_residual <= tol) {
        trace.converged = true;
        return out;
    }
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k < max_iter; ++k) {
        const LinearSolver lu(as.jacobian(u));
        const Eigen::VectorXd d = -lu.solve(r);
        u.coeffs += d;
        r = as.residual(u);
        NewtonStep step;
        step.correction_norm = energy.norm(d);
        step.residual_dual_norm = energy.dual_norm(r);
        if (k > 0) step.quadratic_ratio = step.correction_norm / (previous * previous);
        previous = step.correction_norm;
        trace.steps.push_back(step);
        trace.iterations = k + 1;
        if (!std::isfinite(step.correction_norm) || !std::isfinite(step.residual_dual_norm)) return out;
        if (step.correction_norm <= tol || step.residual_dual_norm <= tol) {
            trace.converged = true;
            return out;
        }
    }
    return out;
}

inline NewtonResult newton_solve(const FESpace& fe, const ProblemSpec& problem, DiscreteFunction u0, double tol = 1e-10,
                                 int max_iter = 20)
{
    return newton_solve(Assembler(fe, problem), std::move(u0), tol, max_iter);
}

/**
 * Sampled lower bound for sup |Gamma_pw(x,y,z)| / (|x| |y| |z|) in the energy norm.
 *
 * Random Gaussian triples, then alternating exact maximization over one argument at a time
 * starting from the best samples.
 */
inline double gamma_norm_estimate(const Assembler& as, const EnergyNorm& energy, int samples = 1000,
                                  std::uint64_t seed = 1, int starts = 3, int sweeps = 30)
{
    if (!is_fourth_order(as.problem().kind)) return 0.0;
    const Index n = as.n_unknowns();
    const int nc = as.n_components();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    auto random_function = [&] {
        DiscreteFunction f = DiscreteFunction::zero(as.space(), nc);
        for (Index i = 0; i < n; ++i) f.coeffs[i] = normal(rng);
        f.coeffs /= energy.norm(f.coeffs);
        return f;
    };

    struct Triple
    {
        double ratio;
        std::array<DiscreteFunction, 3> f;
    };
    std::vector<Triple> best;
    for (int s = 0; s < samples; ++s) {
        Triple t{0.0, {random_function(), random_function(), random_function()}};
        t.ratio = std::abs(as.gamma(t.f[0], t.f[1], t.f[2]));
        best.push_back(std::move(t));
        std::sort(best.begin(), best.end(), [](const Triple& a, const Triple& b) { return a.ratio > b.ratio; });
        if (static_cast<int>(best.size()) > starts) best.pop_back();
    }

    double estimate = best.empty() ? 0.0 : best.front().ratio;
    for (auto& t : best) {
        double value = t.ratio;
        for (int sweep = 0; sweep < sweeps; ++sweep) {
            const double before = value;
            for (int slot = 0; slot < 3; ++slot) {
                const auto& p = t.f[slot == 0 ? 1 : 0];
                const auto& q = t.f[slot == 2 ? 1 : 2];
                const Eigen::VectorXd g = as.gamma_partial(slot, p, q);
                const Eigen::VectorXd x = energy.riesz(g);
                const double nx = std::sqrt(std::max(0.0, g.dot(x)));
                if (nx <= 0.0) continue;
                t.f[slot].coeffs = x / nx;
                value = nx;
            }
            if (value - before <= 1e-10 * value) break;
        }
        estimate = std::max(estimate, value);
    }
    return estimate;
}

struct KantorovichReport
{
    double beta0 = 0.0;
    double delta = 0.0;
    double gamma_norm_estimate = 0.0; // lower bound
    double m = 0.0;
    double h = 0.0;
    double r_minus = std::numeric_limits<double>::quiet_NaN();
    double rho = std::numeric_limits<double>::quiet_NaN();
    bool condition_met = false;
};

/**
 * Kantorovich quantities at the initial iterate u0:
 * beta0 = smallest singular value of DN_h(u0) in the energy norms, delta = |DN_h(u0)^{-1} N_h(u0)|,
 * m = 2 |Gamma| / beta0, h = delta m, r_minus = (1 - sqrt(1 - 2h)) / m - delta,
 * rho = (1 + sqrt(1 - 2h)) / m. For Gamma = 0: h = 0, r_minus = 0, rho = +inf.
 */
inline KantorovichReport kantorovich_report(const Assembler& as, const DiscreteFunction& u0, int samples = 1000,
                                            std::uint64_t seed = 1)
{
    const SparseMatrix gram = as.energy_gram();
    const EnergyNorm energy(gram);
    const SparseMatrix jac = as.jacobian(u0);
    const LinearSolver lu(jac);

    KantorovichReport rep;
    rep.beta0 = infsup_constant(SparseMatrix(jac.transpose()), gram, gram);
    rep.delta = energy.norm(lu.solve(as.residual(u0)));
    rep.gamma_norm_estimate = gamma_norm_estimate(as, energy, samples, seed);
    if (rep.beta0 <= 0.0) throw SingularMatrixError("Jacobian has a zero singular value");
    rep.m = 2.0 * rep.gamma_norm_estimate / rep.beta0;
    rep.condition_met = 4.0 * rep.delta * rep.gamma_norm_estimate < rep.beta0;
    if (rep.m == 0.0) {
        rep.h = 0.0;
        rep.r_minus = 0.0;
        rep.rho = std::numeric_limits<double>::infinity();
        return rep;
    }
    rep.h = rep.delta * rep.m;
    if (rep.h <= 0.5) {
        const double s = std::sqrt(1.0 - 2.0 * rep.h);
        // (1 - s) / m = 2 delta / (1 + s), free of cancellation
        rep.r_minus = rep.delta * (1.0 - s) / (1.0 + s);
        rep.rho = (1.0 + s) / rep.m;
    }
    return rep;
}

inline KantorovichReport kantorovich_report(const FESpace& fe, const ProblemSpec& problem, const DiscreteFunction& u0)
{
    return kantorovich_report(Assembler(fe, problem), u0);
}

} // namespace ncfem
