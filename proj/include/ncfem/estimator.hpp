#pragma once

#include "ncfem/interpolation.hpp"

#include <numeric>

namespace ncfem {

struct EstimatorReport
{
    std::vector<double> eta_K_sq;
    std::vector<double> eta_E_sq;
    double avg_term_S_sq = 0.0; // NS only
    double osc_sq = 0.0;
    double eta_total = 0.0;
    /// eta_K^2 + 1/2 sum of eta_E^2 over the edges of K
    std::vector<double> marking_indicator;

    double avg_term_S() const { return std::sqrt(avg_term_S_sq); }
};

namespace detail {

inline void finalize(EstimatorReport& rep, const Triangulation& mesh)
{
    const double sk = std::accumulate(rep.eta_K_sq.begin(), rep.eta_K_sq.end(), 0.0);
    const double se = std::accumulate(rep.eta_E_sq.begin(), rep.eta_E_sq.end(), 0.0);
    rep.eta_total = std::sqrt(sk + se);
    rep.marking_indicator = rep.eta_K_sq;
    for (Index t = 0; t < mesh.num_triangles(); ++t)
        for (Index e : mesh.edge_of_triangle[t]) rep.marking_indicator[t] += (mesh.boundary_edge[e] ? 1.0 : 0.5) * rep.eta_E_sq[e];
}

/// ||g||^2_{L2(T)} with a degree-6 rule.
inline double l2_sq(const Triangulation& mesh, Index t, const std::function<double(const Point2&)>& g)
{
    static const TriangleRule rule = quad_triangle(6);
    const auto q = map_rule(mesh, t, rule);
    double s = 0.0;
    for (std::size_t i = 0; i < q.points.size(); ++i) {
        const double v = g(q.points[i]);
        s += q.weights[i] * v * v;
    }
    return s;
}

/// Adjacent triangles of edge e as (plus, minus); minus is -1 on the boundary.
inline std::pair<Index, Index> sides(const Triangulation& mesh, Index e)
{
    const auto& te = mesh.triangles_of_edge[e];
    return {te[0] >= 0 ? te[0] : te[1], te[0] >= 0 ? te[1] : -1};
}

/// Squared L2 norm over edge e of the jump (or boundary trace) of the elementwise field fn(t, x).
template <class Fn>
inline double edge_jump_sq(const FESpace& fe, Index e, Fn&& fn, bool average = false)
{
    static const EdgeRule rule = quad_edge(4);
    const auto& mesh = fe.mesh;
    const auto [kp, km] = sides(mesh, e);
    const Point2& a = mesh.vertices[mesh.edges[e][0]];
    const Point2& b = mesh.vertices[mesh.edges[e][1]];
    double s = 0.0;
    for (std::size_t i = 0; i < rule.points.size(); ++i) {
        const Point2 x = a + rule.points[i] * (b - a);
        double v = fn(kp, x);
        if (km >= 0) v = average ? 0.5 * (v + fn(km, x)) : v - fn(km, x);
        s += rule.weights[i] * v * v;
    }
    return s * fe.geo.edge_length[e];
}

inline void require_morley(const FESpace& fe, const DiscreteFunction& u, int components)
{
    check_compatible(fe, u);
    if (fe.space() != Space::Morley) throw Error("the estimator needs a Morley function");
    if (u.n_components != components) throw Error("the estimator got the wrong number of components");
}

} // namespace detail

/**
 * Residual estimator for the Morley stream-function scheme.
 *
 * eta_K^2 = h_K^4 ||curl(-lap u grad u) - f||^2_K (the curl vanishes for elementwise P2),
 * eta_E^2 = h_E ||[D^2 u] tau||^2_E + h_E^3 ||[lap u grad u] . tau||^2_E + h_E^3 ||{lap u grad u} . tau||^2_E,
 * with the one-sided trace for jumps and averages on boundary edges. S^2 collects the average terms.
 */
inline EstimatorReport estimate_ns_morley(const FESpace& fe, const DiscreteFunction& u, const ScalarFn& f)
{
    detail::require_morley(fe, u, 1);
    const auto& mesh = fe.mesh;
    const auto& geo = fe.geo;
    EstimatorReport rep;
    rep.eta_K_sq.resize(mesh.num_triangles());
    rep.eta_E_sq.resize(mesh.num_edges());

    std::vector<Mat2> hess(mesh.num_triangles());
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
        hess[t] = evaluate(fe, u, t, mesh.centroid(t)).hessian;
        rep.eta_K_sq[t] = std::pow(geo.diameter[t], 4) * detail::l2_sq(mesh, t, [&](const Point2& x) { return f(x); });
    }
    for (Index e = 0; e < mesh.num_edges(); ++e) {
        const Vec2& tau = geo.tangent[e];
        const double he = geo.edge_length[e];
        double jump_d2 = 0.0;
        for (int comp = 0; comp < 2; ++comp)
            jump_d2 += detail::edge_jump_sq(fe, e, [&](Index t, const Point2&) { return (hess[t] * tau)[comp]; });
        auto flux = [&](Index t, const Point2& x) { return hess[t].trace() * evaluate(fe, u, t, x).gradient.dot(tau); };
        const double jump_flux = detail::edge_jump_sq(fe, e, flux);
        const double avg_flux = detail::edge_jump_sq(fe, e, flux, true);
        const double avg = std::pow(he, 3) * avg_flux;
        rep.eta_E_sq[e] = he * jump_d2 + std::pow(he, 3) * jump_flux + avg;
        rep.avg_term_S_sq += avg;
    }
    rep.osc_sq = std::pow(oscillation(mesh, f, 0, 2).total, 2);
    detail::finalize(rep, mesh);
    return rep;
}

/**
 * Residual estimator for the Morley von Karman scheme:
 * eta_K^2 = h_K^4 ||[u,v] + f||^2_K + h_K^4 ||[u,u] - 2g||^2_K,
 * eta_E^2 = h_E ||[D^2 u] tau||^2_E + h_E ||[D^2 v] tau||^2_E.
 */
inline EstimatorReport estimate_vk_morley(const FESpace& fe, const DiscreteFunction& psi, const ScalarFn& f,
                                          const ScalarFn& g = {})
{
    detail::require_morley(fe, psi, 2);
    const auto& mesh = fe.mesh;
    const auto& geo = fe.geo;
    EstimatorReport rep;
    rep.eta_K_sq.resize(mesh.num_triangles());
    rep.eta_E_sq.resize(mesh.num_edges());

    std::vector<Mat2> hu(mesh.num_triangles()), hv(mesh.num_triangles());
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
        const Point2 c = mesh.centroid(t);
        hu[t] = evaluate(fe, psi, t, c, 0).hessian;
        hv[t] = evaluate(fe, psi, t, c, 1).hessian;
        const double uv = bracket(hu[t], hv[t]);
        const double uu = bracket(hu[t], hu[t]);
        const double r1 = detail::l2_sq(mesh, t, [&](const Point2& x) { return uv + f(x); });
        const double r2 = detail::l2_sq(mesh, t, [&](const Point2& x) { return uu - (g ? 2.0 * g(x) : 0.0); });
        rep.eta_K_sq[t] = std::pow(geo.diameter[t], 4) * (r1 + r2);
    }
    for (Index e = 0; e < mesh.num_edges(); ++e) {
        const Vec2& tau = geo.tangent[e];
        double s = 0.0;
        for (const auto* h : {&hu, &hv})
            for (int comp = 0; comp < 2; ++comp)
                s += detail::edge_jump_sq(fe, e, [&](Index t, const Point2&) { return ((*h)[t] * tau)[comp]; });
        rep.eta_E_sq[e] = geo.edge_length[e] * s;
    }
    rep.osc_sq = std::pow(oscillation(mesh, f, 0, 2).total, 2);
    detail::finalize(rep, mesh);
    return rep;
}

/**
 * Refinement indicator for the Crouzeix-Raviart scheme with elementwise-frozen coefficients:
 * eta_K^2 = h_K^2 ||f - gamma u + b . grad u||^2_K,
 * eta_E^2 = h_E ||[(A grad u + u b) . nu]||^2_E (interior) + h_E ||[grad u . tau]||^2_E.
 */
inline EstimatorReport estimate_cr(const FESpace& fe, const DiscreteFunction& u, const ProblemSpec& problem)
{
    check_compatible(fe, u);
    if (fe.space() != Space::CrouzeixRaviart) throw Error("estimate_cr needs a Crouzeix-Raviart function");
    const auto& mesh = fe.mesh;
    const auto& geo = fe.geo;
    EstimatorReport rep;
    rep.eta_K_sq.resize(mesh.num_triangles());
    rep.eta_E_sq.resize(mesh.num_edges());
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
        const Vec2 grad = evaluate(fe, u, t, mesh.centroid(t)).gradient;
        const double r = detail::l2_sq(mesh, t, [&](const Point2& x) {
            return problem.load(x) - problem.reaction(x) * evaluate(fe, u, t, x).value + problem.convection(x).dot(grad);
        });
        rep.eta_K_sq[t] = geo.diameter[t] * geo.diameter[t] * r;
    }
    for (Index e = 0; e < mesh.num_edges(); ++e) {
        const Vec2& nu = geo.normal[e];
        const Vec2& tau = geo.tangent[e];
        auto tangential = [&](Index t, const Point2& x) { return evaluate(fe, u, t, x).gradient.dot(tau); };
        double s = detail::edge_jump_sq(fe, e, tangential);
        if (!mesh.boundary_edge[e]) {
            auto normal_flux = [&](Index t, const Point2& x) {
                const PointValue pv = evaluate(fe, u, t, x);
                return (problem.diffusion(x) * pv.gradient + pv.value * problem.convection(x)).dot(nu);
            };
            s += detail::edge_jump_sq(fe, e, normal_flux);
        }
        rep.eta_E_sq[e] = geo.edge_length[e] * s;
    }
    rep.osc_sq = std::pow(oscillation(mesh, problem.load, 1, 1).total, 2);
    detail::finalize(rep, mesh);
    return rep;
}

struct CrAprioriTerms
{
    double flux_oscillation = 0.0; // ||p - Pi_0 p||, p = A grad u + u b
    double data_oscillation = 0.0; // osc_1(f - gamma u)
};

inline CrAprioriTerms cr_apriori_terms(const Triangulation& mesh, const SmoothField& exact, const ProblemSpec& problem)
{
    auto flux = [&](const Point2& x) {
        return Vec2(problem.diffusion(x) * exact.gradient(x) + exact.value(x) * problem.convection(x));
    };
    CrAprioriTerms out;
    double sum = 0.0;
    for (int comp = 0; comp < 2; ++comp) {
        const ScalarFn pc = [&, comp](const Point2& x) { return flux(x)[comp]; };
        const auto proj = l2_project(mesh, pc, 0);
        for (Index t = 0; t < mesh.num_triangles(); ++t)
            sum += detail::l2_sq(mesh, t, [&](const Point2& x) { return pc(x) - proj.eval(t, x); });
    }
    out.flux_oscillation = std::sqrt(sum);
    out.data_oscillation =
        oscillation(mesh, [&](const Point2& x) { return problem.load(x) - problem.reaction(x) * exact.value(x); }, 1, 1).total;
    return out;
}

/**
 * Greedy bulk marking on the indicators eta_K^2 + 1/2 sum_{E in E(K)} eta_E^2: descending
 * order with ties by ascending index, until the marked sum reaches theta of the total.
 * Returns ascending triangle indices.
 */
inline std::vector<Index> dorfler_mark(const EstimatorReport& report, double theta)
{
    if (!(theta > 0.0 && theta <= 1.0)) throw Error("Dorfler parameter theta must lie in (0, 1]");
    const auto& eta = report.marking_indicator;
    const double total = std::accumulate(eta.begin(), eta.end(), 0.0);
    std::vector<Index> marked;
    if (!(total > 0.0)) return marked;
    std::vector<Index> order(eta.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return eta[a] > eta[b]; });
    double sum = 0.0;
    for (Index t : order) {
        if (eta[t] <= 0.0) break;
        if (theta < 1.0 && sum >= theta * total * (1.0 - 1e-12)) break;
        marked.push_back(t);
        sum += eta[t];
    }
    std::sort(marked.begin(), marked.end());
    return marked;
}

} // namespace ncfem
