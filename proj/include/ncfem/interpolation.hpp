#pragma once

#include "ncfem/problem.hpp"
#include "ncfem/space.hpp"

namespace ncfem {

namespace detail {

inline double edge_mean(const Point2& a, const Point2& b, const std::function<double(const Point2&)>& g)
{
    static const EdgeRule rule = quad_edge(9);
    double mean = 0.0;
    for (std::size_t k = 0; k < rule.points.size(); ++k) mean += rule.weights[k] * g(a + rule.points[k] * (b - a));
    return mean;
}

} // namespace detail

/// All six Morley dof values of v on triangle t, boundary dofs included.
inline Eigen::Matrix<double, 6, 1> morley_local_dofs(const FESpace& fe, const SmoothField& v, Index t)
{
    Eigen::Matrix<double, 6, 1> d;
    const auto& mesh = fe.mesh;
    for (int i = 0; i < 3; ++i) {
        d[i] = v.value(mesh.vertices[mesh.triangles[t][i]]);
        const Index e = mesh.edge_of_triangle[t][i];
        const Vec2 nu = fe.geo.normal[e];
        d[3 + i] = detail::edge_mean(mesh.vertices[mesh.edges[e][0]], mesh.vertices[mesh.edges[e][1]],
                                     [&](const Point2& x) { return v.gradient(x).dot(nu); });
    }
    return d;
}

/// All three Crouzeix-Raviart dof values (edge means) of v on triangle t.
inline Eigen::Vector3d cr_local_dofs(const FESpace& fe, const SmoothField& v, Index t)
{
    Eigen::Vector3d d;
    const auto& mesh = fe.mesh;
    for (int i = 0; i < 3; ++i) {
        const Index e = mesh.edge_of_triangle[t][i];
        d[i] = detail::edge_mean(mesh.vertices[mesh.edges[e][0]], mesh.vertices[mesh.edges[e][1]], v.value);
    }
    return d;
}

/// Morley interpolation: vertex values and edge means of the normal derivative along nu_E.
inline DiscreteFunction morley_interpolate(const FESpace& fe, const SmoothField& v)
{
    if (fe.space() != Space::Morley) throw Error("morley_interpolate needs a Morley space");
    DiscreteFunction u = DiscreteFunction::zero(fe);
    const auto& mesh = fe.mesh;
    const Index nv = mesh.num_vertices();
    const EdgeRule rule = quad_edge(9);
    for (Index g = 0; g < fe.dofs.n_global; ++g) {
        const Index f = fe.dofs.free_index[g];
        if (f < 0) continue;
        if (g < nv) {
            u.coeffs[f] = v.value(mesh.vertices[g]);
            continue;
        }
        const Index e = g - nv;
        const Point2& a = mesh.vertices[mesh.edges[e][0]];
        const Point2& b = mesh.vertices[mesh.edges[e][1]];
        double mean = 0.0;
        for (std::size_t k = 0; k < rule.points.size(); ++k)
            mean += rule.weights[k] * v.gradient(a + rule.points[k] * (b - a)).dot(fe.geo.normal[e]);
        u.coeffs[f] = mean;
    }
    return u;
}

/// Component pair (v1, v2) interpolated blockwise.
inline DiscreteFunction morley_interpolate(const FESpace& fe, const SmoothField& v1, const SmoothField& v2)
{
    DiscreteFunction u = DiscreteFunction::zero(fe, 2);
    u.component(0) = morley_interpolate(fe, v1).coeffs;
    u.component(1) = morley_interpolate(fe, v2).coeffs;
    return u;
}

/// Crouzeix-Raviart interpolation: edge means of v.
inline DiscreteFunction cr_interpolate(const FESpace& fe, const SmoothField& v)
{
    if (fe.space() != Space::CrouzeixRaviart) throw Error("cr_interpolate needs a Crouzeix-Raviart space");
    DiscreteFunction u = DiscreteFunction::zero(fe);
    const auto& mesh = fe.mesh;
    const EdgeRule rule = quad_edge(9);
    for (Index e = 0; e < mesh.num_edges(); ++e) {
        const Index f = fe.dofs.free_index[e];
        if (f < 0) continue;
        const Point2& a = mesh.vertices[mesh.edges[e][0]];
        const Point2& b = mesh.vertices[mesh.edges[e][1]];
        double mean = 0.0;
        for (std::size_t k = 0; k < rule.points.size(); ++k) mean += rule.weights[k] * v.value(a + rule.points[k] * (b - a));
        u.coeffs[f] = mean;
    }
    return u;
}

/**
 * Piecewise polynomial of degree k in (1, x - x_T, y - y_T), x_T the centroid of T.
 */
struct PiecewisePolynomial
{
    int degree = 0;
    std::vector<Point2> centers;
    Eigen::MatrixXd coeffs; // n_triangles x (1 or 3)

    double eval(Index t, const Point2& p) const
    {
        double v = coeffs(t, 0);
        if (degree == 1) v += coeffs(t, 1) * (p.x() - centers[t].x()) + coeffs(t, 2) * (p.y() - centers[t].y());
        return v;
    }
};

/// Elementwise L2 projection onto P_k, k in {0, 1}.
inline PiecewisePolynomial l2_project(const Triangulation& mesh, const ScalarFn& g, int k, int quad_degree = 6)
{
    if (k != 0 && k != 1) throw Error("l2_project supports k = 0 or k = 1");
    const int nb = k == 0 ? 1 : 3;
    const TriangleRule rule = quad_triangle(quad_degree);
    PiecewisePolynomial out;
    out.degree = k;
    out.centers.resize(mesh.num_triangles());
    out.coeffs.resize(mesh.num_triangles(), nb);
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
        const Point2 c = mesh.centroid(t);
        out.centers[t] = c;
        const auto q = map_rule(mesh, t, rule);
        Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
        Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
        for (std::size_t i = 0; i < q.points.size(); ++i) {
            const Eigen::Vector3d phi(1.0, q.points[i].x() - c.x(), q.points[i].y() - c.y());
            M += q.weights[i] * phi * phi.transpose();
            rhs += q.weights[i] * g(q.points[i]) * phi;
        }
        out.coeffs.row(t) = M.topLeftCorner(nb, nb).ldlt().solve(rhs.head(nb)).transpose();
    }
    return out;
}

struct Oscillation
{
    std::vector<double> per_element_sq;
    double total = 0.0;
};

/// osc_k(g)^2 per element: h_T^{2p} ||g - Pi_k g||^2_{L2(T)}.
inline Oscillation oscillation(const Triangulation& mesh, const ScalarFn& g, int k, int p)
{
    if (p != 1 && p != 2) throw Error("oscillation power p must be 1 or 2");
    const auto proj = l2_project(mesh, g, k);
    const auto geo = geometry(mesh);
    const TriangleRule rule = quad_triangle(6);
    Oscillation out;
    out.per_element_sq.resize(mesh.num_triangles());
    double sum = 0.0;
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
        const auto q = map_rule(mesh, t, rule);
        double s = 0.0;
        for (std::size_t i = 0; i < q.points.size(); ++i) {
            const double d = g(q.points[i]) - proj.eval(t, q.points[i]);
            s += q.weights[i] * d * d;
        }
        out.per_element_sq[t] = std::pow(geo.diameter[t], 2 * p) * s;
        sum += out.per_element_sq[t];
    }
    out.total = std::sqrt(sum);
    return out;
}

/**
 * Broken energy error of component c against an exact field:
 * ||D^2_pw(u - u_h)|| for Morley, ||grad_pw(u - u_h)|| for CR and P1.
 */
inline double broken_energy_error(const FESpace& fe, const DiscreteFunction& uh, const SmoothField& exact, int c = 0)
{
    check_compatible(fe, uh);
    const TriangleRule rule = quad_triangle(6);
    const bool second = fe.space() == Space::Morley;
    double sum = 0.0;
    for (Index t = 0; t < fe.mesh.num_triangles(); ++t) {
        const auto q = map_rule(fe.mesh, t, rule);
        for (std::size_t i = 0; i < q.points.size(); ++i) {
            const PointValue pv = evaluate(fe, uh, t, q.points[i], c);
            if (second) sum += q.weights[i] * (exact.hessian(q.points[i]) - pv.hessian).squaredNorm();
            else sum += q.weights[i] * (exact.gradient(q.points[i]) - pv.gradient).squaredNorm();
        }
    }
    return std::sqrt(sum);
}

/// Broken energy norm of component c: ||D^2_pw u|| (Morley) or ||grad_pw u|| (CR, P1).
inline double broken_energy_norm(const FESpace& fe, const DiscreteFunction& uh, int c = 0)
{
    check_compatible(fe, uh);
    double sum = 0.0;
    const Point2 any = Point2::Zero();
    for (Index t = 0; t < fe.mesh.num_triangles(); ++t) {
        if (fe.space() == Space::Morley) {
            sum += fe.geo.area[t] * evaluate(fe, uh, t, any, c).hessian.squaredNorm();
        } else {
            sum += fe.geo.area[t] * evaluate(fe, uh, t, fe.mesh.centroid(t), c).gradient.squaredNorm();
        }
    }
    return std::sqrt(sum);
}

/**
 * Re-evaluate the dof functionals of the fine space on a coarse discrete function.
 *
 * @p parent maps every fine triangle to the coarse triangle containing it. Each fine vertex
 * and fine edge is evaluated with the polynomial of the lowest-indexed coarse ancestor among
 * its adjacent fine triangles.
 */
inline DiscreteFunction transfer(const FESpace& coarse, const DiscreteFunction& u, const FESpace& fine,
                                 std::span<const Index> parent)
{
    check_compatible(coarse, u);
    if (coarse.space() != fine.space()) throw Error("transfer needs matching spaces");
    if (parent.size() != static_cast<std::size_t>(fine.mesh.num_triangles())) throw Error("parent map has the wrong size");
    const auto& mesh = fine.mesh;
    const Index nv = mesh.num_vertices();
    constexpr Index none = std::numeric_limits<Index>::max();

    std::vector<Index> vertex_owner(nv, none);
    for (Index t = 0; t < mesh.num_triangles(); ++t)
        for (Index v : mesh.triangles[t]) vertex_owner[v] = std::min(vertex_owner[v], parent[t]);
    std::vector<Index> edge_owner(mesh.num_edges(), none);
    for (Index e = 0; e < mesh.num_edges(); ++e)
        for (Index t : mesh.triangles_of_edge[e])
            if (t >= 0) edge_owner[e] = std::min(edge_owner[e], parent[t]);

    DiscreteFunction out = DiscreteFunction::zero(fine, u.n_components);
    for (int c = 0; c < u.n_components; ++c) {
        auto block = out.component(c);
        for (Index g = 0; g < fine.dofs.n_global; ++g) {
            const Index f = fine.dofs.free_index[g];
            if (f < 0) continue;
            switch (fine.space()) {
            case Space::Morley:
                if (g < nv) {
                    block[f] = evaluate(coarse, u, vertex_owner[g], mesh.vertices[g], c).value;
                } else {
                    const Index e = g - nv;
                    // the coarse gradient is affine, so the midpoint value is the edge mean
                    block[f] = evaluate(coarse, u, edge_owner[e], mesh.edge_midpoint(e), c).gradient.dot(fine.geo.normal[e]);
                }
                break;
            case Space::CrouzeixRaviart:
                block[f] = evaluate(coarse, u, edge_owner[g], mesh.edge_midpoint(g), c).value;
                break;
            case Space::P1Conforming:
                block[f] = evaluate(coarse, u, vertex_owner[g], mesh.vertices[g], c).value;
                break;
            case Space::P0:
                block[f] = evaluate(coarse, u, parent[g], mesh.centroid(g), c).value;
                break;
            }
        }
    }
    return out;
}

} // namespace ncfem
