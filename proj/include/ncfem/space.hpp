#pragma once

#include "ncfem/mesh.hpp"
#include "ncfem/quadrature.hpp"

#include <limits>
#include <memory>
#include <span>

namespace ncfem {

enum class Space { Morley, CrouzeixRaviart, P1Conforming, P0 };

inline const char* to_string(Space s)
{
    switch (s) {
    case Space::Morley: return "Morley";
    case Space::CrouzeixRaviart: return "CrouzeixRaviart";
    case Space::P1Conforming: return "P1Conforming";
    case Space::P0: return "P0";
    }
    return "?";
}

inline int dofs_per_element(Space s)
{
    switch (s) {
    case Space::Morley: return 6;
    case Space::CrouzeixRaviart:
    case Space::P1Conforming: return 3;
    case Space::P0: return 1;
    }
    return 0;
}

/**
 * Element-to-global numbering with homogeneous boundary conditions eliminated.
 *
 * Morley: global dofs are the vertices followed by the edges; local order is the three
 * vertex values then the three edge normal-derivative means (local edge i opposite vertex i).
 * Crouzeix-Raviart: one dof per edge midpoint. P1: one per vertex. P0: one per triangle.
 */
struct DofMap
{
    Space space = Space::Morley;
    int per_element = 0;
    Index n_global = 0;
    Index n_free = 0;
    std::vector<Index> element_dofs;   // n_triangles * per_element global indices
    std::vector<bool> is_boundary_dof; // per global dof
    std::vector<Index> free_index;     // per global dof, -1 when constrained

    std::span<const Index> global_dofs(Index t) const
    {
        return {element_dofs.data() + static_cast<std::size_t>(t) * per_element, static_cast<std::size_t>(per_element)};
    }
    Index free_dof(Index t, int local) const { return free_index[element_dofs[static_cast<std::size_t>(t) * per_element + local]]; }
};

inline DofMap build_dofmap(const Triangulation& mesh, Space space)
{
    DofMap d;
    d.space = space;
    d.per_element = dofs_per_element(space);
    const Index nv = mesh.num_vertices();
    const Index ne = mesh.num_edges();
    const Index nt = mesh.num_triangles();
    d.element_dofs.resize(static_cast<std::size_t>(nt) * d.per_element);
    switch (space) {
    case Space::Morley:
        d.n_global = nv + ne;
        d.is_boundary_dof.resize(d.n_global);
        for (Index v = 0; v < nv; ++v) d.is_boundary_dof[v] = mesh.boundary_vertex[v];
        for (Index e = 0; e < ne; ++e) d.is_boundary_dof[nv + e] = mesh.boundary_edge[e];
        for (Index t = 0; t < nt; ++t)
            for (int i = 0; i < 3; ++i) {
                d.element_dofs[6 * t + i] = mesh.triangles[t][i];
                d.element_dofs[6 * t + 3 + i] = nv + mesh.edge_of_triangle[t][i];
            }
        break;
    case Space::CrouzeixRaviart:
        d.n_global = ne;
        d.is_boundary_dof = mesh.boundary_edge;
        for (Index t = 0; t < nt; ++t)
            for (int i = 0; i < 3; ++i) d.element_dofs[3 * t + i] = mesh.edge_of_triangle[t][i];
        break;
    case Space::P1Conforming:
        d.n_global = nv;
        d.is_boundary_dof = mesh.boundary_vertex;
        for (Index t = 0; t < nt; ++t)
            for (int i = 0; i < 3; ++i) d.element_dofs[3 * t + i] = mesh.triangles[t][i];
        break;
    case Space::P0:
        d.n_global = nt;
        d.is_boundary_dof.assign(nt, false);
        for (Index t = 0; t < nt; ++t) d.element_dofs[t] = t;
        break;
    }
    d.free_index.assign(d.n_global, -1);
    for (Index g = 0; g < d.n_global; ++g)
        if (!d.is_boundary_dof[g]) d.free_index[g] = d.n_free++;
    return d;
}

/// Values, gradients and hessians of the local basis functions at one point.
struct ElementBasis
{
    int n = 0;
    std::array<double, 6> values{};
    std::array<Vec2, 6> gradients{};
    std::array<Mat2, 6> hessians{};
};

/**
 * Local basis of one element in scaled P2 monomials
 * (1, xi, eta, xi^2, xi*eta, eta^2), xi = (x - x_c)/s, eta = (y - y_c)/s.
 *
 * Column i of @c coeff holds the monomial coefficients of basis function i; it is the
 * inverse of the matrix pairing the monomials with the element's dof functionals.
 */
struct ElementShape
{
    int n = 0;
    Point2 center = Point2::Zero();
    double scale = 1.0;
    Eigen::Matrix<double, 6, 6> coeff = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 6> dof_matrix = Eigen::Matrix<double, 6, 6>::Zero();

    ElementBasis eval(const Point2& p) const
    {
        const double xi = (p.x() - center.x()) / scale;
        const double eta = (p.y() - center.y()) / scale;
        const double is = 1.0 / scale;
        ElementBasis b;
        b.n = n;
        for (int i = 0; i < n; ++i) {
            const auto c = coeff.col(i);
            b.values[i] = c[0] + c[1] * xi + c[2] * eta + c[3] * xi * xi + c[4] * xi * eta + c[5] * eta * eta;
            b.gradients[i] = Vec2(c[1] + 2.0 * c[3] * xi + c[4] * eta, c[2] + c[4] * xi + 2.0 * c[5] * eta) * is;
            Mat2 h;
            h << 2.0 * c[3], c[4], c[4], 2.0 * c[5];
            b.hessians[i] = h * is * is;
        }
        return b;
    }
};

namespace detail {

/// Monomials and their gradients at p in scaled coordinates.
inline void scaled_monomials(const Point2& p, const Point2& center, double scale, Eigen::Matrix<double, 6, 1>& value,
                             Eigen::Matrix<double, 6, 2>& grad)
{
    const double xi = (p.x() - center.x()) / scale;
    const double eta = (p.y() - center.y()) / scale;
    value << 1.0, xi, eta, xi * xi, xi * eta, eta * eta;
    grad << 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 2.0 * xi, 0.0, eta, xi, 0.0, 2.0 * eta;
    grad /= scale;
}

} // namespace detail

inline ElementShape build_element_shape(const Triangulation& mesh, const MeshGeometry& geo, Space space, Index t)
{
    ElementShape s;
    s.n = dofs_per_element(space);
    s.center = mesh.centroid(t);
    s.scale = geo.diameter[t];
    const auto& v = mesh.triangles[t];
    Eigen::Matrix<double, 6, 1> mv;
    Eigen::Matrix<double, 6, 2> mg;

    if (space == Space::P0) {
        s.coeff(0, 0) = 1.0;
        s.dof_matrix(0, 0) = 1.0;
        return s;
    }
    const int nm = space == Space::Morley ? 6 : 3;
    Eigen::MatrixXd dofs(nm, nm);
    for (int j = 0; j < 3; ++j) {
        Point2 p;
        if (space == Space::CrouzeixRaviart) {
            const auto [a, b] = mesh.local_edge(t, j);
            p = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
        } else {
            p = mesh.vertices[v[j]];
        }
        detail::scaled_monomials(p, s.center, s.scale, mv, mg);
        dofs.row(j) = mv.head(nm).transpose();
    }
    if (space == Space::Morley) {
        for (int j = 0; j < 3; ++j) {
            const Index e = mesh.edge_of_triangle[t][j];
            detail::scaled_monomials(mesh.edge_midpoint(e), s.center, s.scale, mv, mg);
            dofs.row(3 + j) = (mg * geo.normal[e]).transpose();
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(dofs);
    if (!lu.isInvertible() || lu.rcond() < 1e-13)
        throw SingularMatrixError("singular dof matrix on triangle " + std::to_string(t));
    s.dof_matrix.topLeftCorner(nm, nm) = dofs;
    s.coeff.topLeftCorner(nm, nm) = lu.inverse();
    return s;
}

/// Mesh, geometry, dof map and cached element bases of one finite element space.
struct FESpace
{
    Triangulation mesh;
    MeshGeometry geo;
    DofMap dofs;
    std::vector<ElementShape> shapes;

    Space space() const { return dofs.space; }
    Index n_free() const { return dofs.n_free; }
};

inline FESpace make_space(Triangulation mesh, Space space)
{
    FESpace fe;
    fe.mesh = std::move(mesh);
    fe.geo = geometry(fe.mesh);
    fe.dofs = build_dofmap(fe.mesh, space);
    fe.shapes.reserve(fe.mesh.num_triangles());
    for (Index t = 0; t < fe.mesh.num_triangles(); ++t)
        fe.shapes.push_back(build_element_shape(fe.mesh, fe.geo, space, t));
    return fe;
}

inline ElementBasis element_basis(const FESpace& fe, Index t, const Point2& p) { return fe.shapes[t].eval(p); }

/// Space tag plus coefficients on the free dofs; n_components blocks of n_free entries.
struct DiscreteFunction
{
    Space space = Space::Morley;
    int n_components = 1;
    Eigen::VectorXd coeffs;

    static DiscreteFunction zero(const FESpace& fe, int n_components = 1)
    {
        return {fe.space(), n_components, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_components) * fe.n_free())};
    }
    auto component(int c) const { return coeffs.segment(static_cast<Eigen::Index>(c) * size() / n_components, size() / n_components); }
    auto component(int c) { return coeffs.segment(static_cast<Eigen::Index>(c) * size() / n_components, size() / n_components); }
    Eigen::Index size() const { return coeffs.size(); }
};

inline void check_compatible(const FESpace& fe, const DiscreteFunction& u)
{
    if (u.space != fe.space() || u.size() != static_cast<Eigen::Index>(u.n_components) * fe.n_free())
        throw Error("discrete function does not match the finite element space");
}

/// Local coefficient vector of component c on triangle t (zeros at constrained dofs).
inline Eigen::Matrix<double, 6, 1> local_coeffs(const FESpace& fe, const DiscreteFunction& u, Index t, int c = 0)
{
    Eigen::Matrix<double, 6, 1> out = Eigen::Matrix<double, 6, 1>::Zero();
    const Index off = static_cast<Index>(c) * fe.n_free();
    for (int i = 0; i < fe.dofs.per_element; ++i) {
        const Index f = fe.dofs.free_dof(t, i);
        if (f >= 0) out[i] = u.coeffs[off + f];
    }
    return out;
}

struct PointValue
{
    double value = 0.0;
    Vec2 gradient = Vec2::Zero();
    Mat2 hessian = Mat2::Zero();
};

/// Evaluate component c of u restricted to triangle t at p (the element polynomial, so p may
/// lie on the closure or outside).
inline PointValue evaluate(const FESpace& fe, const DiscreteFunction& u, Index t, const Point2& p, int c = 0)
{
    const auto local = local_coeffs(fe, u, t, c);
    const ElementBasis b = fe.shapes[t].eval(p);
    PointValue out;
    for (int i = 0; i < b.n; ++i) {
        out.value += local[i] * b.values[i];
        out.gradient += local[i] * b.gradients[i];
        out.hessian += local[i] * b.hessians[i];
    }
    return out;
}

/// Physical quadrature points and weights on triangle t.
struct ElementQuadrature
{
    std::vector<Point2> points;
    std::vector<double> weights;
};

inline ElementQuadrature map_rule(const Triangulation& mesh, Index t, const TriangleRule& rule)
{
    ElementQuadrature q;
    const auto& v = mesh.triangles[t];
    const double jac = 2.0 * mesh.signed_area(t);
    q.points.reserve(rule.points.size());
    q.weights.reserve(rule.points.size());
    for (std::size_t k = 0; k < rule.points.size(); ++k) {
        const auto& l = rule.points[k];
        q.points.push_back(l[0] * mesh.vertices[v[0]] + l[1] * mesh.vertices[v[1]] + l[2] * mesh.vertices[v[2]]);
        q.weights.push_back(rule.weights[k] * jac);
    }
    return q;
}

} // namespace ncfem
