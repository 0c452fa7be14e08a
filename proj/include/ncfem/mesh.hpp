#pragma once

#include "ncfem/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ncfem {

/**
 * Conforming triangulation of a polygonal domain.
 *
 * Local edge i of a triangle is the edge opposite its local vertex i. The refinement
 * edge of triangle t is local edge refinement_edge[t]; the vertex opposite it is the
 * newest vertex in the sense of newest-vertex bisection. Triangles are stored
 * counterclockwise. Edges are stored as sorted vertex pairs; triangles_of_edge[e]
 * lists the adjacent triangles in ascending order, with -1 in the second slot for
 * boundary edges.
 */
struct Triangulation
{
    std::vector<Point2> vertices;
    std::vector<std::array<Index, 3>> triangles;
    std::vector<int> refinement_edge;

    std::vector<std::array<Index, 2>> edges;
    std::vector<std::array<Index, 3>> edge_of_triangle;
    std::vector<std::array<Index, 2>> triangles_of_edge;
    std::vector<bool> boundary_edge;
    std::vector<bool> boundary_vertex;

    Index num_vertices() const { return static_cast<Index>(vertices.size()); }
    Index num_triangles() const { return static_cast<Index>(triangles.size()); }
    Index num_edges() const { return static_cast<Index>(edges.size()); }

    Index num_interior_vertices() const
    {
        return static_cast<Index>(std::count(boundary_vertex.begin(), boundary_vertex.end(), false));
    }
    Index num_interior_edges() const
    {
        return static_cast<Index>(std::count(boundary_edge.begin(), boundary_edge.end(), false));
    }

    /// Vertices of local edge i (opposite local vertex i), in counterclockwise order.
    std::array<Index, 2> local_edge(Index t, int i) const
    {
        const auto& v = triangles[t];
        return {v[(i + 1) % 3], v[(i + 2) % 3]};
    }

    Point2 centroid(Index t) const
    {
        const auto& v = triangles[t];
        return (vertices[v[0]] + vertices[v[1]] + vertices[v[2]]) / 3.0;
    }

    double signed_area(Index t) const
    {
        const auto& v = triangles[t];
        return 0.5 * cross2(vertices[v[1]] - vertices[v[0]], vertices[v[2]] - vertices[v[0]]);
    }

    Point2 edge_midpoint(Index e) const { return 0.5 * (vertices[edges[e][0]] + vertices[edges[e][1]]); }
};

/// Per-entity geometric quantities of a triangulation.
struct MeshGeometry
{
    std::vector<double> diameter;     // h_T
    std::vector<double> area;         // |T|
    std::vector<double> edge_length;  // h_E
    std::vector<Vec2> normal;         // nu_E
    std::vector<Vec2> tangent;        // tau_E = nu_E rotated by +90 degrees
    double h_max = 0.0;
};

namespace detail {

inline std::uint64_t edge_key(Index a, Index b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

/// Rebuild edge and adjacency tables from vertices/triangles. Throws on edges shared by
/// more than two triangles or traversed twice in the same direction.
inline void build_tables(Triangulation& mesh)
{
    const Index nt = mesh.num_triangles();
    mesh.edges.clear();
    mesh.triangles_of_edge.clear();
    mesh.edge_of_triangle.assign(nt, {-1, -1, -1});

    std::unordered_map<std::uint64_t, Index> lookup;
    lookup.reserve(static_cast<std::size_t>(nt) * 2);
    std::vector<Index> first_start; // start vertex of the first traversal, for orientation checks

    for (Index t = 0; t < nt; ++t) {
        for (int i = 0; i < 3; ++i) {
            const auto [a, b] = mesh.local_edge(t, i);
            const auto key = edge_key(a, b);
            auto it = lookup.find(key);
            if (it == lookup.end()) {
                const Index e = mesh.num_edges();
                lookup.emplace(key, e);
                mesh.edges.push_back({std::min(a, b), std::max(a, b)});
                mesh.triangles_of_edge.push_back({t, -1});
                first_start.push_back(a);
                mesh.edge_of_triangle[t][i] = e;
            } else {
                const Index e = it->second;
                auto& adj = mesh.triangles_of_edge[e];
                if (adj[1] != -1)
                    throw MeshError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                    ") is shared by more than two triangles");
                if (first_start[e] == a)
                    throw MeshError("triangles " + std::to_string(adj[0]) + " and " + std::to_string(t) +
                                    " overlap along a shared edge");
                adj[1] = t;
                if (adj[1] < adj[0]) std::swap(adj[0], adj[1]);
                mesh.edge_of_triangle[t][i] = e;
            }
        }
    }

    const Index ne = mesh.num_edges();
    mesh.boundary_edge.assign(ne, false);
    mesh.boundary_vertex.assign(mesh.num_vertices(), false);
    for (Index e = 0; e < ne; ++e) {
        if (mesh.triangles_of_edge[e][1] == -1) {
            mesh.boundary_edge[e] = true;
            mesh.boundary_vertex[mesh.edges[e][0]] = true;
            mesh.boundary_vertex[mesh.edges[e][1]] = true;
        }
    }
}

inline int longest_edge(const Triangulation& mesh, Index t)
{
    const auto& v = mesh.triangles[t];
    int best = 0;
    double best_len = -1.0;
    for (int i = 0; i < 3; ++i) {
        const auto [a, b] = mesh.local_edge(t, i);
        const double len = (mesh.vertices[a] - mesh.vertices[b]).squaredNorm();
        const double tol = 1e-12 * std::max(len, best_len);
        if (len > best_len + tol || (std::abs(len - best_len) <= tol && v[i] < v[best])) {
            best = i;
            best_len = std::max(len, best_len);
        }
    }
    return best;
}

} // namespace detail

/**
 * Build a triangulation from raw arrays.
 *
 * Clockwise triangles are reoriented. When @p refinement_edges is empty, the refinement
 * edge of each triangle is its longest edge (ties: smallest opposite-vertex index).
 */
inline Triangulation build_from_arrays(std::vector<Point2> vertices, std::vector<std::array<Index, 3>> triangles,
                                       std::vector<int> refinement_edges = {})
{
    Triangulation mesh;
    mesh.vertices = std::move(vertices);
    mesh.triangles = std::move(triangles);
    const Index nv = mesh.num_vertices();
    const Index nt = mesh.num_triangles();

    if (!refinement_edges.empty() && static_cast<Index>(refinement_edges.size()) != nt)
        throw MeshError("refinement edge list does not match the triangle count");

    for (const auto& p : mesh.vertices)
        if (!std::isfinite(p.x()) || !std::isfinite(p.y())) throw MeshError("non-finite vertex coordinate");

    // Duplicate vertices: sort lexicographically and compare neighbours.
    {
        Eigen::AlignedBox2d box;
        for (const auto& p : mesh.vertices) box.extend(p);
        const double scale = nv > 0 ? std::max(box.diagonal().norm(), 1.0) : 1.0;
        std::vector<Index> order(nv);
        for (Index i = 0; i < nv; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](Index a, Index b) {
            const auto& p = mesh.vertices[a];
            const auto& q = mesh.vertices[b];
            return p.x() < q.x() || (p.x() == q.x() && p.y() < q.y());
        });
        for (Index i = 0; i + 1 < nv; ++i) {
            for (Index j = i + 1; j < nv; ++j) {
                const auto& p = mesh.vertices[order[i]];
                const auto& q = mesh.vertices[order[j]];
                if (q.x() - p.x() > 1e-12 * scale) break;
                if ((p - q).norm() <= 1e-12 * scale)
                    throw MeshError("duplicate vertices " + std::to_string(order[i]) + " and " +
                                    std::to_string(order[j]));
            }
        }
    }

    mesh.refinement_edge.assign(nt, 0);
    for (Index t = 0; t < nt; ++t) {
        auto& v = mesh.triangles[t];
        for (Index k : v)
            if (k < 0 || k >= nv) throw MeshError("triangle " + std::to_string(t) + " has an out-of-range vertex index");
        if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2])
            throw MeshError("triangle " + std::to_string(t) + " repeats a vertex");
        int r = refinement_edges.empty() ? 0 : refinement_edges[t];
        if (r < 0 || r > 2) throw MeshError("refinement edge index must be 0, 1 or 2");
        if (mesh.signed_area(t) < 0.0) {
            std::swap(v[1], v[2]);
            if (r != 0) r = 3 - r;
        }
        const double a = mesh.signed_area(t);
        const auto& p = mesh.vertices;
        const double len2 = std::max({(p[v[0]] - p[v[1]]).squaredNorm(), (p[v[1]] - p[v[2]]).squaredNorm(),
                                      (p[v[2]] - p[v[0]]).squaredNorm()});
        if (!(a > 1e-14 * len2)) throw MeshError("triangle " + std::to_string(t) + " has zero area");
        mesh.refinement_edge[t] = r;
    }

    detail::build_tables(mesh);

    if (refinement_edges.empty())
        for (Index t = 0; t < nt; ++t) mesh.refinement_edge[t] = detail::longest_edge(mesh, t);

    // Hanging nodes show up as vertices in the interior of a boundary edge.
    for (Index e = 0; e < mesh.num_edges(); ++e) {
        if (!mesh.boundary_edge[e]) continue;
        const Point2 a = mesh.vertices[mesh.edges[e][0]];
        const Point2 b = mesh.vertices[mesh.edges[e][1]];
        const Vec2 d = b - a;
        const double len2 = d.squaredNorm();
        for (Index k = 0; k < nv; ++k) {
            if (k == mesh.edges[e][0] || k == mesh.edges[e][1]) continue;
            const Vec2 w = mesh.vertices[k] - a;
            const double s = w.dot(d) / len2;
            if (s <= 1e-12 || s >= 1.0 - 1e-12) continue;
            if (std::abs(cross2(d, w)) <= 1e-12 * len2)
                throw MeshError("vertex " + std::to_string(k) + " is a hanging node on edge " + std::to_string(e));
        }
    }
    return mesh;
}

inline MeshGeometry geometry(const Triangulation& mesh)
{
    MeshGeometry g;
    const Index nt = mesh.num_triangles();
    const Index ne = mesh.num_edges();
    g.diameter.resize(nt);
    g.area.resize(nt);
    for (Index t = 0; t < nt; ++t) {
        double h = 0.0;
        for (int i = 0; i < 3; ++i) {
            const auto [a, b] = mesh.local_edge(t, i);
            h = std::max(h, (mesh.vertices[a] - mesh.vertices[b]).norm());
        }
        g.diameter[t] = h;
        g.area[t] = mesh.signed_area(t);
        g.h_max = std::max(g.h_max, h);
    }
    g.edge_length.resize(ne);
    g.normal.resize(ne);
    g.tangent.resize(ne);
    for (Index e = 0; e < ne; ++e) {
        const Point2& a = mesh.vertices[mesh.edges[e][0]];
        const Point2& b = mesh.vertices[mesh.edges[e][1]];
        const Vec2 d = b - a;
        const double len = d.norm();
        Vec2 nu = Vec2(d.y(), -d.x()) / len;
        // Orient away from the lower-indexed adjacent triangle.
        const Vec2 away = 0.5 * (a + b) - mesh.centroid(mesh.triangles_of_edge[e][0]);
        if (nu.dot(away) < 0.0) nu = -nu;
        g.edge_length[e] = len;
        g.normal[e] = nu;
        g.tangent[e] = rotate_ccw(nu);
    }
    return g;
}

enum class BuiltinDomain { UnitSquare, LShape };

inline std::optional<BuiltinDomain> parse_builtin_domain(std::string_view name)
{
    if (name == "unit_square") return BuiltinDomain::UnitSquare;
    if (name == "l_shape") return BuiltinDomain::LShape;
    return std::nullopt;
}

inline Triangulation builtin_domain(BuiltinDomain domain)
{
    switch (domain) {
    case BuiltinDomain::UnitSquare:
        return build_from_arrays({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}});
    case BuiltinDomain::LShape:
        // (-1,1)^2 minus [0,1)x(-1,0]; five of the six triangles touch the re-entrant corner (0,0).
        return build_from_arrays({{-1, -1}, {0, -1}, {0, 0}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}},
                                 {{0, 1, 2}, {0, 2, 7}, {7, 2, 5}, {7, 5, 6}, {2, 3, 4}, {2, 4, 5}});
    }
    throw Error("unknown builtin domain");
}

/// Smallest interior angle over all triangles, in radians.
inline double minimum_angle(const Triangulation& mesh)
{
    double result = std::numbers::pi;
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.triangles[t];
        for (int i = 0; i < 3; ++i) {
            const Vec2 a = mesh.vertices[v[(i + 1) % 3]] - mesh.vertices[v[i]];
            const Vec2 b = mesh.vertices[v[(i + 2) % 3]] - mesh.vertices[v[i]];
            result = std::min(result, std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0)));
        }
    }
    return result;
}

/// Scan the adjacency tables; returns an empty string when every invariant holds.
inline std::string check_invariants(const Triangulation& mesh)
{
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
        if (!(mesh.signed_area(t) > 0.0)) return "triangle " + std::to_string(t) + " is not counterclockwise";
        if (mesh.refinement_edge[t] < 0 || mesh.refinement_edge[t] > 2)
            return "triangle " + std::to_string(t) + " has no valid refinement edge";
        for (int i = 0; i < 3; ++i) {
            const Index e = mesh.edge_of_triangle[t][i];
            auto [a, b] = mesh.local_edge(t, i);
            if (a > b) std::swap(a, b);
            if (mesh.edges[e][0] != a || mesh.edges[e][1] != b) return "edge table mismatch";
            const auto& adj = mesh.triangles_of_edge[e];
            if (adj[0] != t && adj[1] != t) return "adjacency table mismatch";
        }
    }
    std::vector<int> count(mesh.num_edges(), 0);
    for (const auto& et : mesh.edge_of_triangle)
        for (Index e : et) ++count[e];
    for (Index e = 0; e < mesh.num_edges(); ++e) {
        const int expected = mesh.boundary_edge[e] ? 1 : 2;
        if (count[e] != expected) return "edge " + std::to_string(e) + " violates conformity";
    }
    return {};
}

// --- text mesh format -------------------------------------------------------------

/// Parse "nv nt", nv lines "x y", nt lines "i j k [r]"; '#' starts a comment.
inline Triangulation read_mesh(std::istream& in)
{
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        lines.push_back(line);
    }
    if (lines.empty()) throw MeshError("mesh file is empty");
    std::istringstream header(lines[0]);
    long nv = -1, nt = -1;
    if (!(header >> nv >> nt) || nv < 3 || nt < 1) throw MeshError("mesh header must read \"nv nt\"");
    if (static_cast<long>(lines.size()) != 1 + nv + nt) throw MeshError("mesh file has the wrong number of lines");

    std::vector<Point2> vertices(nv);
    for (long i = 0; i < nv; ++i) {
        std::istringstream ls(lines[1 + i]);
        double x = 0, y = 0;
        if (!(ls >> x >> y)) throw MeshError("cannot parse vertex line " + std::to_string(i));
        vertices[i] = Point2(x, y);
    }
    std::vector<std::array<Index, 3>> triangles(nt);
    std::vector<int> ref(nt, -1);
    bool any_ref = false, all_ref = true;
    for (long t = 0; t < nt; ++t) {
        std::istringstream ls(lines[1 + nv + t]);
        long i = 0, j = 0, k = 0;
        if (!(ls >> i >> j >> k)) throw MeshError("cannot parse triangle line " + std::to_string(t));
        triangles[t] = {static_cast<Index>(i), static_cast<Index>(j), static_cast<Index>(k)};
        int r = 0;
        if (ls >> r) {
            ref[t] = r;
            any_ref = true;
        } else {
            all_ref = false;
        }
    }
    if (any_ref && !all_ref) throw MeshError("refinement edges must be given for all triangles or none");
    return build_from_arrays(std::move(vertices), std::move(triangles), any_ref ? ref : std::vector<int>{});
}

inline Triangulation read_mesh_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open mesh file " + path);
    return read_mesh(in);
}

inline void write_mesh(std::ostream& out, const Triangulation& mesh)
{
    out << mesh.num_vertices() << ' ' << mesh.num_triangles() << '\n';
    out.precision(17);
    for (const auto& p : mesh.vertices) out << p.x() << ' ' << p.y() << '\n';
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.triangles[t];
        out << v[0] << ' ' << v[1] << ' ' << v[2] << ' ' << mesh.refinement_edge[t] << '\n';
    }
}

} // namespace ncfem
