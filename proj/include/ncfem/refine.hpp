#pragma once

#include "ncfem/mesh.hpp"

#include <deque>
#include <span>

namespace ncfem {

/// A refined mesh together with the coarse ancestor of every fine triangle.
struct Refinement
{
    Triangulation mesh;
    std::vector<Index> parent;
};

/**
 * Newest-vertex bisection of the marked triangles with conforming closure.
 *
 * Marked triangles mark their refinement edge. The closure marks the refinement edge of
 * every triangle that carries a marked edge until no triangle has a marked edge without
 * its refinement edge being marked. Each triangle is then bisected through its refinement
 * edge, and each child through its own refinement edge (an edge of the parent) if marked,
 * giving 1, 2, 3 or 4 children. The midpoint becomes the newest vertex of both children.
 */
inline Refinement bisect_with_parents(const Triangulation& mesh, std::span<const Index> marked)
{
    const Index nt = mesh.num_triangles();
    const Index ne = mesh.num_edges();
    std::vector<bool> edge_marked(ne, false);
    std::deque<Index> work;

    auto ref_edge = [&](Index t) { return mesh.edge_of_triangle[t][mesh.refinement_edge[t]]; };
    auto mark_edge = [&](Index e) {
        if (edge_marked[e]) return;
        edge_marked[e] = true;
        for (Index t : mesh.triangles_of_edge[e])
            if (t >= 0) work.push_back(t);
    };

    for (Index t : marked) {
        if (t < 0 || t >= nt) throw Error("marked triangle index out of range");
        mark_edge(ref_edge(t));
    }
    while (!work.empty()) {
        const Index t = work.front();
        work.pop_front();
        mark_edge(ref_edge(t));
    }

    Refinement out;
    out.mesh.vertices = mesh.vertices;
    std::vector<Index> midpoint(ne, -1);
    for (Index e = 0; e < ne; ++e) {
        if (!edge_marked[e]) continue;
        midpoint[e] = static_cast<Index>(out.mesh.vertices.size());
        out.mesh.vertices.push_back(mesh.edge_midpoint(e));
    }

    auto& tris = out.mesh.triangles;
    auto& refs = out.mesh.refinement_edge;
    tris.reserve(nt * 2);
    refs.reserve(nt * 2);
    out.parent.reserve(nt * 2);
    auto emit = [&](std::array<Index, 3> v, int r, Index parent) {
        tris.push_back(v);
        refs.push_back(r);
        out.parent.push_back(parent);
    };

    for (Index t = 0; t < nt; ++t) {
        const int r = mesh.refinement_edge[t];
        const auto& v = mesh.triangles[t];
        const Index e_bc = mesh.edge_of_triangle[t][r];
        if (!edge_marked[e_bc]) {
            emit(v, r, t);
            continue;
        }
        // (a, b, c) with refinement edge bc opposite the newest vertex a.
        const Index a = v[r], b = v[(r + 1) % 3], c = v[(r + 2) % 3];
        const Index e_ca = mesh.edge_of_triangle[t][(r + 1) % 3];
        const Index e_ab = mesh.edge_of_triangle[t][(r + 2) % 3];
        const Index m = midpoint[e_bc];

        // Child (m, a, b) has refinement edge ab; child (m, c, a) has refinement edge ca.
        if (edge_marked[e_ab]) {
            const Index m1 = midpoint[e_ab];
            emit({m1, m, a}, 0, t);
            emit({m1, b, m}, 0, t);
        } else {
            emit({m, a, b}, 0, t);
        }
        if (edge_marked[e_ca]) {
            const Index m2 = midpoint[e_ca];
            emit({m2, m, c}, 0, t);
            emit({m2, a, m}, 0, t);
        } else {
            emit({m, c, a}, 0, t);
        }
    }
    detail::build_tables(out.mesh);
    return out;
}

inline Triangulation bisect(const Triangulation& mesh, std::span<const Index> marked)
{
    return bisect_with_parents(mesh, marked).mesh;
}

inline std::vector<Index> all_triangles(const Triangulation& mesh)
{
    std::vector<Index> all(mesh.num_triangles());
    for (Index t = 0; t < mesh.num_triangles(); ++t) all[t] = t;
    return all;
}

/// Two bisection passes with every triangle marked; each input triangle is quartered.
inline Refinement uniform_refine_with_parents(const Triangulation& mesh)
{
    auto first = bisect_with_parents(mesh, all_triangles(mesh));
    auto second = bisect_with_parents(first.mesh, all_triangles(first.mesh));
    for (auto& p : second.parent) p = first.parent[p];
    return second;
}

inline Triangulation uniform_refine(const Triangulation& mesh) { return uniform_refine_with_parents(mesh).mesh; }

/// Compose two parent maps: fine -> mid -> coarse.
inline std::vector<Index> compose_parents(std::span<const Index> fine_to_mid, std::span<const Index> mid_to_coarse)
{
    std::vector<Index> out(fine_to_mid.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mid_to_coarse[fine_to_mid[i]];
    return out;
}

} // namespace ncfem
