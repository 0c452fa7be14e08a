#include "ncfem/ncfem.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace ncfem;

namespace {

Triangulation unit_square() { return builtin_domain(BuiltinDomain::UnitSquare); }
Triangulation l_shape() { return builtin_domain(BuiltinDomain::LShape); }

double total_area(const Triangulation& m)
{
    double a = 0.0;
    for (Index t = 0; t < m.num_triangles(); ++t) a += m.signed_area(t);
    return a;
}

bool inside_closed(const Triangulation& m, Index t, const Point2& p)
{
    const auto& v = m.triangles[t];
    const double tol = 1e-12;
    for (int i = 0; i < 3; ++i)
        if (cross2(m.vertices[v[(i + 1) % 3]] - m.vertices[v[i]], p - m.vertices[v[i]]) < -tol) return false;
    return true;
}

} // namespace

TEST(Mesh, UnitSquareTables)
{
    const auto m = unit_square();
    EXPECT_EQ(m.num_edges(), 5);
    EXPECT_EQ(m.num_interior_edges(), 1);
    EXPECT_EQ(m.num_edges() - m.num_interior_edges(), 4);
    EXPECT_EQ(check_invariants(m), "");
}

TEST(Mesh, ReferenceTriangleAllBoundary)
{
    const auto m = build_from_arrays({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}});
    EXPECT_EQ(m.num_edges(), 3);
    EXPECT_EQ(m.num_interior_edges(), 0);
}

TEST(Mesh, ClockwiseInputIsReoriented)
{
    const auto m = build_from_arrays({{0, 0}, {1, 0}, {0, 1}}, {{0, 2, 1}});
    EXPECT_GT(m.signed_area(0), 0.0);
    EXPECT_NEAR(m.signed_area(0), 0.5, 1e-15);
}

TEST(Mesh, InitialRefinementEdgeIsLongest)
{
    const auto m = unit_square();
    for (Index t = 0; t < 2; ++t) {
        const auto [a, b] = m.local_edge(t, m.refinement_edge[t]);
        EXPECT_NEAR((m.vertices[a] - m.vertices[b]).norm(), std::sqrt(2.0), 1e-15);
    }
}

TEST(Mesh, RejectsBadInput)
{
    EXPECT_THROW(build_from_arrays({{0, 0}, {1, 0}, {0, 0}}, {{0, 1, 2}}), MeshError);
    EXPECT_THROW(build_from_arrays({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}), MeshError);
    EXPECT_THROW(build_from_arrays({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 3}}), MeshError);
    // hanging node: vertex 4 sits in the middle of the long edge of triangle 0
    EXPECT_THROW(build_from_arrays({{0, 0}, {2, 0}, {0, 2}, {1, 1}, {2, 2}}, {{0, 1, 2}, {1, 4, 3}, {3, 4, 2}}), MeshError);
}

TEST(Mesh, BisectBothTriangles)
{
    const std::vector<Index> marked{0, 1};
    const auto m = bisect(unit_square(), marked);
    EXPECT_EQ(m.num_triangles(), 4);
    EXPECT_EQ(m.num_vertices(), 5);
    EXPECT_EQ(m.num_edges(), 8);
    EXPECT_EQ(m.num_interior_edges(), 4);
    EXPECT_EQ(check_invariants(m), "");
}

TEST(Mesh, BisectEmptyMarkingIsIdentity)
{
    const auto m0 = unit_square();
    const auto m = bisect(m0, std::vector<Index>{});
    EXPECT_EQ(m.triangles, m0.triangles);
    EXPECT_EQ(m.vertices, m0.vertices);
    EXPECT_EQ(m.refinement_edge, m0.refinement_edge);
}

TEST(Mesh, BisectClosureRefinesNeighbour)
{
    const auto m = bisect(unit_square(), std::vector<Index>{0});
    EXPECT_EQ(m.num_triangles(), 4);
    EXPECT_EQ(check_invariants(m), "");
}

TEST(Mesh, UniformRefineQuartersEveryTriangle)
{
    const auto m0 = unit_square();
    const auto m = uniform_refine(m0);
    EXPECT_EQ(m.num_triangles(), 4 * m0.num_triangles());
    EXPECT_LT(geometry(m).h_max, geometry(m0).h_max);
    const auto l = uniform_refine(l_shape());
    EXPECT_EQ(l.num_triangles(), 24);
}

TEST(Mesh, MinimumAngleBoundedUnderRefinement)
{
    for (auto m : {unit_square(), l_shape()}) {
        const double a0 = minimum_angle(m);
        double after_two = 0.0;
        for (int k = 1; k <= 5; ++k) {
            m = uniform_refine(m);
            const double a = minimum_angle(m);
            EXPECT_GE(a, a0 / 2.0 - 1e-12);
            if (k == 2) after_two = a;
            if (k > 2) EXPECT_GE(a, after_two - 1e-12);
        }
        // observed: right isosceles classes only, 45 degrees
        EXPECT_NEAR(minimum_angle(m) * 180.0 / std::numbers::pi, 45.0, 1e-9);
    }
}

TEST(Mesh, GeometryReferenceTriangle)
{
    const auto m = build_from_arrays({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}});
    const auto g = geometry(m);
    EXPECT_NEAR(g.diameter[0], std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(g.area[0], 0.5, 1e-15);
    EXPECT_NEAR(geometry(unit_square()).h_max, std::sqrt(2.0), 1e-15);
}

TEST(Mesh, NormalsAndTangents)
{
    const auto m = uniform_refine(l_shape());
    const auto g = geometry(m);
    for (Index e = 0; e < m.num_edges(); ++e) {
        EXPECT_EQ(g.normal[e].dot(g.tangent[e]), 0.0);
        EXPECT_NEAR(g.normal[e].norm(), 1.0, 1e-14);
        EXPECT_NEAR(g.tangent[e].norm(), 1.0, 1e-14);
        const auto [t0, t1] = m.triangles_of_edge[e];
        // nu points away from the lower-indexed triangle (outward on the boundary)
        const Vec2 away = m.edge_midpoint(e) - m.centroid(t0);
        EXPECT_GT(g.normal[e].dot(away), 0.0);
        if (t1 >= 0) EXPECT_GT(t1, t0);
    }
}

TEST(Mesh, BuiltinDomains)
{
    EXPECT_EQ(unit_square().num_triangles(), 2);
    const auto l = l_shape();
    EXPECT_EQ(l.num_triangles(), 6);
    EXPECT_EQ(std::count(l.boundary_vertex.begin(), l.boundary_vertex.end(), true), 8);
    EXPECT_TRUE(std::any_of(l.vertices.begin(), l.vertices.end(), [](const Point2& p) { return p.norm() == 0.0; }));
    EXPECT_EQ(check_invariants(l), "");
    EXPECT_NEAR(total_area(l), 3.0, 1e-14);
}

TEST(Mesh, RandomBisectionProperties)
{
    std::mt19937_64 rng(7);
    for (auto m : {unit_square(), l_shape()}) {
        const double area0 = total_area(m);
        for (int step = 0; step < 8; ++step) {
            std::vector<Index> marked;
            std::bernoulli_distribution coin(0.3);
            for (Index t = 0; t < m.num_triangles(); ++t)
                if (coin(rng)) marked.push_back(t);
            auto ref = bisect_with_parents(m, marked);
            ASSERT_EQ(check_invariants(ref.mesh), "");
            EXPECT_NEAR(total_area(ref.mesh), area0, 1e-12 * area0);
            for (Index t = 0; t < ref.mesh.num_triangles(); ++t)
                for (Index v : ref.mesh.triangles[t]) EXPECT_TRUE(inside_closed(m, ref.parent[t], ref.mesh.vertices[v]));
            for (Index t : marked) {
                const auto children = std::count(ref.parent.begin(), ref.parent.end(), t);
                EXPECT_GE(children, 2);
            }
            m = std::move(ref.mesh);
        }
    }
}

TEST(Mesh, TextFormatRoundTrip)
{
    const auto m = bisect(l_shape(), std::vector<Index>{2});
    std::stringstream ss;
    write_mesh(ss, m);
    const auto back = read_mesh(ss);
    EXPECT_EQ(back.triangles, m.triangles);
    EXPECT_EQ(back.refinement_edge, m.refinement_edge);
    for (Index v = 0; v < m.num_vertices(); ++v) EXPECT_EQ(back.vertices[v], m.vertices[v]);

    std::istringstream with_comments("# square\n4 2\n0 0\n1 0\n1 1\n0 1\n0 1 2 # lower\n0 2 3\n");
    EXPECT_EQ(read_mesh(with_comments).num_edges(), 5);
    std::istringstream bad("4 2\n0 0\n1 0\n1 1\n");
    EXPECT_THROW(read_mesh(bad), MeshError);
}
