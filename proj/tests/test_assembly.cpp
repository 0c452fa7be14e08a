#include "ncfem/ncfem.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ncfem;

namespace {

Triangulation refined(BuiltinDomain d, int k)
{
    auto m = builtin_domain(d);
    for (int i = 0; i < k; ++i) m = uniform_refine(m);
    return m;
}

DiscreteFunction random_fn(const FESpace& fe, int nc, std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    auto u = DiscreteFunction::zero(fe, nc);
    for (Eigen::Index i = 0; i < u.size(); ++i) u.coeffs[i] = n(rng);
    return u;
}

double max_abs(const SparseMatrix& a)
{
    double m = 0.0;
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

ProblemSpec kind(ProblemKind k)
{
    ProblemSpec p;
    p.kind = k;
    return p;
}

} // namespace

TEST(Assembly, MorleyStiffnessSymmetricPositiveDefinite)
{
    for (auto d : {BuiltinDomain::UnitSquare, BuiltinDomain::LShape}) {
        for (int k = 1; k <= 2; ++k) {
            const auto fe = make_space(refined(d, k), Space::Morley);
            const SparseMatrix a = assemble_a_pw(fe, kind(ProblemKind::NavierStokesMorley));
            EXPECT_LE(max_abs(SparseMatrix(a - SparseMatrix(a.transpose()))), 1e-12 * max_abs(a));
            for (Index i = 0; i < fe.n_free(); ++i) EXPECT_GT(a.coeff(i, i), 0.0);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(a)};
            EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
        }
    }
}

TEST(Assembly, CrStiffnessClosedForm)
{
    // Reference element: psi_i = 1 - 2 lambda_i, so int grad psi_i . grad psi_j = 4 |T| grad lambda_i . grad lambda_j.
    const auto ref = make_space(build_from_arrays({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}), Space::CrouzeixRaviart);
    Eigen::Matrix3d expected;
    expected << 4, -2, -2, -2, 2, 0, -2, 0, 2;
    const auto rule = quad_triangle(2);
    const auto q = map_rule(ref.mesh, 0, rule);
    Eigen::Matrix3d got = Eigen::Matrix3d::Zero();
    for (std::size_t k = 0; k < q.points.size(); ++k) {
        const auto b = element_basis(ref, 0, q.points[k]);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) got(i, j) += q.weights[k] * b.gradients[i].dot(b.gradients[j]);
    }
    EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-13);

    // Two-triangle square: the single free dof (diagonal) collects 4 from each triangle.
    const auto sq = make_space(builtin_domain(BuiltinDomain::UnitSquare), Space::CrouzeixRaviart);
    const SparseMatrix a = assemble_a_pw(sq, kind(ProblemKind::SecondOrderCR));
    ASSERT_EQ(a.rows(), 1);
    EXPECT_NEAR(a.coeff(0, 0), 8.0, 1e-13);
}

TEST(Assembly, CrLowerOrderTerms)
{
    const auto fe = make_space(refined(BuiltinDomain::UnitSquare, 2), Space::CrouzeixRaviart);
    auto p = kind(ProblemKind::SecondOrderCR);
    EXPECT_EQ(max_abs(assemble_b_pw_cr(fe, p)), 0.0);

    p.reaction = [](const Point2&) { return 1.0; };
    const SparseMatrix m = assemble_b_pw_cr(fe, p);
    EXPECT_LE(max_abs(SparseMatrix(m - SparseMatrix(m.transpose()))), 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(m)};
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(Assembly, IndefiniteReactionHasNegativeEigenvalue)
{
    // first Dirichlet eigenvalue of the unit square is 2 pi^2 ~ 19.74
    const auto fe = make_space(refined(BuiltinDomain::UnitSquare, 3), Space::CrouzeixRaviart);
    auto p = kind(ProblemKind::SecondOrderCR);
    p.reaction = [](const Point2&) { return -30.0; };
    const Assembler as(fe, p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(as.a_pw() + as.b_pw())};
    EXPECT_LT(eig.eigenvalues().minCoeff(), 0.0);
    p.reaction = [](const Point2&) { return -10.0; };
    const Assembler pos(fe, p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig2{Eigen::MatrixXd(pos.a_pw() + pos.b_pw())};
    EXPECT_GT(eig2.eigenvalues().minCoeff(), 0.0);
}

TEST(Assembly, GammaNsAntisymmetry)
{
    std::mt19937_64 rng(21);
    for (auto d : {BuiltinDomain::UnitSquare, BuiltinDomain::LShape}) {
        const auto fe = make_space(refined(d, 2), Space::Morley);
        EXPECT_TRUE(check_gamma_antisymmetry(fe, rng).passed());
        for (int s = 0; s < 10; ++s) {
            const auto x = random_fn(fe, 1, rng), y = random_fn(fe, 1, rng), z = random_fn(fe, 1, rng);
            const double g = gamma_ns(fe, x, y, z);
            EXPECT_NEAR(g, -gamma_ns(fe, x, z, y), 1e-11 * (1.0 + std::abs(g)));
            const auto zero = DiscreteFunction::zero(fe);
            EXPECT_EQ(gamma_ns(fe, zero, y, z), 0.0);
            EXPECT_EQ(gamma_ns(fe, x, zero, z), 0.0);
            EXPECT_EQ(gamma_ns(fe, x, y, zero), 0.0);
        }
    }
}

TEST(Assembly, VonKarmanBracket)
{
    std::mt19937_64 rng(22);
    const auto fe = make_space(refined(BuiltinDomain::LShape, 2), Space::Morley);
    EXPECT_TRUE(check_bracket_symmetry(fe, rng).passed());

    Mat2 h;
    h << 1.5, -0.25, -0.25, 3.0;
    EXPECT_NEAR(bracket(h, h), 2.0 * h.determinant(), 1e-14);
    Mat2 g;
    g << -2.0, 0.7, 0.7, 0.4;
    EXPECT_EQ(bracket(h, g), bracket(g, h));

    // zero second components: only -b_pw(xi1, theta1, phi2) survives
    const Assembler as(fe, kind(ProblemKind::VonKarmanMorley));
    for (int s = 0; s < 5; ++s) {
        auto xi = random_fn(fe, 2, rng), th = random_fn(fe, 2, rng), ph = random_fn(fe, 2, rng);
        xi.component(1).setZero();
        th.component(1).setZero();
        DiscreteFunction x1{Space::Morley, 1, xi.component(0)}, t1{Space::Morley, 1, th.component(0)};
        DiscreteFunction p2{Space::Morley, 1, ph.component(1)};
        EXPECT_NEAR(gamma_vk(fe, xi, th, ph), -as.vk_b(x1, t1, p2), 1e-10);
    }
}

TEST(Assembly, ResidualAtZero)
{
    const auto fe = make_space(refined(BuiltinDomain::UnitSquare, 2), Space::Morley);
    for (auto k : {ProblemKind::NavierStokesMorley, ProblemKind::VonKarmanMorley}) {
        const auto r = assemble_residual(fe, kind(k), DiscreteFunction::zero(fe, components(k)));
        EXPECT_EQ(r.cwiseAbs().maxCoeff(), 0.0);
    }
    const auto cr = make_space(refined(BuiltinDomain::UnitSquare, 2), Space::CrouzeixRaviart);
    EXPECT_EQ(assemble_residual(cr, kind(ProblemKind::SecondOrderCR), DiscreteFunction::zero(cr)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Assembly, ResidualVanishesAtDiscreteSolution)
{
    for (const char* name : {"ns_manufactured", "vk_manufactured", "cr_manufactured"}) {
        const auto m = manufactured(name);
        const auto fe = make_space(refined(BuiltinDomain::UnitSquare, 2), space_for(m.problem.kind));
        const auto res = newton_solve(fe, m.problem, DiscreteFunction::zero(fe, components(m.problem.kind)));
        ASSERT_TRUE(res.trace.converged) << name;
        const Assembler as(fe, m.problem);
        EXPECT_LE(energy_dual_norm(as.residual(res.solution), as.energy_gram()), 1e-10) << name;
    }
}

TEST(Assembly, InterpolantResidualDecays)
{
    const auto m = manufactured("ns_manufactured");
    std::vector<double> norms, hs;
    auto mesh = refined(BuiltinDomain::UnitSquare, 2);
    for (int k = 0; k < 3; ++k) {
        const auto fe = make_space(mesh, Space::Morley);
        const Assembler as(fe, m.problem);
        norms.push_back(energy_dual_norm(as.residual(morley_interpolate(fe, *m.exact)), as.energy_gram()));
        hs.push_back(fe.geo.h_max);
        mesh = uniform_refine(mesh);
    }
    for (int k = 1; k < 3; ++k) EXPECT_GE(std::log(norms[k - 1] / norms[k]) / std::log(hs[k - 1] / hs[k]), 0.85);
}

TEST(Assembly, JacobianMatchesFiniteDifferences)
{
    std::mt19937_64 rng(23);
    const auto mesh = refined(BuiltinDomain::LShape, 1);
    const auto morley = make_space(mesh, Space::Morley);
    const auto cr = make_space(mesh, Space::CrouzeixRaviart);
    for (const char* name : {"ns_manufactured", "vk_manufactured"}) {
        const auto c = check_jacobian_fd(morley, manufactured(name).problem, rng, 20);
        EXPECT_LE(c.defect, 1e-6) << name;
    }
    EXPECT_LE(check_jacobian_fd(cr, manufactured("cr_manufactured").problem, rng, 20).defect, 1e-6);
    EXPECT_FALSE(check_jacobian_fd(morley, manufactured("ns_manufactured").problem, rng, 1, true).passed());
}

TEST(Assembly, JacobianStructure)
{
    std::mt19937_64 rng(24);
    const auto fe = make_space(refined(BuiltinDomain::UnitSquare, 2), Space::Morley);
    const auto ns = kind(ProblemKind::NavierStokesMorley);
    const SparseMatrix a = assemble_a_pw(fe, ns);
    EXPECT_LE(max_abs(SparseMatrix(assemble_jacobian(fe, ns, DiscreteFunction::zero(fe)) - a)), 1e-14);

    const auto u1 = random_fn(fe, 1, rng), u2 = random_fn(fe, 1, rng);
    DiscreteFunction sum = u1;
    sum.coeffs += u2.coeffs;
    const SparseMatrix defect = assemble_jacobian(fe, ns, sum) - assemble_jacobian(fe, ns, u1) -
                                assemble_jacobian(fe, ns, u2) + assemble_jacobian(fe, ns, DiscreteFunction::zero(fe));
    EXPECT_LE(max_abs(defect), 1e-12 * max_abs(a));

    const auto cr = make_space(refined(BuiltinDomain::UnitSquare, 2), Space::CrouzeixRaviart);
    const auto p = manufactured("cr_manufactured").problem;
    const Assembler as(cr, p);
    const SparseMatrix ab = as.a_pw() + as.b_pw();
    EXPECT_EQ(max_abs(SparseMatrix(as.jacobian(random_fn(cr, 1, rng)) - ab)), 0.0);
}

TEST(Assembly, SparseRowsSortedUnique)
{
    const auto fe = make_space(refined(BuiltinDomain::LShape, 2), Space::Morley);
    SparseMatrix j = assemble_jacobian(fe, kind(ProblemKind::VonKarmanMorley), DiscreteFunction::zero(fe, 2));
    EXPECT_TRUE(j.isCompressed());
    EXPECT_EQ(j.rows(), 2 * fe.n_free());
    for (int r = 0; r < j.outerSize(); ++r) {
        Eigen::Index prev = -1;
        for (SparseMatrix::InnerIterator it(j, r); it; ++it) {
            EXPECT_GT(it.col(), prev);
            prev = it.col();
        }
    }
}

TEST(Assembly, ProblemSpaceMismatchThrows)
{
    const auto cr = make_space(builtin_domain(BuiltinDomain::UnitSquare), Space::CrouzeixRaviart);
    EXPECT_THROW(Assembler(cr, kind(ProblemKind::NavierStokesMorley)), Error);
    const auto mo = make_space(builtin_domain(BuiltinDomain::UnitSquare), Space::Morley);
    EXPECT_THROW(Assembler(mo, kind(ProblemKind::SecondOrderCR)), Error);
}

TEST(Manufactured, ExactSolutionIsClamped)
{
    const auto m = manufactured("ns_manufactured");
    for (double s : {0.0, 0.13, 0.5, 0.77, 1.0}) {
        for (const Point2& p : {Point2(s, 0), Point2(s, 1), Point2(0, s), Point2(1, s)}) {
            EXPECT_EQ(m.exact->value(p), 0.0);
            EXPECT_EQ(m.exact->gradient(p).norm(), 0.0);
        }
    }
}

TEST(Manufactured, LoadsMatchSymbolicOracle)
{
    // values from an independent symbolic differentiation
    const std::array<Point2, 3> pts{Point2(0.5, 0.5), Point2(0.25, 2.0 / 3.0), Point2(0.1, 0.7)};
    const std::array<double, 3> ns{5.0, 2.3617192858367627, 0.294587380736};
    const std::array<double, 3> vkf{4.9921875, 2.3632330246913580, 0.297512284256};
    const std::array<double, 3> vkg{5.00390625, 2.3617862654320988, 0.295243857872};
    const std::array<double, 3> cr{-0.26079119782128276, -0.97280535172104729, -1.9117796299457774};
    const auto mns = manufactured("ns_manufactured");
    const auto mvk = manufactured("vk_manufactured");
    const auto mcr = manufactured("cr_manufactured");
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(mns.problem.load(pts[i]), ns[i], 1e-13);
        EXPECT_NEAR(mvk.problem.load(pts[i]), vkf[i], 1e-13);
        EXPECT_NEAR(mvk.problem.second_load(pts[i]), vkg[i], 1e-13);
        EXPECT_NEAR(mcr.problem.load(pts[i]), cr[i], 1e-13);
    }
}

TEST(Manufactured, UnknownNameNamesRegistry)
{
    try {
        manufactured("nope");
        FAIL();
    } catch (const Error& e) {
        for (const auto& n : registry_names()) EXPECT_NE(std::string(e.what()).find(n), std::string::npos);
    }
    EXPECT_THROW(manufactured(ProblemKind::SecondOrderCR, "ns_manufactured"), Error);
}
