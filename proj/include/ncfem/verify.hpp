#pragma once

#include "ncfem/interpolation.hpp"
#include "ncfem/linalg.hpp"

#include <random>

namespace ncfem {

struct CheckResult
{
    std::string name;
    double defect = 0.0;
    double threshold = 0.0;
    bool passed() const { return defect <= threshold; }
};

namespace detail {

/// Random polynomial of total degree <= deg with standard normal coefficients.
struct RandomPolynomial
{
    int degree = 0;
    std::vector<std::array<int, 2>> powers;
    std::vector<double> coeffs;

    RandomPolynomial(int deg, std::mt19937_64& rng) : degree(deg)
    {
        std::normal_distribution<double> normal;
        for (int d = 0; d <= deg; ++d)
            for (int a = 0; a <= d; ++a) {
                powers.push_back({a, d - a});
                coeffs.push_back(normal(rng));
            }
    }

    SmoothField field() const
    {
        auto self = *this;
        auto mono = [](double x, int p) { return p < 0 ? 0.0 : std::pow(x, p); };
        return {[=](const Point2& q) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < self.powers.size(); ++i)
                        s += self.coeffs[i] * mono(q.x(), self.powers[i][0]) * mono(q.y(), self.powers[i][1]);
                    return s;
                },
                [=](const Point2& q) {
                    Vec2 g = Vec2::Zero();
                    for (std::size_t i = 0; i < self.powers.size(); ++i) {
                        const auto [a, b] = self.powers[i];
                        g.x() += self.coeffs[i] * a * mono(q.x(), a - 1) * mono(q.y(), b);
                        g.y() += self.coeffs[i] * b * mono(q.x(), a) * mono(q.y(), b - 1);
                    }
                    return g;
                },
                [=](const Point2& q) {
                    Mat2 h = Mat2::Zero();
                    for (std::size_t i = 0; i < self.powers.size(); ++i) {
                        const auto [a, b] = self.powers[i];
                        const double c = self.coeffs[i];
                        h(0, 0) += c * a * (a - 1) * mono(q.x(), a - 2) * mono(q.y(), b);
                        h(1, 1) += c * b * (b - 1) * mono(q.x(), a) * mono(q.y(), b - 2);
                        h(0, 1) += c * a * b * mono(q.x(), a - 1) * mono(q.y(), b - 1);
                    }
                    h(1, 0) = h(0, 1);
                    return h;
                }};
    }
};

inline double factorial(int n) { return std::tgamma(n + 1.0); }

inline DiscreteFunction random_function(const FESpace& fe, int ncomp, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    DiscreteFunction f = DiscreteFunction::zero(fe, ncomp);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.coeffs[i] = normal(rng);
    return f;
}

} // namespace detail

/// max |Gamma_pw(eta, chi, chi)| over random pairs normalized to unit energy norm.
inline CheckResult check_gamma_antisymmetry(const FESpace& fe, std::mt19937_64& rng, int samples = 100)
{
    ProblemSpec ns;
    ns.kind = ProblemKind::NavierStokesMorley;
    const Assembler as(fe, ns);
    const EnergyNorm energy(as.energy_gram());
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        auto eta = detail::random_function(fe, 1, rng);
        auto chi = detail::random_function(fe, 1, rng);
        eta.coeffs /= energy.norm(eta.coeffs);
        chi.coeffs /= energy.norm(chi.coeffs);
        worst = std::max(worst, std::abs(as.gamma(eta, chi, chi)));
    }
    return {"gamma_ns_antisymmetry", worst, 1e-12};
}

/// max |b_pw(eta, chi, phi) - b_pw(chi, eta, phi)| for unit-norm random functions.
inline CheckResult check_bracket_symmetry(const FESpace& fe, std::mt19937_64& rng, int samples = 100)
{
    ProblemSpec vk;
    vk.kind = ProblemKind::VonKarmanMorley;
    const Assembler as(fe, vk);
    ProblemSpec ns;
    const EnergyNorm energy(Assembler(fe, ns).a_pw());
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        std::array<DiscreteFunction, 3> f{detail::random_function(fe, 1, rng), detail::random_function(fe, 1, rng),
                                          detail::random_function(fe, 1, rng)};
        for (auto& x : f) x.coeffs /= energy.norm(x.coeffs);
        worst = std::max(worst, std::abs(as.vk_b(f[0], f[1], f[2]) - as.vk_b(f[1], f[0], f[2])));
    }
    return {"vk_bracket_symmetry", worst, 1e-12};
}

/// max over elements of |D^2 I_M v - Pi_0 D^2 v| for random polynomials of degree <= 4.
inline CheckResult check_morley_commuting(const FESpace& fe, std::mt19937_64& rng, int samples = 20)
{
    const TriangleRule rule = quad_triangle(6);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const auto v = detail::RandomPolynomial(4, rng).field();
        for (Index t = 0; t < fe.mesh.num_triangles(); ++t) {
            const auto q = map_rule(fe.mesh, t, rule);
            Mat2 mean = Mat2::Zero();
            for (std::size_t i = 0; i < q.points.size(); ++i) mean += q.weights[i] * v.hessian(q.points[i]);
            mean /= fe.geo.area[t];
            const auto dofs = morley_local_dofs(fe, v, t);
            const auto basis = fe.shapes[t].eval(fe.mesh.centroid(t));
            Mat2 h = Mat2::Zero();
            for (int i = 0; i < 6; ++i) h += dofs[i] * basis.hessians[i];
            worst = std::max(worst, (h - mean).cwiseAbs().maxCoeff());
        }
    }
    return {"morley_commuting_identity", worst, 1e-10};
}

/// max over elements of |grad I_CR v - Pi_0 grad v| for random polynomials of degree <= 4.
inline CheckResult check_cr_commuting(const FESpace& fe, std::mt19937_64& rng, int samples = 20)
{
    const TriangleRule rule = quad_triangle(6);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const auto v = detail::RandomPolynomial(4, rng).field();
        for (Index t = 0; t < fe.mesh.num_triangles(); ++t) {
            const auto q = map_rule(fe.mesh, t, rule);
            Vec2 mean = Vec2::Zero();
            for (std::size_t i = 0; i < q.points.size(); ++i) mean += q.weights[i] * v.gradient(q.points[i]);
            mean /= fe.geo.area[t];
            const auto dofs = cr_local_dofs(fe, v, t);
            const auto basis = fe.shapes[t].eval(fe.mesh.centroid(t));
            Vec2 g = Vec2::Zero();
            for (int i = 0; i < 3; ++i) g += dofs[i] * basis.gradients[i];
            worst = std::max(worst, (g - mean).cwiseAbs().maxCoeff());
        }
    }
    return {"cr_commuting_identity", worst, 1e-10};
}

/**
 * max |J - J_fd| / max |J| with J_fd from central differences of the residual (step 1e-6),
 * over random states. @p perturb corrupts one Jacobian entry.
 */
inline CheckResult check_jacobian_fd(const FESpace& fe, const ProblemSpec& problem, std::mt19937_64& rng, int states = 5,
                                     bool perturb = false)
{
    const Assembler as(fe, problem);
    const int nc = as.n_components();
    const double step = 1e-6;
    double worst = 0.0;
    for (int s = 0; s < states; ++s) {
        const auto u = detail::random_function(fe, nc, rng);
        Eigen::MatrixXd jac = Eigen::MatrixXd(as.jacobian(u));
        if (perturb && jac.size() > 0) jac(0, 0) += 1e-3 * std::max(1.0, std::abs(jac(0, 0)));
        Eigen::MatrixXd fd(jac.rows(), jac.cols());
        for (Eigen::Index j = 0; j < jac.cols(); ++j) {
            auto up = u, um = u;
            up.coeffs[j] += step;
            um.coeffs[j] -= step;
            fd.col(j) = (as.residual(up) - as.residual(um)) / (2.0 * step);
        }
        const double scale = std::max(jac.cwiseAbs().maxCoeff(), 1e-300);
        worst = std::max(worst, (jac - fd).cwiseAbs().maxCoeff() / scale);
    }
    return {std::string("jacobian_fd_") + to_string(problem.kind), worst, 1e-6};
}

/// Relative error of every triangle and edge rule on random polynomials up to its exact degree.
inline CheckResult check_quadrature(std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int deg = 1; deg <= 6; ++deg) {
        const auto rule = quad_triangle(deg);
        for (int trial = 0; trial < 5; ++trial) {
            double exact = 0.0, approx = 0.0, scale = 0.0;
            for (int d = 0; d <= rule.exact_degree; ++d)
                for (int a = 0; a <= d; ++a) {
                    const int b = d - a;
                    const double c = normal(rng);
                    // int_{ref} x^a y^b = a! b! / (a + b + 2)!
                    const double m = detail::factorial(a) * detail::factorial(b) / detail::factorial(a + b + 2);
                    exact += c * m;
                    scale += std::abs(c) * m;
                    for (std::size_t k = 0; k < rule.points.size(); ++k)
                        approx += rule.weights[k] * c * std::pow(rule.points[k][1], a) * std::pow(rule.points[k][2], b);
                }
            worst = std::max(worst, std::abs(approx - exact) / scale);
        }
    }
    for (int deg = 0; deg <= 19; ++deg) {
        const auto rule = quad_edge(deg);
        double exact = 0.0, approx = 0.0, scale = 0.0;
        for (int p = 0; p <= rule.exact_degree; ++p) {
            const double c = normal(rng);
            exact += c / (p + 1.0);
            scale += std::abs(c) / (p + 1.0);
            for (std::size_t k = 0; k < rule.points.size(); ++k) approx += rule.weights[k] * c * std::pow(rule.points[k], p);
        }
        worst = std::max(worst, std::abs(approx - exact) / scale);
    }
    return {"quadrature_exactness", worst, 1e-12};
}

/// max |dof_j(phi_i) - delta_ij| over all elements, dofs evaluated from the constructed basis.
inline CheckResult check_morley_duality(const FESpace& fe)
{
    if (fe.space() != Space::Morley) throw Error("duality check needs a Morley space");
    double worst = 0.0;
    for (Index t = 0; t < fe.mesh.num_triangles(); ++t) {
        Eigen::Matrix<double, 6, 6> d;
        for (int j = 0; j < 3; ++j) {
            const auto bv = fe.shapes[t].eval(fe.mesh.vertices[fe.mesh.triangles[t][j]]);
            const Index e = fe.mesh.edge_of_triangle[t][j];
            const auto be = fe.shapes[t].eval(fe.mesh.edge_midpoint(e));
            for (int i = 0; i < 6; ++i) {
                d(j, i) = bv.values[i];
                d(3 + j, i) = be.gradients[i].dot(fe.geo.normal[e]);
            }
        }
        worst = std::max(worst, (d - Eigen::Matrix<double, 6, 6>::Identity()).cwiseAbs().maxCoeff());
    }
    return {"morley_dof_duality", worst, 1e-12};
}

/// The identity suite on one mesh.
inline std::vector<CheckResult> run_identity_suite(const Triangulation& mesh, std::uint64_t seed, bool perturb_jacobian = false)
{
    std::mt19937_64 rng(seed);
    const FESpace morley = make_space(mesh, Space::Morley);
    const FESpace cr = make_space(mesh, Space::CrouzeixRaviart);
    std::vector<CheckResult> out;
    out.push_back(check_gamma_antisymmetry(morley, rng));
    out.push_back(check_bracket_symmetry(morley, rng));
    out.push_back(check_morley_commuting(morley, rng));
    out.push_back(check_cr_commuting(cr, rng));
    out.push_back(check_jacobian_fd(morley, manufactured("ns_manufactured").problem, rng, 5, perturb_jacobian));
    out.push_back(check_jacobian_fd(morley, manufactured("vk_manufactured").problem, rng, 5, perturb_jacobian));
    out.push_back(check_jacobian_fd(cr, manufactured("cr_manufactured").problem, rng, 5, perturb_jacobian));
    out.push_back(check_quadrature(rng));
    out.push_back(check_morley_duality(morley));
    return out;
}

} // namespace ncfem
