#pragma once

#include "ncfem/problem.hpp"
#include "ncfem/space.hpp"

#include <Eigen/Sparse>

namespace ncfem {

/// Compressed row storage with sorted, unique column indices per row.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

namespace detail {

using Local6 = Eigen::Matrix<double, 6, 6>;
using LocalVec6 = Eigen::Matrix<double, 6, 1>;

inline Mat2 combine_hessians(const std::array<Mat2, 6>& h, const LocalVec6& c, int n)
{
    Mat2 out = Mat2::Zero();
    for (int i = 0; i < n; ++i) out += c[i] * h[i];
    return out;
}

} // namespace detail

/**
 * Element-wise assembly of the discrete forms of one problem on one space.
 *
 * Local matrices are stored test-by-trial: entry (c, j) is form(phi_j, phi_c). Element data
 * that does not depend on the current iterate (stiffness, load, trilinear kernels) is
 * computed once in the constructor.
 *
 * Fourth-order problems (Morley): a_pw(eta, chi) = sum_T int D^2 eta : D^2 chi and
 *   NS: Gamma_pw(eta, chi, phi) = sum_T int lap(eta) (d2 chi d1 phi - d1 chi d2 phi),
 *   vK: Gamma_pw(X, Y, Z) = b(x1,y2,z1) + b(x2,y1,z1) - b(x1,y1,z2),
 *       b(eta, chi, phi) = -1/2 sum_T int [eta, chi] phi.
 * Second-order problems (Crouzeix-Raviart): a_pw(u, v) = sum_T int (A grad u).grad v,
 *   b_pw(u, v) = sum_T int u b.grad v + gamma u v.
 */
class Assembler
{
public:
    Assembler(const FESpace& fe, ProblemSpec problem, int quad_degree = 4)
        : fe_(fe), problem_(std::move(problem))
    {
        const bool morley = fe.space() == Space::Morley;
        if (is_fourth_order(problem_.kind) != morley)
            throw Error(std::string("problem kind ") + to_string(problem_.kind) + " does not match space " +
                        to_string(fe.space()));
        if (!morley && fe.space() != Space::CrouzeixRaviart && fe.space() != Space::P1Conforming)
            throw Error("second-order problems need a Crouzeix-Raviart or P1 space");
        n_ = fe.dofs.per_element;
        const TriangleRule rule = quad_triangle(quad_degree);
        const Index nt = fe.mesh.num_triangles();
        elements_.resize(nt);
        for (Index t = 0; t < nt; ++t) build_element(t, rule);
    }

    const FESpace& space() const { return fe_; }
    const ProblemSpec& problem() const { return problem_; }
    int n_components() const { return components(problem_.kind); }
    Index n_unknowns() const { return static_cast<Index>(n_components()) * fe_.n_free(); }

    /// a_pw on one scalar block.
    SparseMatrix a_pw() const
    {
        return assemble([&](Index t, auto&& add) {
            const auto& el = elements_[t];
            for (int c = 0; c < n_; ++c)
                for (int j = 0; j < n_; ++j) add(c, j, el.a(c, j), 0, 0);
        }, 1);
    }

    /// b_pw (second-order problems only).
    SparseMatrix b_pw() const
    {
        require_second_order("b_pw");
        return assemble([&](Index t, auto&& add) {
            const auto& el = elements_[t];
            for (int c = 0; c < n_; ++c)
                for (int j = 0; j < n_; ++j) add(c, j, el.b(c, j), 0, 0);
        }, 1);
    }

    /// Gram matrix of the energy scalar product: a_pw, block diagonal for coupled systems.
    SparseMatrix energy_gram() const
    {
        const int nc = n_components();
        return assemble([&](Index t, auto&& add) {
            const auto& el = elements_[t];
            for (int k = 0; k < nc; ++k)
                for (int c = 0; c < n_; ++c)
                    for (int j = 0; j < n_; ++j) add(c, j, el.a(c, j), k, k);
        }, nc);
    }

    /// Load functional(s) F (and G for von Karman) on the free dofs.
    Eigen::VectorXd load() const
    {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(n_unknowns());
        const Index nf = fe_.n_free();
        for (Index t = 0; t < fe_.mesh.num_triangles(); ++t) {
            const auto& el = elements_[t];
            for (int c = 0; c < n_; ++c) {
                if (el.free[c] < 0) continue;
                out[el.free[c]] += el.f[c];
                if (n_components() == 2) out[nf + el.free[c]] += el.g[c];
            }
        }
        return out;
    }

    /// Trilinear form Gamma_pw(x, y, z); identically zero for second-order problems.
    double gamma(const DiscreteFunction& x, const DiscreteFunction& y, const DiscreteFunction& z) const
    {
        check_arg(x);
        check_arg(y);
        check_arg(z);
        if (!is_fourth_order(problem_.kind)) return 0.0;
        double sum = 0.0;
        for (Index t = 0; t < fe_.mesh.num_triangles(); ++t) {
            const auto& el = elements_[t];
            if (problem_.kind == ProblemKind::NavierStokesMorley) {
                const auto xl = local(x, t, 0), yl = local(y, t, 0), zl = local(z, t, 0);
                sum += el.lap.dot(xl) * yl.dot(el.S * zl);
            } else {
                const Mat2 x1 = hess(el, local(x, t, 0)), x2 = hess(el, local(x, t, 1));
                const Mat2 y1 = hess(el, local(y, t, 0)), y2 = hess(el, local(y, t, 1));
                const double mz1 = el.mean.dot(local(z, t, 0)), mz2 = el.mean.dot(local(z, t, 1));
                sum += -0.5 * ((bracket(x1, y2) + bracket(x2, y1)) * mz1 - bracket(x1, y1) * mz2);
            }
        }
        return sum;
    }

    /**
     * Gradient of Gamma_pw with respect to one slot (0, 1 or 2) with the other two fixed:
     * entry k is Gamma_pw with basis function k inserted in that slot.
     */
    Eigen::VectorXd gamma_partial(int slot, const DiscreteFunction& p, const DiscreteFunction& q) const
    {
        check_arg(p);
        check_arg(q);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(n_unknowns());
        if (!is_fourth_order(problem_.kind)) return out;
        const Index nf = fe_.n_free();
        for (Index t = 0; t < fe_.mesh.num_triangles(); ++t) {
            const auto& el = elements_[t];
            detail::LocalVec6 v1 = detail::LocalVec6::Zero(), v2 = detail::LocalVec6::Zero();
            if (problem_.kind == ProblemKind::NavierStokesMorley) {
                const auto pl = local(p, t, 0), ql = local(q, t, 0);
                if (slot == 0) v1 = el.lap * pl.dot(el.S * ql);           // (y, z) = (p, q)
                else if (slot == 1) v1 = el.lap.dot(pl) * (el.S * ql);    // (x, z) = (p, q)
                else v1 = el.lap.dot(pl) * (el.S.transpose() * ql);       // (x, y) = (p, q)
            } else {
                const Mat2 p1 = hess(el, local(p, t, 0)), p2 = hess(el, local(p, t, 1));
                if (slot == 2) {
                    const Mat2 q1 = hess(el, local(q, t, 0)), q2 = hess(el, local(q, t, 1));
                    v1 = -0.5 * (bracket(p1, q2) + bracket(p2, q1)) * el.mean;
                    v2 = 0.5 * bracket(p1, q1) * el.mean;
                } else {
                    // the remaining fixed pair is (Y, Z) for slot 0 and (X, Z) for slot 1
                    const double mz1 = el.mean.dot(local(q, t, 0)), mz2 = el.mean.dot(local(q, t, 1));
                    for (int a = 0; a < n_; ++a) {
                        const Mat2& h = el.hess[a];
                        if (slot == 0) {
                            v1[a] = -0.5 * (bracket(h, p2) * mz1 - bracket(h, p1) * mz2);
                            v2[a] = -0.5 * bracket(h, p1) * mz1;
                        } else {
                            v1[a] = -0.5 * (bracket(p2, h) * mz1 - bracket(p1, h) * mz2);
                            v2[a] = -0.5 * bracket(p1, h) * mz1;
                        }
                    }
                }
            }
            for (int a = 0; a < n_; ++a) {
                if (el.free[a] < 0) continue;
                out[el.free[a]] += v1[a];
                if (n_components() == 2) out[nf + el.free[a]] += v2[a];
            }
        }
        return out;
    }

    /// Discrete residual N_h(U; phi_k) for every free test function phi_k.
    Eigen::VectorXd residual(const DiscreteFunction& u) const
    {
        check_arg(u);
        Eigen::VectorXd r = -load();
        const Index nf = fe_.n_free();
        if (problem_.kind == ProblemKind::SecondOrderCR) {
            r += (a_pw() + b_pw()) * u.coeffs;
            return r;
        }
        for (int k = 0; k < n_components(); ++k) {
            Eigen::VectorXd uk = u.component(k);
            r.segment(static_cast<Eigen::Index>(k) * nf, nf) += a_pw_apply(uk);
        }
        r += gamma_partial(2, u, u);
        return r;
    }

    /// Jacobian DN_h(U): entry (k, j) is DN_h(U; phi_j, phi_k).
    SparseMatrix jacobian(const DiscreteFunction& u) const
    {
        check_arg(u);
        switch (problem_.kind) {
        case ProblemKind::SecondOrderCR: {
            SparseMatrix j = a_pw() + b_pw();
            return j;
        }
        case ProblemKind::NavierStokesMorley:
            return assemble([&](Index t, auto&& add) {
                const auto& el = elements_[t];
                const auto ul = local(u, t, 0);
                const double lap_u = el.lap.dot(ul);
                const detail::LocalVec6 su = el.S.transpose() * ul;
                for (int c = 0; c < n_; ++c)
                    for (int j = 0; j < n_; ++j) add(c, j, el.a(c, j) + lap_u * el.S(j, c) + el.lap[j] * su[c], 0, 0);
            }, 1);
        case ProblemKind::VonKarmanMorley:
            return assemble([&](Index t, auto&& add) {
                const auto& el = elements_[t];
                const Mat2 hu = hess(el, local(u, t, 0)), hv = hess(el, local(u, t, 1));
                for (int j = 0; j < n_; ++j) {
                    const double b_jv = bracket(el.hess[j], hv);
                    const double b_uj = bracket(hu, el.hess[j]);
                    for (int c = 0; c < n_; ++c) {
                        add(c, j, el.a(c, j) - b_jv * el.mean[c], 0, 0);
                        add(c, j, -b_uj * el.mean[c], 0, 1);
                        add(c, j, b_uj * el.mean[c], 1, 0);
                        add(c, j, el.a(c, j), 1, 1);
                    }
                }
            }, 2);
        }
        throw Error("unknown problem kind");
    }

    /// Scalar b_pw(eta, chi, phi) = -1/2 sum_T int [eta, chi] phi for single-component Morley functions.
    double vk_b(const DiscreteFunction& eta, const DiscreteFunction& chi, const DiscreteFunction& phi) const
    {
        if (fe_.space() != Space::Morley) throw Error("vk_b needs a Morley space");
        double sum = 0.0;
        for (Index t = 0; t < fe_.mesh.num_triangles(); ++t) {
            const auto& el = elements_[t];
            sum += -0.5 * bracket(hess(el, local(eta, t, 0)), hess(el, local(chi, t, 0))) * el.mean.dot(local(phi, t, 0));
        }
        return sum;
    }

private:
    struct ElementData
    {
        std::array<Index, 6> free{-1, -1, -1, -1, -1, -1};
        detail::Local6 a = detail::Local6::Zero();
        detail::Local6 b = detail::Local6::Zero();
        detail::Local6 S = detail::Local6::Zero(); // S(b, c) = int (d2 phi_b d1 phi_c - d1 phi_b d2 phi_c)
        std::array<Mat2, 6> hess{};
        detail::LocalVec6 lap = detail::LocalVec6::Zero();
        detail::LocalVec6 mean = detail::LocalVec6::Zero(); // int phi_c
        detail::LocalVec6 f = detail::LocalVec6::Zero();
        detail::LocalVec6 g = detail::LocalVec6::Zero();
    };

    void build_element(Index t, const TriangleRule& rule)
    {
        auto& el = elements_[t];
        for (int i = 0; i < n_; ++i) el.free[i] = fe_.dofs.free_dof(t, i);
        const auto q = map_rule(fe_.mesh, t, rule);
        const ElementShape& shape = fe_.shapes[t];
        const Point2 centroid = fe_.mesh.centroid(t);
        const bool pc = problem_.piecewise_constant_coefficients;
        const Mat2 a_c = pc ? problem_.diffusion(centroid) : Mat2::Zero();
        const Vec2 b_c = pc ? problem_.convection(centroid) : Vec2::Zero();
        const double g_c = pc ? problem_.reaction(centroid) : 0.0;

        if (fe_.space() == Space::Morley) {
            const ElementBasis c = shape.eval(centroid);
            for (int i = 0; i < n_; ++i) {
                el.hess[i] = c.hessians[i];
                el.lap[i] = c.hessians[i].trace();
            }
            const double area = fe_.geo.area[t];
            for (int i = 0; i < n_; ++i)
                for (int j = 0; j < n_; ++j) el.a(i, j) = area * (el.hess[i].cwiseProduct(el.hess[j])).sum();
        }

        for (std::size_t k = 0; k < q.points.size(); ++k) {
            const Point2& x = q.points[k];
            const double w = q.weights[k];
            const ElementBasis bs = shape.eval(x);
            const double fx = problem_.load(x);
            const double gx = problem_.kind == ProblemKind::VonKarmanMorley ? problem_.second_load(x) : 0.0;
            for (int c = 0; c < n_; ++c) {
                el.f[c] += w * fx * bs.values[c];
                el.g[c] += w * gx * bs.values[c];
                el.mean[c] += w * bs.values[c];
            }
            if (fe_.space() == Space::Morley) {
                for (int b = 0; b < n_; ++b)
                    for (int c = 0; c < n_; ++c)
                        el.S(b, c) += w * (bs.gradients[b].y() * bs.gradients[c].x() -
                                           bs.gradients[b].x() * bs.gradients[c].y());
            } else {
                const Mat2 A = pc ? a_c : problem_.diffusion(x);
                const Vec2 bb = pc ? b_c : problem_.convection(x);
                const double gam = pc ? g_c : problem_.reaction(x);
                for (int c = 0; c < n_; ++c)
                    for (int j = 0; j < n_; ++j) {
                        el.a(c, j) += w * (A * bs.gradients[j]).dot(bs.gradients[c]);
                        el.b(c, j) += w * (bs.values[j] * bb.dot(bs.gradients[c]) + gam * bs.values[j] * bs.values[c]);
                    }
            }
        }
    }

    void require_second_order(const char* what) const
    {
        if (problem_.kind != ProblemKind::SecondOrderCR) throw Error(std::string(what) + " is defined for second-order problems only");
    }

    void check_arg(const DiscreteFunction& u) const
    {
        check_compatible(fe_, u);
        if (u.n_components != n_components()) throw Error("discrete function has the wrong number of components");
    }

    detail::LocalVec6 local(const DiscreteFunction& u, Index t, int comp) const
    {
        detail::LocalVec6 out = detail::LocalVec6::Zero();
        const auto& el = elements_[t];
        const Index off = static_cast<Index>(comp) * fe_.n_free();
        for (int i = 0; i < n_; ++i)
            if (el.free[i] >= 0) out[i] = u.coeffs[off + el.free[i]];
        return out;
    }

    Mat2 hess(const ElementData& el, const detail::LocalVec6& c) const { return detail::combine_hessians(el.hess, c, n_); }

    Eigen::VectorXd a_pw_apply(const Eigen::VectorXd& x) const
    {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(fe_.n_free());
        for (Index t = 0; t < fe_.mesh.num_triangles(); ++t) {
            const auto& el = elements_[t];
            detail::LocalVec6 xl = detail::LocalVec6::Zero();
            for (int i = 0; i < n_; ++i)
                if (el.free[i] >= 0) xl[i] = x[el.free[i]];
            const detail::LocalVec6 yl = el.a * xl;
            for (int i = 0; i < n_; ++i)
                if (el.free[i] >= 0) y[el.free[i]] += yl[i];
        }
        return y;
    }

    /// Sequential element loop; kernel(t, add) calls add(c, j, value, row_block, col_block).
    template <class Kernel>
    SparseMatrix assemble(Kernel&& kernel, int blocks) const
    {
        const Index nf = fe_.n_free();
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(fe_.mesh.num_triangles()) * n_ * n_ * blocks * blocks);
        for (Index t = 0; t < fe_.mesh.num_triangles(); ++t) {
            const auto& el = elements_[t];
            kernel(t, [&](int c, int j, double value, int rb, int cb) {
                if (el.free[c] < 0 || el.free[j] < 0) return;
                trips.emplace_back(rb * nf + el.free[c], cb * nf + el.free[j], value);
            });
        }
        SparseMatrix m(blocks * nf, blocks * nf);
        m.setFromTriplets(trips.begin(), trips.end());
        m.makeCompressed();
        return m;
    }

    FESpace const& fe_;
    ProblemSpec problem_;
    int n_ = 0;
    std::vector<ElementData> elements_;
};

// Free-function surface -------------------------------------------------------------

inline SparseMatrix assemble_a_pw(const FESpace& fe, const ProblemSpec& problem) { return Assembler(fe, problem).a_pw(); }

inline SparseMatrix assemble_b_pw_cr(const FESpace& fe, const ProblemSpec& problem) { return Assembler(fe, problem).b_pw(); }

inline double gamma_ns(const FESpace& fe, const DiscreteFunction& eta, const DiscreteFunction& chi, const DiscreteFunction& phi)
{
    ProblemSpec ns;
    ns.kind = ProblemKind::NavierStokesMorley;
    return Assembler(fe, ns).gamma(eta, chi, phi);
}

inline double gamma_vk(const FESpace& fe, const DiscreteFunction& xi, const DiscreteFunction& theta, const DiscreteFunction& phi)
{
    ProblemSpec vk;
    vk.kind = ProblemKind::VonKarmanMorley;
    return Assembler(fe, vk).gamma(xi, theta, phi);
}

inline Eigen::VectorXd assemble_residual(const FESpace& fe, const ProblemSpec& problem, const DiscreteFunction& u)
{
    return Assembler(fe, problem).residual(u);
}

inline SparseMatrix assemble_jacobian(const FESpace& fe, const ProblemSpec& problem, const DiscreteFunction& u)
{
    return Assembler(fe, problem).jacobian(u);
}

} // namespace ncfem
