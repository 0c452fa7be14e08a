#pragma once

#include "ncfem/assembly.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <limits>

namespace ncfem {

using ColMajorSparse = Eigen::SparseMatrix<double>;

/// Sparse LU factorization with column ordering; reusable for many right-hand sides.
class LinearSolver
{
public:
    LinearSolver() = default;
    explicit LinearSolver(const SparseMatrix& a) { factorize(a); }

    void factorize(const SparseMatrix& a)
    {
        if (a.rows() != a.cols()) throw Error("sparse_solve needs a square matrix");
        a_ = ColMajorSparse(a);
        a_.makeCompressed();
        lu_.analyzePattern(a_);
        lu_.factorize(a_);
        if (lu_.info() != Eigen::Success) throw SingularMatrixError("sparse LU failed: " + lu_.lastErrorMessage());
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return refine(rhs, false); }
    Eigen::VectorXd solve_transpose(const Eigen::VectorXd& rhs) const { return refine(rhs, true); }
    Eigen::Index size() const { return a_.rows(); }

private:
    Eigen::VectorXd raw(const Eigen::VectorXd& rhs, bool transpose) const
    {
        Eigen::VectorXd x;
        if (transpose) x = lu_.transpose().solve(rhs);
        else x = lu_.solve(rhs);
        return x;
    }

    // one step of iterative refinement
    Eigen::VectorXd refine(const Eigen::VectorXd& rhs, bool transpose) const
    {
        if (rhs.size() != a_.rows()) throw Error("right-hand side has the wrong size");
        Eigen::VectorXd x = raw(rhs, transpose);
        const Eigen::VectorXd r = rhs - (transpose ? Eigen::VectorXd(a_.transpose() * x) : Eigen::VectorXd(a_ * x));
        x += raw(r, transpose);
        if (!x.allFinite()) throw SingularMatrixError("linear solve produced non-finite values");
        return x;
    }

    ColMajorSparse a_;
    mutable Eigen::SparseLU<ColMajorSparse, Eigen::COLAMDOrdering<int>> lu_;
};

inline Eigen::VectorXd sparse_solve(const SparseMatrix& a, const Eigen::VectorXd& rhs) { return LinearSolver(a).solve(rhs); }

/// Norms induced by a symmetric positive definite Gram matrix G.
class EnergyNorm
{
public:
    explicit EnergyNorm(const SparseMatrix& gram) : g_(gram)
    {
        if (gram.rows() != gram.cols()) throw Error("Gram matrix must be square");
        ldlt_.compute(g_);
        if (ldlt_.info() != Eigen::Success || (ldlt_.vectorD().array() <= 0.0).any())
            throw Error("Gram matrix is not positive definite");
    }

    double norm(const Eigen::VectorXd& x) const { return std::sqrt(std::max(0.0, x.dot(g_ * x))); }
    /// sqrt(r^T G^{-1} r)
    double dual_norm(const Eigen::VectorXd& r) const { return std::sqrt(std::max(0.0, r.dot(riesz(r)))); }
    /// G^{-1} r
    Eigen::VectorXd riesz(const Eigen::VectorXd& r) const { return ldlt_.solve(r); }
    double inner(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const { return x.dot(g_ * y); }
    const ColMajorSparse& gram() const { return g_; }

private:
    ColMajorSparse g_;
    Eigen::SimplicialLDLT<ColMajorSparse> ldlt_;
};

inline double energy_dual_norm(const Eigen::VectorXd& residual, const SparseMatrix& gram)
{
    return EnergyNorm(gram).dual_norm(residual);
}

namespace detail {

inline void require_spd(const SparseMatrix& g, const char* name)
{
    if (g.rows() != g.cols()) throw Error(std::string(name) + " is not square");
    const SparseMatrix asym = g - SparseMatrix(g.transpose());
    const double scale = g.nonZeros() ? g.coeffs().cwiseAbs().maxCoeff() : 0.0;
    const double defect = asym.nonZeros() ? asym.coeffs().cwiseAbs().maxCoeff() : 0.0;
    if (defect > 1e-12 * scale) throw Error(std::string(name) + " is not symmetric");
}

} // namespace detail

/// Matrices up to this size use the dense generalized eigensolver.
inline constexpr Eigen::Index kDenseEigenCap = 1500;

/**
 * Smallest generalized singular value
 *   beta = min_x max_y x^T B y / (|x|_Gx |y|_Gy),
 * i.e. beta^2 = lambda_min(B Gy^{-1} B^T, Gx). Dense up to kDenseEigenCap unknowns; above that
 * Lanczos on the Gx-selfadjoint operator (B Gy^{-1} B^T)^{-1} Gx with full reorthogonalization.
 */
inline double infsup_constant(const SparseMatrix& b, const SparseMatrix& gx, const SparseMatrix& gy,
                              Eigen::Index dense_cap = kDenseEigenCap, double tol = 1e-8)
{
    detail::require_spd(gx, "Gx");
    detail::require_spd(gy, "Gy");
    if (b.rows() != gx.rows() || b.cols() != gy.rows()) throw Error("infsup_constant: dimension mismatch");
    const Eigen::Index nx = b.rows(), ny = b.cols();
    if (nx == 0) throw Error("infsup_constant: empty space");
    if (nx > ny) return 0.0;

    EnergyNorm ny_norm(gy);
    if (nx <= dense_cap) {
        Eigen::MatrixXd bd = Eigen::MatrixXd(b);
        Eigen::MatrixXd gyinv_bt(ny, nx);
        for (Eigen::Index i = 0; i < nx; ++i) gyinv_bt.col(i) = ny_norm.riesz(bd.row(i).transpose());
        Eigen::MatrixXd c = bd * gyinv_bt;
        c = 0.5 * (c + c.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::MatrixXd(gx), Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw Error("Gx is not positive definite");
        return std::sqrt(std::max(0.0, es.eigenvalues()[0]));
    }

    if (nx != ny) throw Error("infsup_constant: iterative path needs a square B");
    EnergyNorm nx_norm(gx);
    LinearSolver lu(b);
    // K v = B^{-T} Gy B^{-1} Gx v; its largest eigenvalue is 1 / beta^2
    auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        const Eigen::VectorXd w = lu.solve(Eigen::VectorXd(nx_norm.gram() * v));
        return lu.solve_transpose(Eigen::VectorXd(ny_norm.gram() * w));
    };
    const int max_steps = static_cast<int>(std::min<Eigen::Index>(nx, 400));
    std::vector<Eigen::VectorXd> basis;
    std::vector<double> alpha, beta;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(nx);
    for (Eigen::Index i = 0; i < nx; ++i) v[i] += 0.5 * std::sin(1.0 + 7.0 * static_cast<double>(i));
    v /= nx_norm.norm(v);
    double previous = 0.0;
    for (int k = 0; k < max_steps; ++k) {
        basis.push_back(v);
        Eigen::VectorXd w = apply(v);
        const double a = nx_norm.inner(v, w);
        alpha.push_back(a);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) w -= nx_norm.inner(q, w) * q;
        const double bk = nx_norm.norm(w);

        const int m = static_cast<int>(alpha.size());
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            t(i, i) = alpha[i];
            if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        const double theta = es.eigenvalues()[m - 1];
        const double resid = std::abs(bk * es.eigenvectors()(m - 1, m - 1));
        if (theta > 0.0 && (resid <= tol * theta || bk <= 1e-300 || std::abs(theta - previous) <= 1e-14 * theta)) {
            return 1.0 / std::sqrt(theta);
        }
        previous = theta;
        beta.push_back(bk);
        v = w / bk;
    }
    throw Error("infsup_constant: Lanczos iteration did not converge");
}

} // namespace ncfem
