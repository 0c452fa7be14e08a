#pragma once

#include "ncfem/common.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace ncfem {

/// Quadrature on the reference triangle; points are barycentric triples and the weights
/// sum to the reference area 1/2.
struct TriangleRule
{
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;
    int exact_degree = 0;
};

/// Quadrature on [0,1]; weights sum to 1.
struct EdgeRule
{
    std::vector<double> points;
    std::vector<double> weights;
    int exact_degree = 0;
};

/// n-point Gauss-Legendre rule on [0,1] (Newton iteration on the Legendre recurrence).
inline EdgeRule gauss_legendre(int n)
{
    if (n < 1) throw Error("Gauss-Legendre rule needs at least one point");
    EdgeRule rule;
    rule.points.resize(n);
    rule.weights.resize(n);
    rule.exact_degree = 2 * n - 1;
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            const double pn = n == 1 ? x : p1;
            const double pm = n == 1 ? 1.0 : p0;
            dp = n * (x * pn - pm) / (x * x - 1.0);
            const double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.points[n - 1 - i] = 0.5 * (x + 1.0);
        rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

/// Gauss rule on [0,1] exact for polynomials of the given degree.
inline EdgeRule quad_edge(int degree)
{
    if (degree < 0 || degree > 19) throw Error("unsupported edge quadrature degree " + std::to_string(degree));
    return gauss_legendre(degree / 2 + 1);
}

/**
 * Collapsed (Duffy) Gauss product rule on the reference triangle exact for the given degree.
 *
 * (s, t) in [0,1]^2 maps to (xi, eta) = (s, (1 - s) t) with Jacobian 1 - s; all weights are
 * positive and all points interior.
 */
inline TriangleRule quad_triangle(int degree)
{
    if (degree < 1 || degree > 6) throw Error("unsupported triangle quadrature degree " + std::to_string(degree));
    const EdgeRule gs = gauss_legendre((degree + 2) / 2 + ((degree + 2) % 2));
    const EdgeRule gt = gauss_legendre((degree + 1) / 2 + ((degree + 1) % 2));
    TriangleRule rule;
    rule.exact_degree = std::min(2 * static_cast<int>(gs.points.size()) - 2, 2 * static_cast<int>(gt.points.size()) - 1);
    for (std::size_t i = 0; i < gs.points.size(); ++i) {
        for (std::size_t j = 0; j < gt.points.size(); ++j) {
            const double s = gs.points[i];
            const double xi = s;
            const double eta = (1.0 - s) * gt.points[j];
            rule.points.push_back({1.0 - xi - eta, xi, eta});
            rule.weights.push_back(gs.weights[i] * gt.weights[j] * (1.0 - s));
        }
    }
    return rule;
}

} // namespace ncfem
