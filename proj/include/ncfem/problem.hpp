#pragma once

#include "ncfem/common.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ncfem {

using ScalarFn = std::function<double(const Point2&)>;
using VectorFn = std::function<Vec2(const Point2&)>;
using MatrixFn = std::function<Mat2(const Point2&)>;

/// A smooth function with value, gradient and (optionally) hessian.
struct SmoothField
{
    ScalarFn value;
    VectorFn gradient;
    MatrixFn hessian;
};

enum class ProblemKind { SecondOrderCR, NavierStokesMorley, VonKarmanMorley };

inline const char* to_string(ProblemKind k)
{
    switch (k) {
    case ProblemKind::SecondOrderCR: return "SecondOrderCR";
    case ProblemKind::NavierStokesMorley: return "NavierStokesMorley";
    case ProblemKind::VonKarmanMorley: return "VonKarmanMorley";
    }
    return "?";
}

/**
 * Coefficients and loads of one problem family.
 *
 * SecondOrderCR: -div(A grad u + u b) + gamma u = f.
 * NavierStokesMorley: stream-function form with load f.
 * VonKarmanMorley: load f in the first equation; second_load g in the second equation is a
 * verification-only extension (zero for the physical plate system).
 */
struct ProblemSpec
{
    ProblemKind kind = ProblemKind::NavierStokesMorley;
    MatrixFn diffusion = [](const Point2&) { return Mat2::Identity().eval(); };
    VectorFn convection = [](const Point2&) { return Vec2::Zero().eval(); };
    ScalarFn reaction = [](const Point2&) { return 0.0; };
    ScalarFn load = [](const Point2&) { return 0.0; };
    ScalarFn second_load = [](const Point2&) { return 0.0; };
    /// Sample coefficients once per element at the centroid.
    bool piecewise_constant_coefficients = false;
    double lambda_min = 1.0;
    double lambda_max = 1.0;
};

inline bool is_fourth_order(ProblemKind k) { return k != ProblemKind::SecondOrderCR; }
inline int components(ProblemKind k) { return k == ProblemKind::VonKarmanMorley ? 2 : 1; }

/// Registry entry: problem data plus the exact solution when one is known.
struct Manufactured
{
    std::string name;
    ProblemSpec problem;
    std::optional<SmoothField> exact;        // u (or the first component)
    std::optional<SmoothField> exact_second; // v for von Karman
    std::string default_domain = "unit_square";
};

namespace detail {

/// p(t) = t^2 (1 - t)^2 and its derivatives up to order four.
inline std::array<double, 5> bubble1d(double t)
{
    return {t * t * (1 - t) * (1 - t), 2 * t - 6 * t * t + 4 * t * t * t, 2 - 12 * t + 12 * t * t, -12 + 24 * t, 24.0};
}

struct BubbleDerivatives
{
    double u, ux, uy, uxx, uxy, uyy, lap, lap_x, lap_y, bilap;
};

inline BubbleDerivatives bubble2d(const Point2& q)
{
    const auto px = bubble1d(q.x());
    const auto py = bubble1d(q.y());
    BubbleDerivatives d{};
    d.u = px[0] * py[0];
    d.ux = px[1] * py[0];
    d.uy = px[0] * py[1];
    d.uxx = px[2] * py[0];
    d.uxy = px[1] * py[1];
    d.uyy = px[0] * py[2];
    d.lap = d.uxx + d.uyy;
    d.lap_x = px[3] * py[0] + px[1] * py[2];
    d.lap_y = px[2] * py[1] + px[0] * py[3];
    d.bilap = px[4] * py[0] + 2 * px[2] * py[2] + px[0] * py[4];
    return d;
}

inline SmoothField bubble_field()
{
    return {[](const Point2& q) { return bubble2d(q).u; },
            [](const Point2& q) {
                const auto d = bubble2d(q);
                return Vec2(d.ux, d.uy);
            },
            [](const Point2& q) {
                const auto d = bubble2d(q);
                Mat2 h;
                h << d.uxx, d.uxy, d.uxy, d.uyy;
                return h;
            }};
}

} // namespace detail

inline std::vector<std::string> registry_names()
{
    return {"ns_manufactured", "vk_manufactured", "cr_manufactured", "ns_unit_load", "vk_unit_load"};
}

/// Look up a registry entry; throws Error naming the available entries for unknown names.
inline Manufactured manufactured(std::string_view name)
{
    using std::numbers::pi;
    Manufactured m;
    m.name = std::string(name);
    if (name == "ns_manufactured") {
        // u = x^2(1-x)^2 y^2(1-y)^2, f = bilap u + d1((-lap u) d2 u) - d2((-lap u) d1 u)
        m.problem.kind = ProblemKind::NavierStokesMorley;
        m.problem.load = [](const Point2& q) {
            const auto d = detail::bubble2d(q);
            return d.bilap - d.lap_x * d.uy + d.lap_y * d.ux;
        };
        m.exact = detail::bubble_field();
    } else if (name == "vk_manufactured") {
        // u = v = bubble; f = bilap u - [u,v], g = bilap v + [u,u]/2
        m.problem.kind = ProblemKind::VonKarmanMorley;
        m.problem.load = [](const Point2& q) {
            const auto d = detail::bubble2d(q);
            return d.bilap - 2.0 * (d.uxx * d.uyy - d.uxy * d.uxy);
        };
        m.problem.second_load = [](const Point2& q) {
            const auto d = detail::bubble2d(q);
            return d.bilap + (d.uxx * d.uyy - d.uxy * d.uxy);
        };
        m.exact = detail::bubble_field();
        m.exact_second = detail::bubble_field();
    } else if (name == "cr_manufactured") {
        // u = sin(pi x) sin(pi y), A = I, b = (1,1), gamma = -20
        m.problem.kind = ProblemKind::SecondOrderCR;
        m.problem.convection = [](const Point2&) { return Vec2(1.0, 1.0); };
        m.problem.reaction = [](const Point2&) { return -20.0; };
        m.problem.load = [](const Point2& q) {
            const double sx = std::sin(pi * q.x()), sy = std::sin(pi * q.y());
            const double cx = std::cos(pi * q.x()), cy = std::cos(pi * q.y());
            return (2.0 * pi * pi - 20.0) * sx * sy - pi * (cx * sy + sx * cy);
        };
        m.exact = SmoothField{[](const Point2& q) { return std::sin(pi * q.x()) * std::sin(pi * q.y()); },
                              [](const Point2& q) {
                                  return Vec2(pi * std::cos(pi * q.x()) * std::sin(pi * q.y()),
                                              pi * std::sin(pi * q.x()) * std::cos(pi * q.y()));
                              },
                              [](const Point2& q) {
                                  const double sx = std::sin(pi * q.x()), sy = std::sin(pi * q.y());
                                  const double cx = std::cos(pi * q.x()), cy = std::cos(pi * q.y());
                                  Mat2 h;
                                  h << -pi * pi * sx * sy, pi * pi * cx * cy, pi * pi * cx * cy, -pi * pi * sx * sy;
                                  return h;
                              }};
    } else if (name == "ns_unit_load") {
        m.problem.kind = ProblemKind::NavierStokesMorley;
        m.problem.load = [](const Point2&) { return 1.0; };
        m.default_domain = "l_shape";
    } else if (name == "vk_unit_load") {
        m.problem.kind = ProblemKind::VonKarmanMorley;
        m.problem.load = [](const Point2&) { return 1.0; };
        m.default_domain = "l_shape";
    } else {
        std::string list;
        for (const auto& n : registry_names()) list += (list.empty() ? "" : ", ") + n;
        throw Error("unknown problem '" + std::string(name) + "'; available: " + list);
    }
    return m;
}

inline Manufactured manufactured(ProblemKind kind, std::string_view name)
{
    auto m = manufactured(name);
    if (m.problem.kind != kind)
        throw Error("problem '" + std::string(name) + "' is not of kind " + to_string(kind));
    return m;
}

} // namespace ncfem
