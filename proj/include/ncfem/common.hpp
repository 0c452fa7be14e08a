#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ncfem {

using Index = std::int32_t;
using Point2 = Eigen::Vector2d;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input mesh (duplicate vertices, degenerate or overlapping triangles, hanging nodes).
class MeshError : public Error
{
public:
    using Error::Error;
};

/// A linear system or Gram matrix could not be factorized.
class SingularMatrixError : public Error
{
public:
    using Error::Error;
};

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Rotation by +90 degrees.
inline Vec2 rotate_ccw(const Vec2& v) { return Vec2(-v.y(), v.x()); }

/// cof(H) : G for symmetric 2x2 matrices; cof(H):H = 2 det H.
inline double bracket(const Mat2& h, const Mat2& g)
{
    return h(0, 0) * g(1, 1) + h(1, 1) * g(0, 0) - h(0, 1) * g(1, 0) - h(1, 0) * g(0, 1);
}

} // namespace ncfem
