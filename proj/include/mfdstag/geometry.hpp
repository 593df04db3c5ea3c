#pragma once

#include <cmath>

namespace mfdstag {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point&, const Point&) = default;
};

using Vec2 = Point;

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Symmetric 2x2 tensor [[xx, xy], [xy, yy]].
struct Tensor2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  static Tensor2 isotropic(double k) { return {k, 0.0, k}; }

  Vec2 apply(Vec2 v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
  double quadratic(Vec2 v) const { return dot(v, apply(v)); }
  double trace() const { return xx + yy; }
  double min_eigenvalue() const {
    const double m = 0.5 * (xx + yy);
    const double d = std::hypot(0.5 * (xx - yy), xy);
    return m - d;
  }
  friend bool operator==(const Tensor2&, const Tensor2&) = default;
};

}  // namespace mfdstag
