#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fpp/core/linalg.hpp"

namespace fpp {

using Polygon = std::vector<Vec2>;

inline double signed_area(const Polygon& poly) {
  double a = 0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

inline double area(const Polygon& poly) { return std::abs(signed_area(poly)); }

/// Area centroid; falls back to the vertex mean for degenerate polygons.
inline Vec2 centroid(const Polygon& poly) {
  const double a = signed_area(poly);
  if (std::abs(a) < 1e-15) {
    Vec2 m;
    for (const auto& p : poly) m.x += p.x, m.y += p.y;
    if (!poly.empty()) m.x /= double(poly.size()), m.y /= double(poly.size());
    return m;
  }
  double cx = 0, cy = 0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % n];
    const double cr = p.x * q.y - q.x * p.y;
    cx += (p.x + q.x) * cr;
    cy += (p.y + q.y) * cr;
  }
  return {cx / (6 * a), cy / (6 * a)};
}

/// Andrew's monotone chain; counter-clockwise (in a y-up sense), no collinear points.
inline Polygon convex_hull(Polygon pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); };
  Polygon hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Point in (or on) a convex polygon with consistent orientation.
inline bool convex_contains(const Polygon& hull, const Vec2& p) {
  if (hull.size() < 3) return false;
  int sign = 0;
  for (std::size_t i = 0, n = hull.size(); i < n; ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % n];
    const double c = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (c == 0) continue;
    const int s = c > 0 ? 1 : -1;
    if (sign == 0)
      sign = s;
    else if (s != sign)
      return false;
  }
  return true;
}

struct BoundingBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double area() const { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }
};

inline BoundingBox bounding_box(const Polygon& poly) {
  BoundingBox b{1e300, 1e300, -1e300, -1e300};
  for (const auto& p : poly) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

inline double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const BoundingBox inter{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  const double i = inter.area();
  const double u = a.area() + b.area() - i;
  return u > 0 ? i / u : 0.0;
}

}  // namespace fpp
