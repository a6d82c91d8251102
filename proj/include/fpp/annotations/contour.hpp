#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fpp/annotations/components.hpp"
#include "fpp/annotations/polygon.hpp"
#include "fpp/core/image.hpp"

namespace fpp {

/// Outer boundary of one 8-connected component, traced along pixel edges.
/// Vertices are pixel corners (pixel (c, r) spans [c, c+1) x [r, r+1)) and
/// only direction changes are emitted. `inside(x, y)` tests membership.
template <typename Inside>
Polygon trace_outer_boundary(int start_x, int start_y, Inside&& inside) {
  struct Dir {
    int dx, dy;
  };
  auto inner = [](Dir d) { return Dir{-d.dy, d.dx}; };
  auto outer = [](Dir d) { return Dir{d.dy, -d.dx}; };
  // Pixel touching corner (vx, vy) on side s of travel direction d, one step ahead.
  auto ahead = [&](int vx, int vy, Dir d, Dir s) {
    return inside(vx + (d.dx + s.dx - 1) / 2, vy + (d.dy + s.dy - 1) / 2);
  };

  Polygon poly;
  int vx = start_x, vy = start_y;
  Dir d{1, 0};
  Dir previous{0, 0};
  do {
    if (d.dx != previous.dx || d.dy != previous.dy) poly.push_back({double(vx), double(vy)});
    previous = d;
    vx += d.dx;
    vy += d.dy;
    if (ahead(vx, vy, d, outer(d)))
      d = outer(d);
    else if (!ahead(vx, vy, d, inner(d)))
      d = inner(d);
  } while (!(vx == start_x && vy == start_y && d.dx == 1 && d.dy == 0));
  return poly;
}

namespace detail {

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = a.x + t * vx - p.x, dy = a.y + t * vy - p.y;
  return std::sqrt(dx * dx + dy * dy);
}

inline void douglas_peucker(const Polygon& pts, std::size_t first, std::size_t last, double tol, std::vector<char>& keep) {
  if (last <= first + 1) return;
  double worst = -1;
  std::size_t index = first;
  for (std::size_t i = first + 1; i < last; ++i) {
    const double d = point_segment_distance(pts[i], pts[first], pts[last]);
    if (d > worst) worst = d, index = i;
  }
  if (worst > tol) {
    keep[index] = 1;
    douglas_peucker(pts, first, index, tol, keep);
    douglas_peucker(pts, index, last, tol, keep);
  }
}

}  // namespace detail

/// Douglas-Peucker on a closed ring, anchored at vertex 0 and the vertex
/// farthest from it.
inline Polygon simplify_closed(const Polygon& ring, double tolerance) {
  if (ring.size() <= 4) return ring;
  std::size_t far = 0;
  double best = -1;
  for (std::size_t i = 1; i < ring.size(); ++i) {
    const double d = std::hypot(ring[i].x - ring[0].x, ring[i].y - ring[0].y);
    if (d > best) best = d, far = i;
  }
  Polygon closed = ring;
  closed.push_back(ring[0]);
  std::vector<char> keep(closed.size(), 0);
  keep[0] = keep[far] = keep[closed.size() - 1] = 1;
  detail::douglas_peucker(closed, 0, far, tolerance, keep);
  detail::douglas_peucker(closed, far, closed.size() - 1, tolerance, keep);
  Polygon out;
  for (std::size_t i = 0; i + 1 < closed.size(); ++i)
    if (keep[i]) out.push_back(closed[i]);
  return out;
}

/// Normalized outer polygon of the largest 8-connected foreground component.
inline Polygon mask_to_polygon(const Mask& mask, double simplify_tolerance = 0.5) {
  const Components comps = label_components(mask, true);
  if (comps.count() == 0) throw EmptyMaskError("mask has no foreground pixels");
  std::int32_t best = 1;
  for (std::size_t i = 1; i < comps.count(); ++i)
    if (comps.areas[i] > comps.areas[static_cast<std::size_t>(best - 1)]) best = static_cast<std::int32_t>(i + 1);

  int sx = -1, sy = -1;
  for (int y = 0; y < mask.height() && sx < 0; ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (comps.labels(x, y) == best) {
        sx = x, sy = y;
        break;
      }

  auto inside = [&](int x, int y) { return comps.labels.contains(x, y) && comps.labels(x, y) == best; };
  Polygon ring = simplify_closed(trace_outer_boundary(sx, sy, inside), simplify_tolerance);
  for (auto& v : ring) {
    v.x /= mask.width();
    v.y /= mask.height();
  }
  return ring;
}

}  // namespace fpp
