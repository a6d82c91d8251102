#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fpp/annotations/labels.hpp"
#include "fpp/core/image.hpp"

namespace fpp {

/// Even-odd scanline fill of a polygon given in pixel units (pixel (c, r)
/// spans [c, c+1) x [r, r+1)); a pixel is set when its centre is inside.
inline Mask rasterize_pixels(const Polygon& poly, int width, int height) {
  Mask mask(width, height);
  if (poly.size() < 3) return mask;
  std::vector<double> xs;
  for (int r = 0; r < height; ++r) {
    const double y = r + 0.5;
    xs.clear();
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % n];
      if ((a.y <= y && y < b.y) || (b.y <= y && y < a.y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    auto row = mask.row(r);
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      // centres c + 0.5 in [x_in, x_out)
      const int c0 = std::max(0, static_cast<int>(std::ceil(xs[i] - 0.5)));
      const int c1 = std::min(width - 1, static_cast<int>(std::ceil(xs[i + 1] - 0.5)) - 1);
      for (int c = c0; c <= c1; ++c) row[static_cast<std::size_t>(c)] ^= 1;
    }
  }
  return mask;
}

inline Polygon to_pixels(const Polygon& normalized, int width, int height) {
  Polygon out;
  out.reserve(normalized.size());
  for (const auto& v : normalized) out.push_back({v.x * width, v.y * height});
  return out;
}

inline Mask rasterize(const Instance& instance, int width, int height) {
  return rasterize_pixels(to_pixels(instance.polygon, width, height), width, height);
}

inline double mask_iou(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "mask IoU");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  return uni ? double(inter) / double(uni) : 0.0;
}

}  // namespace fpp
