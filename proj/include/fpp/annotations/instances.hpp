#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <vector>

#include "fpp/annotations/components.hpp"
#include "fpp/core/image.hpp"

namespace fpp {

/// Exact Euclidean distance from each foreground pixel to the nearest
/// background pixel (pixels outside the image count as background).
/// Felzenszwalb-Huttenlocher separable lower-envelope transform.
inline ImageF64 distance_transform(const Mask& foreground) {
  const int w = foreground.width();
  const int h = foreground.height();
  constexpr double inf = 1e20;
  ImageF64 sq(w, h);

  auto transform_1d = [](const std::vector<double>& f, std::vector<double>& d) {
    constexpr double infinity = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(f.size());
    std::vector<int> v(static_cast<std::size_t>(n));
    std::vector<double> z(static_cast<std::size_t>(n) + 1);
    auto at = [](auto& vec, int i) -> auto& { return vec[static_cast<std::size_t>(i)]; };
    int k = 0;
    v[0] = 0;
    z[0] = -infinity;
    z[1] = infinity;
    for (int q = 1; q < n; ++q) {
      auto intersect = [&](int p) { return ((at(f, q) + double(q) * q) - (at(f, p) + double(p) * p)) / (2.0 * (q - p)); };
      double s = intersect(at(v, k));
      while (s <= at(z, k)) {
        --k;
        s = intersect(at(v, k));
      }
      ++k;
      at(v, k) = q;
      at(z, k) = s;
      at(z, k + 1) = infinity;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (at(z, k + 1) < q) ++k;
      const int p = at(v, k);
      at(d, q) = double(q - p) * (q - p) + at(f, p);
    }
  };

  // Pad by one background pixel on every side so the border acts as background.
  const int pw = w + 2, ph = h + 2;
  std::vector<double> grid(static_cast<std::size_t>(pw) * ph, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      grid[static_cast<std::size_t>(y + 1) * pw + (x + 1)] = foreground(x, y) ? inf : 0.0;

  std::vector<double> f, d;
  f.resize(static_cast<std::size_t>(ph));
  d.resize(static_cast<std::size_t>(ph));
  for (int x = 0; x < pw; ++x) {
    for (int y = 0; y < ph; ++y) f[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y) * pw + x];
    transform_1d(f, d);
    for (int y = 0; y < ph; ++y) grid[static_cast<std::size_t>(y) * pw + x] = d[static_cast<std::size_t>(y)];
  }
  f.resize(static_cast<std::size_t>(pw));
  d.resize(static_cast<std::size_t>(pw));
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) f[static_cast<std::size_t>(x)] = grid[static_cast<std::size_t>(y) * pw + x];
    transform_1d(f, d);
    for (int x = 0; x < pw; ++x) grid[static_cast<std::size_t>(y) * pw + x] = d[static_cast<std::size_t>(x)];
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) sq(x, y) = std::sqrt(grid[static_cast<std::size_t>(y + 1) * pw + (x + 1)]);
  return sq;
}

/// Grayscale reconstruction by dilation of `marker` under `mask` (marker <= mask),
/// 8-connected; restricted to pixels where `domain` is set.
inline ImageF64 reconstruct_by_dilation(ImageF64 marker, const ImageF64& mask, const Mask& domain) {
  const int w = mask.width(), h = mask.height();
  auto in = [&](int x, int y) { return marker.contains(x, y) && domain(x, y); };
  static constexpr int fwd[4][2] = {{-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!domain(x, y)) continue;
      double m = marker(x, y);
      for (auto [dx, dy] : fwd)
        if (in(x + dx, y + dy)) m = std::max(m, marker(x + dx, y + dy));
      marker(x, y) = std::min(m, mask(x, y));
    }
  std::deque<std::pair<int, int>> fifo;
  for (int y = h - 1; y >= 0; --y)
    for (int x = w - 1; x >= 0; --x) {
      if (!domain(x, y)) continue;
      double m = marker(x, y);
      for (auto [dx, dy] : fwd)
        if (in(x - dx, y - dy)) m = std::max(m, marker(x - dx, y - dy));
      marker(x, y) = std::min(m, mask(x, y));
      for (auto [dx, dy] : fwd) {
        const int nx = x - dx, ny = y - dy;
        if (in(nx, ny) && marker(nx, ny) < marker(x, y) && marker(nx, ny) < mask(nx, ny)) {
          fifo.push_back({x, y});
          break;
        }
      }
    }
  while (!fifo.empty()) {
    auto [x, y] = fifo.front();
    fifo.pop_front();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if ((dx || dy) && in(nx, ny) && marker(nx, ny) < marker(x, y) && marker(nx, ny) != mask(nx, ny)) {
          marker(nx, ny) = std::min(marker(x, y), mask(nx, ny));
          fifo.push_back({nx, ny});
        }
      }
  }
  return marker;
}

struct SeparationOptions {
  std::size_t min_area = 9;
  /// Minimum prominence (pixels of distance) for a distance peak to seed its own instance.
  double peak_height = 1.0;
};

/// Splits a merged binary mask into instances: disjoint components are kept
/// apart, and each component is cut by a marker watershed on the distance
/// transform seeded at its h-maxima. Components smaller than min_area are dropped.
inline std::vector<Mask> separate_instances(const Mask& merged, const SeparationOptions& options = {}) {
  const int w = merged.width(), h = merged.height();
  const Components comps = label_components(merged, true);
  std::vector<Mask> out;
  if (comps.count() == 0) return out;

  const ImageF64 dist = distance_transform(merged);
  for (std::size_t ci = 0; ci < comps.count(); ++ci) {
    if (comps.areas[ci] < options.min_area) continue;
    const auto label = static_cast<std::int32_t>(ci + 1);
    const Mask domain = component_mask(comps, label);

    ImageF64 lowered(w, h);
    for (std::size_t i = 0; i < lowered.size(); ++i) lowered[i] = domain[i] ? dist[i] - options.peak_height : 0.0;
    const ImageF64 recon = reconstruct_by_dilation(lowered, dist, domain);
    Mask peaks(w, h);
    for (std::size_t i = 0; i < peaks.size(); ++i)
      peaks[i] = (domain[i] && dist[i] - recon[i] >= options.peak_height - 1e-9) ? 1 : 0;
    const Components seeds = label_components(peaks, true);

    if (seeds.count() <= 1) {
      out.push_back(domain);
      continue;
    }

    // Priority flood: highest distance first, ties by insertion order.
    LabelImage owner(w, h);
    struct Item {
      double priority;
      std::uint64_t order;
      int x, y;
      bool operator<(const Item& o) const { return priority < o.priority || (priority == o.priority && order > o.order); }
    };
    std::priority_queue<Item> queue;
    std::uint64_t counter = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (seeds.labels(x, y)) {
          owner(x, y) = seeds.labels(x, y);
          queue.push({dist(x, y), counter++, x, y});
        }
    while (!queue.empty()) {
      const Item it = queue.top();
      queue.pop();
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = it.x + dx, ny = it.y + dy;
          if ((dx || dy) && domain.contains(nx, ny) && domain(nx, ny) && !owner(nx, ny)) {
            owner(nx, ny) = owner(it.x, it.y);
            queue.push({dist(nx, ny), counter++, nx, ny});
          }
        }
    }
    for (std::size_t s = 1; s <= seeds.count(); ++s) {
      Mask m(w, h);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = owner[i] == static_cast<std::int32_t>(s) ? 1 : 0;
      out.push_back(std::move(m));
    }
  }
  return out;
}

}  // namespace fpp
