#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fpp/core/image.hpp"

namespace fpp {

struct Components {
  LabelImage labels;                // 0 = background, 1..count
  std::vector<std::size_t> areas;   // areas[label - 1]
  std::size_t count() const { return areas.size(); }
};

/// Connected components of the non-zero pixels, labelled in raster order of
/// their first pixel. `eight_connected` selects 8- vs 4-neighbourhood.
inline Components label_components(const Mask& mask, bool eight_connected = true) {
  const int w = mask.width();
  const int h = mask.height();
  Components out{LabelImage(w, h), {}};
  std::vector<std::pair<int, int>> stack;
  static constexpr std::array<std::pair<int, int>, 8> offsets{
      {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}}};
  const std::size_t n_offsets = eight_connected ? 8 : 4;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y) || out.labels(x, y)) continue;
      const auto label = static_cast<std::int32_t>(out.areas.size() + 1);
      std::size_t area = 0;
      out.labels(x, y) = label;
      stack.push_back({x, y});
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++area;
        for (std::size_t k = 0; k < n_offsets; ++k) {
          const int nx = cx + offsets[k].first;
          const int ny = cy + offsets[k].second;
          if (mask.contains(nx, ny) && mask(nx, ny) && !out.labels(nx, ny)) {
            out.labels(nx, ny) = label;
            stack.push_back({nx, ny});
          }
        }
      }
      out.areas.push_back(area);
    }
  }
  return out;
}

inline Mask component_mask(const Components& c, std::int32_t label) {
  Mask m(c.labels.width(), c.labels.height());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = c.labels[i] == label ? 1 : 0;
  return m;
}

}  // namespace fpp
