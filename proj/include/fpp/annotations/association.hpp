#pragma once

#include <optional>
#include <vector>

#include "fpp/annotations/labels.hpp"
#include "fpp/annotations/polygon.hpp"

namespace fpp {

struct FastenerLink {
  std::size_t screw = 0;                // index into AnnotationSet::instances
  std::optional<std::size_t> parent;    // nullopt = unassigned
};

/// Assigns every screw to the macro-component whose convex hull contains the
/// screw's centroid; the smallest containing hull wins. Hulls are compared in
/// pixel units so anisotropic image sizes do not change the ordering.
inline std::vector<FastenerLink> associate_fasteners(const AnnotationSet& set, const Taxonomy& taxonomy) {
  const int screw_class = taxonomy.require("Screw");
  const double sx = set.image_width > 0 ? set.image_width : 1.0;
  const double sy = set.image_height > 0 ? set.image_height : 1.0;
  auto scaled = [&](const Polygon& p) {
    Polygon out;
    for (const auto& v : p) out.push_back({v.x * sx, v.y * sy});
    return out;
  };

  struct Hull {
    std::size_t index;
    Polygon hull;
    double area;
  };
  std::vector<Hull> hulls;
  for (std::size_t i = 0; i < set.instances.size(); ++i) {
    if (set.instances[i].class_id == screw_class) continue;
    Polygon h = convex_hull(scaled(set.instances[i].polygon));
    if (h.size() >= 3) hulls.push_back({i, h, area(h)});
  }

  std::vector<FastenerLink> links;
  for (std::size_t i = 0; i < set.instances.size(); ++i) {
    if (set.instances[i].class_id != screw_class) continue;
    const Vec2 c = centroid(scaled(set.instances[i].polygon));
    FastenerLink link{i, std::nullopt};
    double best = 0;
    for (const auto& h : hulls) {
      if (!convex_contains(h.hull, c)) continue;
      if (!link.parent || h.area < best) {
        link.parent = h.index;
        best = h.area;
      }
    }
    links.push_back(link);
  }
  return links;
}

}  // namespace fpp
