#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fpp/annotations/labels.hpp"
#include "fpp/annotations/raster.hpp"
#include "fpp/annotations/taxonomy.hpp"
#include "fpp/geometry.hpp"

namespace fpp {

struct LabeledCloud {
  std::vector<Vec3> points;
  std::vector<std::uint8_t> labels;  // taxonomy id or kUnlabeled
  std::vector<std::array<int, 2>> source_pixel;
};

/// Per-pixel class map: the highest-confidence covering instance wins, ties go
/// to the smaller mask. Uncovered pixels are kUnlabeled.
inline Image<std::uint8_t> label_image(const AnnotationSet& set, int width, int height) {
  Image<std::uint8_t> labels(width, height, kUnlabeled);
  ImageF64 best_conf(width, height, -1.0);
  Image<std::size_t> best_area(width, height, 0);
  for (const auto& inst : set.instances) {
    if (inst.class_id < 0 || inst.class_id >= kUnlabeled) throw ValidationError("class id does not fit a label byte");
    const Mask m = rasterize(inst, width, height);
    const std::size_t area = count_set(m);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i]) continue;
      const bool better = inst.confidence > best_conf[i] || (inst.confidence == best_conf[i] && area < best_area[i]);
      if (better) {
        best_conf[i] = inst.confidence;
        best_area[i] = area;
        labels[i] = static_cast<std::uint8_t>(inst.class_id);
      }
    }
  }
  return labels;
}

/// Pixel-wise 2D-3D fusion: masks and depth come from the same camera, so
/// every valid depth pixel takes the label at the same pixel.
inline LabeledCloud fuse(const DepthFrame& frame, const AnnotationSet& set) {
  if (set.image_width != frame.width() || set.image_height != frame.height())
    throw StructuralError("annotation resolution " + std::to_string(set.image_width) + "x" + std::to_string(set.image_height) +
                          " does not match depth frame " + std::to_string(frame.width()) + "x" + std::to_string(frame.height()));
  const auto labels = label_image(set, frame.width(), frame.height());
  LabeledCloud cloud;
  for (int y = 0; y < frame.height(); ++y)
    for (int x = 0; x < frame.width(); ++x) {
      if (!frame.valid(x, y)) continue;
      cloud.points.push_back(frame.world_xyz(x, y));
      cloud.labels.push_back(labels(x, y));
      cloud.source_pixel.push_back({x, y});
    }
  return cloud;
}

}  // namespace fpp
