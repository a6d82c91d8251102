#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "fpp/annotations/polygon.hpp"
#include "fpp/core/random.hpp"
#include "fpp/geometry.hpp"
#include "fpp/simulator.hpp"

namespace fpp {

/// Fronto-parallel plane at depth z.
inline SceneSpec make_plane_scene(int width, int height, double z, double albedo = 0.8) {
  if (width <= 0 || height <= 0) throw ParameterError("scene dimensions must be positive");
  if (!(z > 0)) throw ParameterError("plane depth must be > 0");
  return SceneSpec::blank(width, height, z, albedo);
}

/// Tilted plane z = z0 + gx * X + gy * Y in camera coordinates (mm).
inline SceneSpec make_ramp_scene(const CalibrationModel& calib, int width, int height, double z0, double gx, double gy,
                                 double albedo = 0.8) {
  SceneSpec scene = make_plane_scene(width, height, z0, albedo);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Vec3 d = calib.camera_ray(x, y);
      const double denom = 1.0 - gx * d.x - gy * d.y;
      if (!(denom > 0)) throw ParameterError("ramp is parallel to a camera ray");
      scene.height_field(x, y) = z0 / denom;
    }
  return scene;
}

/// Sphere of `radius` centred at `center` in front of a background plane.
/// Sphere pixels carry material 1.
inline SceneSpec make_sphere_scene(const CalibrationModel& calib, int width, int height, double plane_z, const Vec3& center,
                                   double radius, double albedo = 0.8) {
  SceneSpec scene = make_plane_scene(width, height, plane_z, albedo);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Vec3 d = calib.camera_ray(x, y);
      const double a = d.dot(d);
      const double b = -2.0 * d.dot(center);
      const double c = center.dot(center) - radius * radius;
      const double disc = b * b - 4 * a * c;
      if (disc < 0) continue;
      const double t = (-b - std::sqrt(disc)) / (2 * a);
      if (t > 0 && t < scene.height_field(x, y)) {
        scene.height_field(x, y) = t;
        scene.material_index(x, y) = 1;
        scene.instance_index(x, y) = 1;
      }
    }
  return scene;
}

/// Paints a specular disk (image-space centre and radius) onto `scene`.
inline void add_specular_disk(SceneSpec& scene, double cx, double cy, double radius, double albedo = 5.0, int material = 1,
                              int instance = 1) {
  for (int y = 0; y < scene.height(); ++y)
    for (int x = 0; x < scene.width(); ++x)
      if (std::hypot(x - cx, y - cy) <= radius) {
        scene.albedo(x, y) = albedo;
        scene.material_index(x, y) = material;
        scene.instance_index(x, y) = instance;
      }
}

/// Flat or domed part of the procedural drive model, in camera-frame mm.
struct ScenePart {
  enum class Shape { Circle, Polygon };
  Shape shape = Shape::Circle;
  Vec2 center;
  double radius = 0;
  Polygon outline;
  double z = 500;     // depth of the part's top face
  double dome = 0;    // >0: spherical bump of this height over a circle
  double albedo = 0.6;
  int material = 0;   // 0 = unlabeled casing/background
  int instance = 0;

  bool contains(const Vec2& p) const {
    if (shape == Shape::Circle) return std::hypot(p.x - center.x, p.y - center.y) <= radius;
    bool inside = false;
    for (std::size_t i = 0, j = outline.size() - 1; i < outline.size(); j = i++) {
      const Vec2& a = outline[i];
      const Vec2& b = outline[j];
      if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return inside;
  }

  double depth_at(const Vec2& p) const {
    if (dome <= 0 || shape != Shape::Circle) return z;
    const double r = std::hypot(p.x - center.x, p.y - center.y) / radius;
    return z - dome * std::sqrt(std::max(0.0, 1.0 - r * r));
  }
};

struct SceneLayout {
  std::string name;
  std::vector<ScenePart> parts;
  double table_z = 540;
  double table_albedo = 0.35;
};

inline constexpr int kHddSceneVariants = 14;

namespace detail {

inline ScenePart circle_part(double x, double y, double r, double z, int material, double albedo, double dome = 0) {
  ScenePart p;
  p.shape = ScenePart::Shape::Circle;
  p.center = {x, y};
  p.radius = r;
  p.z = z;
  p.dome = dome;
  p.material = material;
  p.albedo = albedo;
  return p;
}

inline ScenePart polygon_part(Polygon outline, double z, int material, double albedo) {
  ScenePart p;
  p.shape = ScenePart::Shape::Polygon;
  p.outline = std::move(outline);
  p.z = z;
  p.material = material;
  p.albedo = albedo;
  return p;
}

inline Polygon rect(double cx, double cy, double w, double h) {
  return {{cx - w / 2, cy - h / 2}, {cx + w / 2, cy - h / 2}, {cx + w / 2, cy + h / 2}, {cx - w / 2, cy + h / 2}};
}

inline ScenePart screw(double x, double y, double z) { return circle_part(x, y, 1.8, z - 0.5, 11, 0.75, 1.2); }

}  // namespace detail

/// Procedural 3.5" drive. Variants 0-6 show the opened platter side, 7-13 the
/// PCB side; each variant jitters position, rotation and part albedo.
/// Material indices are taxonomy ids + 1; the casing is unlabeled.
inline SceneLayout hdd_layout(int variant) {
  if (variant < 0 || variant >= kHddSceneVariants)
    throw ParameterError("hdd scene variant must be in [0, " + std::to_string(kHddSceneVariants - 1) + "]");
  using detail::circle_part;
  using detail::polygon_part;
  using detail::rect;
  using detail::screw;

  const bool platter_side = variant < 7;
  Rng rng = Rng::stream(0x4844442d, static_cast<std::uint64_t>(variant));
  SceneLayout layout;
  layout.name = (platter_side ? "platter_" : "pcb_") + std::to_string(variant % 7);

  auto& parts = layout.parts;
  parts.push_back(polygon_part(rect(0, 0, 147, 101.6), 505, 0, 0.55));
  for (double sx : {-1.0, 1.0})
    for (double sy : {-1.0, 1.0}) parts.push_back(screw(sx * 69, sy * 46, 505));

  if (platter_side) {
    const double px = -20 + rng.uniform(-2, 2), py = rng.uniform(-2, 2);
    parts.push_back(circle_part(px, py, 47.5, 500, 1, 5.0));           // platter, mirror finish
    parts.push_back(circle_part(px, py, 12.5, 495, 2, 0.7));           // spindle hub
    for (int i = 0; i < 6; ++i) {
      const double a = i * std::numbers::pi / 3 + rng.uniform(0, 0.2);
      parts.push_back(screw(px + 8 * std::cos(a), py + 8 * std::sin(a), 495));
    }
    const double bx = 46 + rng.uniform(-1.5, 1.5), by = 30 + rng.uniform(-1.5, 1.5);
    const double tip_x = px + 25 + rng.uniform(-3, 3), tip_y = py - 12 + rng.uniform(-3, 3);
    const double ang = std::atan2(tip_y - by, tip_x - bx);
    const double nx = -std::sin(ang), ny = std::cos(ang);
    parts.push_back(polygon_part({{bx + 5 * nx, by + 5 * ny}, {tip_x + 1.5 * nx, tip_y + 1.5 * ny},
                                  {tip_x - 1.5 * nx, tip_y - 1.5 * ny}, {bx - 5 * nx, by - 5 * ny}},
                                 496, 4, 0.8));                        // read-write head arm
    parts.push_back(circle_part(bx, by, 7, 494, 5, 0.65));             // actuator bearing
    parts.push_back(polygon_part(rect(53, -32, 28, 26), 492, 3, 0.5));  // top plate
    parts.push_back(screw(46, -38, 492));
    parts.push_back(screw(61, -25, 492));
    parts.push_back(polygon_part(rect(53, -11, 24, 8), 497, 8, 0.3));   // magnet
    parts.push_back(polygon_part(rect(36, 4, 6, 12), 497, 6, 0.6));     // landing tray
  } else {
    const double ox = rng.uniform(-2, 2), oy = rng.uniform(-2, 2);
    parts.push_back(polygon_part({{-58 + ox, -44 + oy}, {58 + ox, -44 + oy}, {58 + ox, 10 + oy}, {40 + ox, 10 + oy},
                                  {40 + ox, 44 + oy}, {-58 + ox, 44 + oy}},
                                 501, 7, 0.3 + rng.uniform(0, 0.1)));  // PCB
    parts.push_back(circle_part(-20 + ox, oy, 13, 498, 2, 0.6));        // spindle hub underside
    parts.push_back(polygon_part(rect(66, -5 + oy, 8, 22), 497, 9, 0.25));   // SATA data
    parts.push_back(polygon_part(rect(66, -28 + oy, 8, 14), 497, 10, 0.25));  // SATA power
    const double screw_xy[5][2] = {{-50, -36}, {30, -36}, {-50, 36}, {10, 30}, {48, -8}};
    for (const auto& s : screw_xy) parts.push_back(screw(s[0] + ox, s[1] + oy, 501));
  }

  int instance = 1;
  for (auto& part : parts)
    if (part.material != 0) part.instance = instance++;

  const double rot = rng.uniform(-8, 8) * std::numbers::pi / 180;
  const double tx = rng.uniform(-6, 6), ty = rng.uniform(-5, 5);
  const double c = std::cos(rot), s = std::sin(rot);
  auto move = [&](Vec2 p) { return Vec2{c * p.x - s * p.y + tx, s * p.x + c * p.y + ty}; };
  for (auto& part : parts) {
    part.center = move(part.center);
    for (auto& v : part.outline) v = move(v);
    if (part.material != 1) part.albedo = std::min(0.85, part.albedo * rng.uniform(0.9, 1.1));
  }
  return layout;
}

/// Rasterizes a layout through the camera: each pixel takes the nearest part
/// its ray meets, or the table behind everything.
inline SceneSpec render_layout(const SceneLayout& layout, const CalibrationModel& calib, int width = 512, int height = 512) {
  SceneSpec scene = SceneSpec::blank(width, height, layout.table_z, layout.table_albedo);
  std::vector<const ScenePart*> order;
  for (const auto& p : layout.parts) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [](const ScenePart* a, const ScenePart* b) { return a->z > b->z; });
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Vec3 d = calib.camera_ray(x, y);
      for (const ScenePart* part : order) {
        const Vec2 at{d.x * part->z, d.y * part->z};
        if (!part->contains(at)) continue;
        const double z = part->depth_at(at);
        if (z > scene.height_field(x, y)) continue;
        scene.height_field(x, y) = z;
        scene.albedo(x, y) = part->albedo;
        scene.material_index(x, y) = part->material;
        scene.instance_index(x, y) = part->instance;
      }
    }
  scene.shadow = compute_projector_shadows(scene, calib);
  return scene;
}

inline SceneSpec make_hdd_scene(int variant, const CalibrationModel& calib, int width = 512, int height = 512) {
  return render_layout(hdd_layout(variant), calib, width, height);
}

}  // namespace fpp
