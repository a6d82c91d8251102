#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstdint>
#include <limits>
#include <vector>

#include "fpp/core/image.hpp"
#include "fpp/core/parallel.hpp"
#include "fpp/core/random.hpp"
#include "fpp/geometry.hpp"
#include "fpp/patterns.hpp"
#include "fpp/phase.hpp"

namespace fpp {

/// Ground truth for one simulated view. All maps are on the camera grid.
struct SceneSpec {
  ImageF64 height_field;      // depth along the camera axis, mm
  ImageF64 albedo;            // reflectance; > 1 models specular gain
  LabelImage material_index;  // 0 = background, 1..material_count
  LabelImage instance_index;  // distinguishes parts sharing a material
  Mask shadow;                // pixels the projector cannot reach
  double pose_theta = 0.0;    // degrees about the view axis
  int material_count = 11;

  int width() const { return height_field.width(); }
  int height() const { return height_field.height(); }

  static SceneSpec blank(int w, int h, double depth, double albedo = 0.8, int materials = 11) {
    return {ImageF64(w, h, depth), ImageF64(w, h, albedo), LabelImage(w, h), LabelImage(w, h), Mask(w, h), 0.0, materials};
  }

  void validate() const {
    require_same_shape(albedo, height_field, "albedo vs height field");
    require_same_shape(material_index, height_field, "material index vs height field");
    require_same_shape(instance_index, height_field, "instance index vs height field");
    require_same_shape(shadow, height_field, "shadow vs height field");
    for (std::size_t i = 0; i < material_index.size(); ++i)
      if (material_index[i] < 0 || material_index[i] > material_count)
        throw ValidationError("material index " + std::to_string(material_index[i]) + " outside [0, " +
                              std::to_string(material_count) + "]");
  }
};

struct RenderOptions {
  double noise_sigma = 0.01;  // fraction of full scale
  double ambient = 0.02;
  std::uint64_t seed = 0;
};

namespace detail {

inline double sample_bilinear(const ImageF64& img, double x, double y) {
  x = std::clamp(x, 0.0, double(img.width() - 1));
  y = std::clamp(y, 0.0, double(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0, fy = y - y0;
  return (1 - fy) * ((1 - fx) * img(x0, y0) + fx * img(x1, y0)) + fy * ((1 - fx) * img(x0, y1) + fx * img(x1, y1));
}

/// Where each camera pixel lands in the projector; NaN when it does not.
struct ProjectorLookup {
  ImageF64 u, v;
};

inline ProjectorLookup project_scene(const SceneSpec& scene, const CalibrationModel& calib) {
  const int w = scene.width(), h = scene.height();
  ProjectorLookup out{ImageF64(w, h, std::numeric_limits<double>::quiet_NaN()),
                      ImageF64(w, h, std::numeric_limits<double>::quiet_NaN())};
  const Mat3 k_inv = calib.camera_intrinsics.intrinsic_inverse();
  parallel_for(h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y)
      for (int x = 0; x < w; ++x) {
        const double z = scene.height_field(x, y);
        if (!(z > 0) || !std::isfinite(z) || scene.shadow(x, y)) continue;
        const Vec3 world = (k_inv * Vec3{double(x), double(y), 1.0}) * z;
        if (calib.to_projector_frame(world).z <= 0) continue;
        const Vec2 p = calib.project_to_projector(world);
        if (p.x < -0.5 || p.y < -0.5 || p.x >= calib.projector_width - 0.5 || p.y >= calib.projector_height - 0.5) continue;
        out.u(x, y) = p.x;
        out.v(x, y) = p.y;
      }
  });
  return out;
}

/// I = clip(ambient + albedo * pattern + noise). `pattern(u, v)` is only
/// evaluated on lit pixels; others receive ambient light.
template <typename Pattern>
ImageF64 render_lit_image(const SceneSpec& scene, const ImageF64& albedo, const ProjectorLookup& lookup,
                          const RenderOptions& options, std::uint64_t image_index, Pattern&& pattern) {
  const int w = scene.width(), h = scene.height();
  ImageF64 out(w, h);
  parallel_for(h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      Rng rng = Rng::stream(options.seed, image_index, static_cast<std::uint64_t>(y));
      for (int x = 0; x < w; ++x) {
        double value = options.ambient;
        const double u = lookup.u(x, y);
        if (std::isfinite(u)) value += albedo(x, y) * pattern(u, lookup.v(x, y));
        if (options.noise_sigma > 0) value += options.noise_sigma * rng.normal();
        out(x, y) = std::clamp(value, 0.0, 1.0);
      }
    }
  });
  return out;
}

}  // namespace detail

/// Pattern set carrying only parameters. The renderer evaluates ideal
/// patterns analytically, so the projector images need not be allocated.
inline PatternSet analytic_patterns(const PatternParams& params) {
  params.validate();
  PatternSet set;
  set.params = params;
  return set;
}

/// Renders the full capture stack (N phase, G gray, 1 white image).
/// Ideal pattern sets are evaluated analytically at the exact projector
/// coordinate; defocused sets are sampled bilinearly from their images.
inline ImageStack render_stack(const SceneSpec& scene, const PatternSet& patterns, const CalibrationModel& calib,
                               const RenderOptions& options = {}) {
  scene.validate();
  const PatternParams& p = patterns.params;
  p.validate();
  if (p.projector_width != calib.projector_width || p.projector_height != calib.projector_height)
    throw StructuralError("pattern resolution does not match the calibrated projector");
  if (p.orientation != calib.coded_axis) throw StructuralError("pattern orientation does not match calibration coded axis");
  if (patterns.defocused) {
    if (static_cast<int>(patterns.phase_patterns.size()) != p.num_shifts)
      throw StructuralError("defocused pattern set lacks phase images");
    for (const auto& img : patterns.phase_patterns)
      if (img.width() != p.projector_width || img.height() != p.projector_height)
        throw StructuralError("pattern image size does not match pattern params");
  }

  const auto lookup = detail::project_scene(scene, calib);
  const bool vertical = p.orientation == FringeOrientation::Vertical;
  auto coded = [vertical](double u, double v) { return vertical ? u : v; };

  ImageStack stack;
  stack.fringe_period = p.fringe_period;
  stack.orientation = p.orientation;
  std::uint64_t index = 0;
  for (int n = 0; n < p.num_shifts; ++n) {
    const double shift = phase_shift(n, p.num_shifts);
    if (patterns.defocused) {
      const ImageF64& img = patterns.phase_patterns[static_cast<std::size_t>(n)];
      stack.phase_images.push_back(detail::render_lit_image(scene, scene.albedo, lookup, options, index++,
                                                            [&](double u, double v) { return detail::sample_bilinear(img, u, v); }));
    } else {
      stack.phase_images.push_back(detail::render_lit_image(scene, scene.albedo, lookup, options, index++, [&](double u, double v) {
        return fringe_intensity(coded(u, v), p.fringe_period, shift);
      }));
    }
  }
  for (int b = 0; b < p.num_gray_bits; ++b) {
    stack.gray_images.push_back(detail::render_lit_image(scene, scene.albedo, lookup, options, index++, [&](double u, double v) {
      const int k = fringe_order_at(coded(u, v), p.fringe_period);
      return k >= 0 && gray_plane_bit(static_cast<std::uint32_t>(k), b, p.num_gray_bits) ? 1.0 : 0.0;
    }));
  }
  stack.white_image =
      detail::render_lit_image(scene, scene.albedo, lookup, options, index++, [](double, double) { return 1.0; });
  return stack;
}

/// Projector-illuminated (white light) grayscale image with an optional albedo override.
inline ImageF64 render_white_image(const SceneSpec& scene, const CalibrationModel& calib, const RenderOptions& options = {},
                                   const ImageF64* albedo_override = nullptr) {
  scene.validate();
  const auto lookup = detail::project_scene(scene, calib);
  return detail::render_lit_image(scene, albedo_override ? *albedo_override : scene.albedo, lookup, options, 0,
                                  [](double, double) { return 1.0; });
}

/// Mask k (returned at position k - 1) is the indicator of material k.
inline std::vector<Mask> render_material_masks(const SceneSpec& scene) {
  scene.validate();
  std::vector<Mask> masks;
  masks.reserve(static_cast<std::size_t>(scene.material_count));
  for (int k = 1; k <= scene.material_count; ++k) {
    Mask m(scene.width(), scene.height());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = scene.material_index[i] == k ? 1 : 0;
    masks.push_back(std::move(m));
  }
  return masks;
}

/// Rotates every map about the image centre by `delta_theta` degrees
/// (clockwise on screen). Index maps use nearest neighbour, height and
/// albedo bilinear with clamped borders. Multiples of 90 degrees are exact
/// pixel permutations when the image is square (any image for 180).
inline SceneSpec rotate_scene(const SceneSpec& scene, double delta_theta) {
  scene.validate();
  const int w = scene.width(), h = scene.height();
  SceneSpec out = scene;
  out.pose_theta = std::fmod(scene.pose_theta + delta_theta, 360.0);
  if (out.pose_theta < 0) out.pose_theta += 360.0;

  const double turns = delta_theta / 90.0;
  const bool quarter = turns == std::round(turns);
  const int q = quarter ? static_cast<int>(((static_cast<long long>(std::llround(turns)) % 4) + 4) % 4) : -1;
  if (q == 0) return out;
  if (q == 2 || (q >= 0 && w == h)) {
    auto source = [&](int x, int y) -> std::pair<int, int> {
      switch (q) {
        case 1: return {y, w - 1 - x};
        case 2: return {w - 1 - x, h - 1 - y};
        default: return {w - 1 - y, x};
      }
    };
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        auto [sx, sy] = source(x, y);
        out.height_field(x, y) = scene.height_field(sx, sy);
        out.albedo(x, y) = scene.albedo(sx, sy);
        out.material_index(x, y) = scene.material_index(sx, sy);
        out.instance_index(x, y) = scene.instance_index(sx, sy);
        out.shadow(x, y) = scene.shadow(sx, sy);
      }
    return out;
  }

  const double rad = delta_theta * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  parallel_for(h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y)
      for (int x = 0; x < w; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double sx = cx + c * dx + s * dy;
        const double sy = cy - s * dx + c * dy;
        out.height_field(x, y) = detail::sample_bilinear(scene.height_field, sx, sy);
        out.albedo(x, y) = detail::sample_bilinear(scene.albedo, sx, sy);
        const int nx = static_cast<int>(std::lround(sx));
        const int ny = static_cast<int>(std::lround(sy));
        const bool inside = scene.material_index.contains(nx, ny);
        out.material_index(x, y) = inside ? scene.material_index(nx, ny) : 0;
        out.instance_index(x, y) = inside ? scene.instance_index(nx, ny) : 0;
        out.shadow(x, y) = inside ? scene.shadow(nx, ny) : 0;
      }
  });
  return out;
}

/// Marks pixels whose surface point is hidden from the projector by the
/// height field itself. The segment towards the projector centre is marched
/// in roughly one-pixel steps and compared with the depth the camera sees at
/// each step; marching stops once the segment rises above the whole scene.
inline Mask compute_projector_shadows(const SceneSpec& scene, const CalibrationModel& calib, double tolerance = 0.5) {
  scene.validate();
  const int w = scene.width(), h = scene.height();
  Mask shadow(w, h);
  double z_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.height_field.size(); ++i)
    if (scene.height_field[i] > 0) z_min = std::min(z_min, scene.height_field[i]);
  if (!std::isfinite(z_min)) return shadow;

  // Depth minimum over a 7x7 window: a run of kBlock samples spans under
  // 3.75 px, so when the run's highest point is still in front of this bound
  // around its middle sample no sample of the run can be occluded.
  constexpr int kBlock = 5, kRadius = 3;
  ImageF64 row_min(w, h), near(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m = std::numeric_limits<double>::infinity();
      for (int dx = std::max(0, x - kRadius); dx <= std::min(w - 1, x + kRadius); ++dx) m = std::min(m, scene.height_field(dx, y));
      row_min(x, y) = m;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m = std::numeric_limits<double>::infinity();
      for (int dy = std::max(0, y - kRadius); dy <= std::min(h - 1, y + kRadius); ++dy) m = std::min(m, row_min(x, dy));
      near(x, y) = m;
    }

  const Mat3 k_inv = calib.camera_intrinsics.intrinsic_inverse();
  const Vec3 center = calib.projector_center();
  parallel_for(h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y)
      for (int x = 0; x < w; ++x) {
        const double z = scene.height_field(x, y);
        if (!(z > 0)) continue;
        const Vec3 p = (k_inv * Vec3{double(x), double(y), 1.0}) * z;
        const Vec3 to_center = center - p;
        const double length = to_center.norm();
        const Vec3 dir = to_center * (1.0 / length);
        const Vec2 p0 = calib.project_to_camera(p);
        const Vec2 p1 = calib.project_to_camera(p + dir);
        const double px_per_mm = std::hypot(p1.x - p0.x, p1.y - p0.y);
        const double step = px_per_mm > 1e-6 ? 0.75 / px_per_mm : length;
        // Sample k sits at s = k * step; runs of kBlock samples are tested
        // against the pooled bound before being checked one by one.
        bool done = false;
        for (int k0 = 1; !done && k0 * step < length; k0 += kBlock) {
          const Vec3 first = p + dir * (k0 * step);
          if (first.z < z_min - tolerance || first.z <= 0) break;
          const Vec2 mid = calib.project_to_camera(p + dir * ((k0 + (kBlock - 1) / 2.0) * step));
          const int mx = std::clamp(static_cast<int>(std::lround(mid.x)), 0, w - 1);
          const int my = std::clamp(static_cast<int>(std::lround(mid.y)), 0, h - 1);
          if (first.z <= near(mx, my) + tolerance) {
            const Vec2 last = calib.project_to_camera(p + dir * ((k0 + kBlock - 1) * step));
            if (!scene.height_field.contains(static_cast<int>(std::lround(last.x)), static_cast<int>(std::lround(last.y)))) break;
            continue;
          }
          for (int k = k0; k < k0 + kBlock; ++k) {
            const double s = k * step;
            if (s >= length) {
              done = true;
              break;
            }
            const Vec3 q = p + dir * s;
            if (q.z < z_min - tolerance || q.z <= 0) {
              done = true;
              break;
            }
            const Vec2 px = calib.project_to_camera(q);
            const int qx = static_cast<int>(std::lround(px.x));
            const int qy = static_cast<int>(std::lround(px.y));
            if (!scene.height_field.contains(qx, qy)) {
              done = true;
              break;
            }
            if (qx == x && qy == y) continue;
            if (q.z > scene.height_field(qx, qy) + tolerance) {
              shadow(x, y) = 1;
              done = true;
              break;
            }
          }
        }
      }
  });
  return shadow;
}

struct MaterialRandomization {
  double roughness_min = 0.2, roughness_max = 0.8;
  double brightness_min = 0.7, brightness_max = 1.3;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (roughness_min > roughness_max || brightness_min > brightness_max)
      throw ParameterError("randomization ranges must satisfy min <= max");
  }
};

/// Per-material albedo jitter: brightness scales the albedo and roughness
/// damps the specular excess above 1.
inline ImageF64 randomize_albedo(const SceneSpec& scene, const MaterialRandomization& rand, std::uint64_t stream) {
  rand.validate();
  Rng rng = Rng::stream(rand.rng_seed, stream, 0xa1bed0);
  std::vector<double> brightness(static_cast<std::size_t>(scene.material_count) + 1);
  std::vector<double> roughness(brightness.size());
  for (std::size_t k = 0; k < brightness.size(); ++k) {
    roughness[k] = rng.uniform(rand.roughness_min, rand.roughness_max);
    brightness[k] = rng.uniform(rand.brightness_min, rand.brightness_max);
  }
  ImageF64 out(scene.width(), scene.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto k = static_cast<std::size_t>(scene.material_index[i]);
    const double a = scene.albedo[i];
    out[i] = brightness[k] * (a <= 1.0 ? a : 1.0 + (a - 1.0) * (1.0 - roughness[k]));
  }
  return out;
}

}  // namespace fpp
