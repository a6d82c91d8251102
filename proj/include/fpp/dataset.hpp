#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpp/annotations/components.hpp"
#include "fpp/annotations/contour.hpp"
#include "fpp/annotations/labels.hpp"
#include "fpp/core/atomic_file.hpp"
#include "fpp/core/image_io.hpp"
#include "fpp/simulator.hpp"

namespace fpp {

struct DatasetOptions {
  double theta_max = 0.0;
  double delta_theta = 1.0;
  MaterialRandomization randomization;
  double noise_sigma = 0.01;
  double ambient = 0.02;
  bool force = false;
  bool write_labels = false;
};

struct DatasetEntry {
  double theta = 0.0;
  std::string image;
  std::vector<std::string> masks;
  std::string depth;
  std::string labels;
};

struct DatasetManifest {
  int width = 0;
  int height = 0;
  int material_count = 0;
  DatasetOptions options;
  std::vector<DatasetEntry> entries;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["width"] = width;
    j["height"] = height;
    j["material_count"] = material_count;
    j["theta_max"] = options.theta_max;
    j["delta_theta"] = options.delta_theta;
    j["noise_sigma"] = options.noise_sigma;
    j["ambient"] = options.ambient;
    j["randomization"] = {{"roughness_range", {options.randomization.roughness_min, options.randomization.roughness_max}},
                          {"brightness_range", {options.randomization.brightness_min, options.randomization.brightness_max}},
                          {"rng_seed", options.randomization.rng_seed}};
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries) {
      nlohmann::json item{{"theta", e.theta}, {"image", e.image}, {"masks", e.masks}, {"depth", e.depth}};
      if (!e.labels.empty()) item["labels"] = e.labels;
      j["entries"].push_back(std::move(item));
    }
    return j;
  }
};

/// Orientation label used in file names: fixed 3 decimals, trailing zeros
/// removed ("90", "1.365").
inline std::string theta_label(double theta) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, theta, std::chars_format::fixed, 3);
  std::string s(buf, end);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

inline int orientation_count(double theta_max, double delta_theta) {
  if (!(delta_theta > 0)) throw ParameterError("delta_theta must be > 0");
  if (!(theta_max >= 0)) throw ParameterError("theta_max must be >= 0");
  return static_cast<int>(std::floor(theta_max / delta_theta + 1e-9)) + 1;
}

/// Polygon labels from the scene's ground-truth instance map: one instance per
/// distinct instance id with a labeled material, class = material - 1.
inline AnnotationSet labels_from_scene(const SceneSpec& scene, int min_area = 9) {
  AnnotationSet set;
  set.image_width = scene.width();
  set.image_height = scene.height();
  std::set<std::pair<int, int>> keys;
  for (std::size_t i = 0; i < scene.material_index.size(); ++i)
    if (scene.material_index[i] > 0) keys.insert({scene.instance_index[i], scene.material_index[i]});
  for (const auto& [instance, material] : keys) {
    Mask m(scene.width(), scene.height());
    for (std::size_t i = 0; i < m.size(); ++i)
      m[i] = scene.instance_index[i] == instance && scene.material_index[i] == material ? 1 : 0;
    if (count_set(m) < static_cast<std::size_t>(min_area)) continue;
    set.instances.push_back({material - 1, mask_to_polygon(m), 1.0});
  }
  return set;
}

/// Orientation sweep over one base scene. Orientation i is the base scene
/// rotated by theta_i = i * delta_theta with shadows recomputed, materials
/// jittered and noise drawn from streams keyed by (rng_seed, i), so parallel
/// and serial runs write identical bytes.
inline DatasetManifest generate_dataset(const SceneSpec& scene, const CalibrationModel& calib,
                                        const std::filesystem::path& out_dir, const DatasetOptions& options) {
  namespace fs = std::filesystem;
  scene.validate();
  options.randomization.validate();
  const int count = orientation_count(options.theta_max, options.delta_theta);
  if (fs::exists(out_dir) && !fs::is_directory(out_dir)) throw IoError("output path is not a directory: " + out_dir.string());
  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !options.force)
    throw IoError("output directory is not empty (use --force): " + out_dir.string());

  DatasetManifest manifest;
  manifest.width = scene.width();
  manifest.height = scene.height();
  manifest.material_count = scene.material_count;
  manifest.options = options;
  manifest.entries.resize(static_cast<std::size_t>(count));

  std::set<std::string> names;
  for (int i = 0; i < count; ++i) {
    auto& e = manifest.entries[static_cast<std::size_t>(i)];
    e.theta = i * options.delta_theta;
    const std::string t = theta_label(e.theta);
    if (!names.insert(t).second) throw ParameterError("delta_theta too small: orientation name " + t + " repeats");
    e.image = "images/" + t + ".png";
    e.depth = "depth/" + t + ".f32";
    for (int k = 1; k <= scene.material_count; ++k) e.masks.push_back("masks/mat_" + std::to_string(k) + "_" + t + ".png");
    if (options.write_labels) e.labels = "labels/" + t + ".txt";
  }

  parallel_for(count, [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      const auto& e = manifest.entries[static_cast<std::size_t>(i)];
      SceneSpec view = rotate_scene(scene, e.theta);
      view.shadow = compute_projector_shadows(view, calib);
      const ImageF64 albedo = randomize_albedo(view, options.randomization, static_cast<std::uint64_t>(i));
      RenderOptions render;
      render.noise_sigma = options.noise_sigma;
      render.ambient = options.ambient;
      render.seed = Rng::stream(options.randomization.rng_seed, static_cast<std::uint64_t>(i), 0x1ab).next();
      write_image(out_dir / e.image, render_white_image(view, calib, render, &albedo), 8);
      const auto masks = render_material_masks(view);
      for (std::size_t k = 0; k < masks.size(); ++k) write_png(out_dir / e.masks[k], mask_to_gray(masks[k]));
      write_f32(out_dir / e.depth, view.height_field);
      if (options.write_labels) write_text_file(out_dir / e.labels, serialize_labels(labels_from_scene(view)));
    }
  });
  write_text_file(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
  return manifest;
}

}  // namespace fpp
