#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>

#include <json.hpp>

#include "fpp/core/atomic_file.hpp"
#include "fpp/core/image.hpp"
#include "fpp/core/linalg.hpp"
#include "fpp/core/parallel.hpp"
#include "fpp/phase.hpp"

namespace fpp {

/// Pinhole camera + projector pair. The world frame is the camera frame; a
/// world point X maps into the projector frame as R X + t.
struct CalibrationModel {
  Mat3 camera_intrinsics;
  Mat3 projector_intrinsics;
  Mat3 projector_rotation;
  Vec3 projector_translation;  // mm
  double fringe_period = 18.0;
  FringeOrientation coded_axis = FringeOrientation::Vertical;
  int projector_width = 912;
  int projector_height = 1140;
  double z_min = 100.0;  // mm
  double z_max = 2000.0;

  void validate(double orthonormal_tolerance = 1e-6) const {
    auto check_intrinsics = [](const Mat3& k, const char* name) {
      if (k(1, 0) != 0 || k(2, 0) != 0 || k(2, 1) != 0)
        throw ValidationError(std::string(name) + " must be upper triangular");
      if (!(k(0, 0) > 0 && k(1, 1) > 0 && k(2, 2) > 0))
        throw ValidationError(std::string(name) + " must have a positive diagonal");
      if (k(2, 2) != 1.0) throw ValidationError(std::string(name) + " must have K[2][2] == 1");
      for (double v : k.m)
        if (!std::isfinite(v)) throw ValidationError(std::string(name) + " has non-finite entries");
    };
    check_intrinsics(camera_intrinsics, "camera_intrinsics");
    check_intrinsics(projector_intrinsics, "projector_intrinsics");

    const Mat3 rtr = projector_rotation.transposed() * projector_rotation;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (std::abs(rtr(i, j) - (i == j ? 1.0 : 0.0)) > orthonormal_tolerance)
          throw ValidationError("projector_rotation is not orthonormal");
    if (projector_rotation.determinant() < 0) throw ValidationError("projector_rotation has det -1 (a reflection)");
    if (!(fringe_period > 0)) throw ValidationError("fringe_period must be positive");
    if (!(z_min > 0 && z_max > z_min)) throw ValidationError("working volume must satisfy 0 < z_min < z_max");
    if (projector_width <= 0 || projector_height <= 0) throw ValidationError("projector dimensions must be positive");
  }

  /// Unit-depth camera ray through pixel (u, v): K^-1 [u v 1]^T (z component 1).
  Vec3 camera_ray(double u, double v) const { return camera_intrinsics.intrinsic_inverse() * Vec3{u, v, 1.0}; }

  Vec2 project_to_camera(const Vec3& world) const {
    const Vec3 p = camera_intrinsics * world;
    return {p.x / p.z, p.y / p.z};
  }

  Vec3 to_projector_frame(const Vec3& world) const { return projector_rotation * world + projector_translation; }

  Vec2 project_to_projector(const Vec3& world) const {
    const Vec3 p = projector_intrinsics * to_projector_frame(world);
    return {p.x / p.z, p.y / p.z};
  }

  double coded_coordinate(const Vec3& world) const {
    const Vec2 p = project_to_projector(world);
    return coded_axis == FringeOrientation::Vertical ? p.x : p.y;
  }

  /// Projector centre of projection in world coordinates.
  Vec3 projector_center() const { return (projector_rotation.transposed() * projector_translation) * -1.0; }
};

inline nlohmann::json calibration_to_json(const CalibrationModel& c) {
  auto mat = [](const Mat3& m) { return nlohmann::json(m.m); };
  return {{"schema_version", 1},
          {"units", "mm"},
          {"camera_intrinsics", mat(c.camera_intrinsics)},
          {"projector_intrinsics", mat(c.projector_intrinsics)},
          {"projector_rotation", mat(c.projector_rotation)},
          {"projector_translation", {c.projector_translation.x, c.projector_translation.y, c.projector_translation.z}},
          {"fringe_period", c.fringe_period},
          {"coded_axis", to_string(c.coded_axis)},
          {"projector_width", c.projector_width},
          {"projector_height", c.projector_height},
          {"z_min", c.z_min},
          {"z_max", c.z_max},
          {"distortion", {{"camera", nlohmann::json::array()}, {"projector", nlohmann::json::array()}}}};
}

/// Parses the calibration JSON schema (see docs/calibration.md).
inline CalibrationModel parse_calibration(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i)
      if (text[i] == '\n') ++line;
    throw FormatError(std::string("calibration is not valid JSON: ") + e.what(), line);
  }
  if (!j.is_object()) throw FormatError("calibration root must be an object");

  auto require = [&](const char* field) -> const nlohmann::json& {
    if (!j.contains(field)) throw FormatError("missing required field", 0, field);
    return j[field];
  };
  auto number = [&](const nlohmann::json& v, const char* field) {
    if (!v.is_number()) throw FormatError("expected a number", 0, field);
    return v.get<double>();
  };
  auto matrix = [&](const char* field) {
    const auto& v = require(field);
    if (!v.is_array() || v.size() != 9) throw FormatError("expected 9 row-major numbers", 0, field);
    Mat3 m;
    for (std::size_t i = 0; i < 9; ++i) m.m[i] = number(v[i], field);
    return m;
  };

  if (j.contains("units") && j["units"] != "mm") throw FormatError("only millimetre units are supported", 0, "units");

  CalibrationModel c;
  c.camera_intrinsics = matrix("camera_intrinsics");
  c.projector_intrinsics = matrix("projector_intrinsics");
  c.projector_rotation = matrix("projector_rotation");
  const auto& t = require("projector_translation");
  if (!t.is_array() || t.size() != 3) throw FormatError("expected 3 numbers", 0, "projector_translation");
  c.projector_translation = {number(t[0], "projector_translation"), number(t[1], "projector_translation"),
                             number(t[2], "projector_translation")};
  c.fringe_period = number(require("fringe_period"), "fringe_period");
  if (j.contains("coded_axis")) {
    if (!j["coded_axis"].is_string()) throw FormatError("expected a string", 0, "coded_axis");
    try {
      c.coded_axis = orientation_from_string(j["coded_axis"].get<std::string>());
    } catch (const ParameterError& e) {
      throw FormatError(e.what(), 0, "coded_axis");
    }
  }
  if (j.contains("projector_width")) c.projector_width = static_cast<int>(number(j["projector_width"], "projector_width"));
  if (j.contains("projector_height")) c.projector_height = static_cast<int>(number(j["projector_height"], "projector_height"));
  if (j.contains("z_min")) c.z_min = number(j["z_min"], "z_min");
  if (j.contains("z_max")) c.z_max = number(j["z_max"], "z_max");
  if (j.contains("distortion")) {
    // Reserved; the pinhole model only accepts all-zero coefficients.
    for (const auto& [key, coeffs] : j["distortion"].items())
      for (const auto& v : coeffs)
        if (!v.is_number() || v.get<double>() != 0.0)
          throw ValidationError("lens distortion is not supported (distortion." + key + " must be zero)");
  }
  c.validate();
  return c;
}

inline CalibrationModel load_calibration(const std::filesystem::path& path) {
  return parse_calibration(read_text_file(path));
}

inline void save_calibration(const CalibrationModel& c, const std::filesystem::path& path) {
  write_text_file(path, calibration_to_json(c).dump(2) + "\n");
}

/// Synthetic rig used by the simulator fixtures: camera at the origin, projector
/// `baseline` mm along +x aimed at (0, 0, aim_distance).
inline CalibrationModel synthetic_calibration(int camera_width = 512, int camera_height = 512,
                                              double baseline = 150.0, double aim_distance = 500.0,
                                              double camera_focal = 1000.0) {
  CalibrationModel c;
  c.camera_intrinsics.m = {camera_focal, 0, (camera_width - 1) / 2.0, 0, camera_focal, (camera_height - 1) / 2.0, 0, 0, 1};
  c.projector_intrinsics.m = {1500, 0, (912 - 1) / 2.0, 0, 1500, (1140 - 1) / 2.0, 0, 0, 1};
  const Vec3 center{baseline, 0, 0};
  const Vec3 axis_z = (Vec3{0, 0, aim_distance} - center) * (1.0 / (Vec3{0, 0, aim_distance} - center).norm());
  const Vec3 axis_y{0, 1, 0};
  const Vec3 axis_x = axis_y.cross(axis_z);
  c.projector_rotation.m = {axis_x.x, axis_x.y, axis_x.z, axis_y.x, axis_y.y, axis_y.z, axis_z.x, axis_z.y, axis_z.z};
  c.projector_translation = (c.projector_rotation * center) * -1.0;
  c.fringe_period = 18.0;
  c.projector_width = 912;
  c.projector_height = 1140;
  return c;
}

/// Per-pixel depth and camera-frame coordinates, aligned with the camera image.
struct DepthFrame {
  ImageF64 z;               // mm, NaN where invalid
  Image<Vec3> world_xyz;    // mm
  Mask valid;
  Mat3 camera_intrinsics;
  std::optional<ReliabilityMask> reliability;

  int width() const { return z.width(); }
  int height() const { return z.height(); }

  /// Sets pixel (x, y) to depth `depth` on the camera ray through that pixel.
  void set_depth(int x, int y, double depth) {
    const Vec3 ray = camera_intrinsics.intrinsic_inverse() * Vec3{double(x), double(y), 1.0};
    z(x, y) = depth;
    world_xyz(x, y) = ray * depth;
    valid(x, y) = 1;
  }

  void invalidate(int x, int y) {
    z(x, y) = std::numeric_limits<double>::quiet_NaN();
    world_xyz(x, y) = {};
    valid(x, y) = 0;
  }

  static DepthFrame empty(int w, int h, const Mat3& intrinsics) {
    return {ImageF64(w, h, std::numeric_limits<double>::quiet_NaN()), Image<Vec3>(w, h), Mask(w, h), intrinsics,
            std::nullopt};
  }
};

/// u_p = Phi * T / (2 pi); NaN on invalid pixels.
inline ImageF64 phase_to_projector_column(const AbsolutePhaseMap& abs_phase, double period) {
  if (!(period > 0)) throw ParameterError("fringe period must be > 0");
  ImageF64 out(abs_phase.phase.width(), abs_phase.phase.height(), std::numeric_limits<double>::quiet_NaN());
  const double scale = period / (2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (abs_phase.valid[i]) out[i] = abs_phase.phase[i] * scale;
  return out;
}

struct TriangulationDiagnostics {
  std::size_t invalid_input = 0;
  std::size_t degenerate = 0;
  std::size_t out_of_volume = 0;
  std::size_t valid = 0;
};

/// Intersects each camera ray with the projector plane of constant coded
/// coordinate. With X = z d (d = K_c^-1 [u v 1]) and P = K_p [R | t], the
/// plane is (P_c - q P_2) [X; 1] = 0, giving z = -b / (a . d).
inline DepthFrame triangulate(const ImageF64& coordinates, const CalibrationModel& calib,
                              TriangulationDiagnostics* diagnostics = nullptr, double parallel_epsilon = 1e-8) {
  calib.validate();
  const int w = coordinates.width();
  const int h = coordinates.height();
  DepthFrame frame = DepthFrame::empty(w, h, calib.camera_intrinsics);

  const Mat3 kr = calib.projector_intrinsics * calib.projector_rotation;
  const Vec3 kt = calib.projector_intrinsics * calib.projector_translation;
  const int coded_row = calib.coded_axis == FringeOrientation::Vertical ? 0 : 1;
  const Vec3 pc = kr.row(coded_row);
  const Vec3 p2 = kr.row(2);
  const double tc = coded_row == 0 ? kt.x : kt.y;
  const double t2 = kt.z;
  const Mat3 k_inv = calib.camera_intrinsics.intrinsic_inverse();

  std::vector<TriangulationDiagnostics> per_row(static_cast<std::size_t>(h));
  parallel_for(h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      auto& d = per_row[static_cast<std::size_t>(y)];
      for (int x = 0; x < w; ++x) {
        const double q = coordinates(x, y);
        if (!std::isfinite(q)) {
          ++d.invalid_input;
          continue;
        }
        const Vec3 ray = k_inv * Vec3{double(x), double(y), 1.0};
        const Vec3 a = pc - p2 * q;
        const double b = tc - q * t2;
        const double denom = a.dot(ray);
        if (std::abs(denom) < parallel_epsilon) {
          ++d.degenerate;
          continue;
        }
        const double z = -b / denom;
        if (!(z >= calib.z_min && z <= calib.z_max)) {
          ++d.out_of_volume;
          continue;
        }
        frame.z(x, y) = z;
        frame.world_xyz(x, y) = ray * z;
        frame.valid(x, y) = 1;
        ++d.valid;
      }
    }
  });
  if (diagnostics) {
    *diagnostics = {};
    for (const auto& d : per_row) {
      diagnostics->invalid_input += d.invalid_input;
      diagnostics->degenerate += d.degenerate;
      diagnostics->out_of_volume += d.out_of_volume;
      diagnostics->valid += d.valid;
    }
  }
  return frame;
}

}  // namespace fpp
