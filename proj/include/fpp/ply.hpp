#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fpp/annotations/taxonomy.hpp"
#include "fpp/core/atomic_file.hpp"
#include "fpp/geometry.hpp"

namespace fpp {

/// Binary little-endian PLY of the valid pixels of a depth frame. With a label
/// image, each vertex also carries `label` (255 = unlabeled) and a class colour.
inline void export_pointcloud(const DepthFrame& frame, const Image<std::uint8_t>* labels, const std::filesystem::path& path) {
  if (labels) require_same_shape(*labels, frame.z, "label image vs depth frame");
  const std::size_t count = count_set(frame.valid);
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\ncomment units mm\nelement vertex " << count << "\n"
         << "property float x\nproperty float y\nproperty float z\n";
  if (labels) header << "property uchar label\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n";
  header << "end_header\n";

  write_atomically(path, [&](const std::filesystem::path& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp.string());
    const std::string h = header.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    std::vector<char> record;
    for (int y = 0; y < frame.height(); ++y)
      for (int x = 0; x < frame.width(); ++x) {
        if (!frame.valid(x, y)) continue;
        const Vec3& p = frame.world_xyz(x, y);
        const float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z)};
        out.write(reinterpret_cast<const char*>(xyz), sizeof xyz);
        if (labels) {
          const std::uint8_t l = (*labels)(x, y);
          const auto c = class_color(l);
          const std::uint8_t extra[4] = {l, c[0], c[1], c[2]};
          out.write(reinterpret_cast<const char*>(extra), sizeof extra);
        }
      }
    if (!out) throw IoError("write failed: " + path.string());
  });
}

struct PointCloud {
  std::vector<std::array<float, 3>> xyz;
  std::vector<std::uint8_t> labels;  // empty when the file has no label property
};

/// Reads back the PLY layout written by export_pointcloud.
inline PointCloud read_pointcloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t count = 0;
  bool has_label = false;
  std::vector<std::string> properties;
  std::getline(in, line);
  if (line != "ply") throw FormatError("not a PLY file");
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw FormatError("only binary_little_endian PLY is supported");
    } else if (kw == "element") {
      std::string name;
      ls >> name >> count;
    } else if (kw == "property") {
      std::string type, name;
      ls >> type >> name;
      properties.push_back(name);
      if (name == "label") has_label = true;
    }
  }
  const std::vector<std::string> plain{"x", "y", "z"};
  const std::vector<std::string> labelled{"x", "y", "z", "label", "red", "green", "blue"};
  if (properties != (has_label ? labelled : plain)) throw FormatError("unexpected PLY vertex layout");
  PointCloud cloud;
  cloud.xyz.resize(count);
  if (has_label) cloud.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(cloud.xyz[i].data()), 3 * sizeof(float));
    if (has_label) {
      std::uint8_t extra[4];
      in.read(reinterpret_cast<char*>(extra), 4);
      cloud.labels[i] = extra[0];
    }
  }
  if (!in) throw FormatError("truncated PLY body");
  return cloud;
}

}  // namespace fpp
