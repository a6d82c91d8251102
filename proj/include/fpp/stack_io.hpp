#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpp/core/atomic_file.hpp"
#include "fpp/core/image_io.hpp"
#include "fpp/phase.hpp"

namespace fpp {

// Stack directory layout: manifest.json naming every capture relative to the
// directory, plus acquisition metadata.
//
// {
//   "schema_version": 1,
//   "num_shifts": 18, "num_gray_bits": 6, "fringe_period": 18.0,
//   "orientation": "vertical", "bit_depth": 16,
//   "phase_files": ["phase_00.png", ...],
//   "gray_files": ["gray_00.png", ...],
//   "white_file": "white.png"
// }

inline ImageStack load_stack(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("stack manifest is not valid JSON: ") + e.what());
  }
  for (const char* field : {"phase_files", "gray_files", "white_file", "fringe_period"})
    if (!m.contains(field)) throw FormatError("stack manifest missing field", 0, field);

  ImageStack stack;
  try {
    stack.fringe_period = m["fringe_period"].get<double>();
    stack.orientation = orientation_from_string(m.value("orientation", std::string("vertical")));
    int depth = 0;
    for (const auto& f : m["phase_files"]) {
      auto img = read_image(dir / f.get<std::string>());
      depth = std::max(depth, img.bit_depth);
      stack.phase_images.push_back(std::move(img.pixels));
    }
    for (const auto& f : m["gray_files"]) stack.gray_images.push_back(read_image(dir / f.get<std::string>()).pixels);
    stack.white_image = read_image(dir / m["white_file"].get<std::string>()).pixels;
    stack.source_bit_depth = m.value("bit_depth", depth);
  } catch (const nlohmann::json::type_error& e) {
    throw FormatError(std::string("stack manifest has a mistyped field: ") + e.what());
  }
  if (m.contains("num_shifts") && m["num_shifts"].get<int>() != stack.num_shifts())
    throw FormatError("num_shifts does not match phase_files", 0, "num_shifts");
  if (m.contains("num_gray_bits") && m["num_gray_bits"].get<int>() != stack.num_gray_bits())
    throw FormatError("num_gray_bits does not match gray_files", 0, "num_gray_bits");
  stack.validate();
  return stack;
}

inline void save_stack(const ImageStack& stack, const std::filesystem::path& dir, int bit_depth = 16) {
  stack.validate();
  nlohmann::json m;
  m["schema_version"] = 1;
  m["num_shifts"] = stack.num_shifts();
  m["num_gray_bits"] = stack.num_gray_bits();
  m["fringe_period"] = stack.fringe_period;
  m["orientation"] = to_string(stack.orientation);
  m["bit_depth"] = bit_depth;
  m["width"] = stack.width();
  m["height"] = stack.height();
  m["phase_files"] = nlohmann::json::array();
  m["gray_files"] = nlohmann::json::array();
  for (int n = 0; n < stack.num_shifts(); ++n) {
    const auto name = indexed_name("phase", n);
    write_image(dir / name, stack.phase_images[static_cast<std::size_t>(n)], bit_depth);
    m["phase_files"].push_back(name);
  }
  for (int b = 0; b < stack.num_gray_bits(); ++b) {
    const auto name = indexed_name("gray", b);
    write_image(dir / name, stack.gray_images[static_cast<std::size_t>(b)], bit_depth);
    m["gray_files"].push_back(name);
  }
  write_image(dir / "white.png", stack.white_image, bit_depth);
  m["white_file"] = "white.png";
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace fpp
