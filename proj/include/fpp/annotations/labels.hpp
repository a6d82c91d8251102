#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fpp/annotations/polygon.hpp"
#include "fpp/annotations/taxonomy.hpp"
#include "fpp/core/error.hpp"

namespace fpp {

/// One labelled object. Polygon vertices are normalized by image width/height.
struct Instance {
  int class_id = 0;
  Polygon polygon;
  double confidence = 1.0;
};

struct AnnotationSet {
  std::vector<Instance> instances;
  int image_width = 0;
  int image_height = 0;
};

struct LabelSyntax {
  /// Accept/emit a trailing confidence token after the coordinates.
  bool with_confidence = false;
  int num_classes = 11;
};

namespace detail {

inline bool parse_double(std::string_view token, double& out) {
  // from_chars for double is available in libstdc++ 11.
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

}  // namespace detail

/// Parses polygon label text: one instance per line, `class x1 y1 x2 y2 ...`.
/// Blank lines are skipped.
inline AnnotationSet parse_labels(std::string_view text, int width, int height, const LabelSyntax& syntax = {}) {
  AnnotationSet set;
  set.image_width = width;
  set.image_height = height;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    auto tokens = detail::split_ws(line);
    if (tokens.empty()) continue;

    Instance inst;
    int class_id = -1;
    {
      auto [ptr, ec] = std::from_chars(tokens[0].data(), tokens[0].data() + tokens[0].size(), class_id);
      if (ec != std::errc() || ptr != tokens[0].data() + tokens[0].size())
        throw FormatError("class id is not an integer: '" + std::string(tokens[0]) + "'", line_no, "class_id");
    }
    if (class_id < 0 || class_id >= syntax.num_classes)
      throw FormatError("class id out of range: " + std::to_string(class_id), line_no, "class_id");
    inst.class_id = class_id;

    std::size_t coord_end = tokens.size();
    if (syntax.with_confidence) {
      if (tokens.size() < 2) throw FormatError("missing confidence", line_no, "confidence");
      double conf = 0;
      if (!detail::parse_double(tokens.back(), conf)) throw FormatError("bad confidence", line_no, "confidence");
      if (conf < 0 || conf > 1) throw FormatError("confidence outside [0,1]", line_no, "confidence");
      inst.confidence = conf;
      --coord_end;
    }
    const std::size_t coords = coord_end - 1;
    if (coords % 2 != 0) throw FormatError("odd number of coordinates (" + std::to_string(coords) + ")", line_no);
    if (coords < 6) throw FormatError("polygon needs at least 3 vertices", line_no);
    for (std::size_t i = 1; i < coord_end; i += 2) {
      Vec2 v;
      if (!detail::parse_double(tokens[i], v.x) || !detail::parse_double(tokens[i + 1], v.y))
        throw FormatError("coordinate is not a number", line_no);
      if (v.x < 0 || v.x > 1 || v.y < 0 || v.y > 1) throw FormatError("coordinate outside [0,1]", line_no);
      inst.polygon.push_back(v);
    }
    set.instances.push_back(std::move(inst));
  }
  return set;
}

/// Emits one line per instance, coordinates with 6 decimals.
inline std::string serialize_labels(const AnnotationSet& set, const LabelSyntax& syntax = {}) {
  std::string out;
  char buf[32];
  for (const auto& inst : set.instances) {
    out += std::to_string(inst.class_id);
    for (const auto& v : inst.polygon) {
      std::snprintf(buf, sizeof buf, " %.6f %.6f", std::clamp(v.x, 0.0, 1.0), std::clamp(v.y, 0.0, 1.0));
      out += buf;
    }
    if (syntax.with_confidence) {
      std::snprintf(buf, sizeof buf, " %.6f", inst.confidence);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace fpp
