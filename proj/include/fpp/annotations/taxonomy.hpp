#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpp/core/atomic_file.hpp"
#include "fpp/core/error.hpp"

namespace fpp {

struct TaxonomyClass {
  int id = 0;
  std::string name;
  std::string category;
};

/// Ordered class list with dense ids 0..n-1.
class Taxonomy {
 public:
  Taxonomy() = default;
  explicit Taxonomy(std::vector<TaxonomyClass> classes) : classes_(std::move(classes)) {
    for (std::size_t i = 0; i < classes_.size(); ++i)
      if (classes_[i].id != static_cast<int>(i)) throw ValidationError("taxonomy ids must be dense and ordered from 0");
  }

  /// The 11 hard-drive component classes.
  static const Taxonomy& hdd() {
    static const Taxonomy t({{0, "Platter", "Mechanical & Moving"},
                             {1, "Spindle Motor Hub", "Mechanical & Moving"},
                             {2, "Top Plate", "Mechanical & Moving"},
                             {3, "Read-Write-Head", "Mechanical & Moving"},
                             {4, "Bearing", "Mechanical & Moving"},
                             {5, "Landing Tray", "Mechanical & Moving"},
                             {6, "PCB", "Electronics & Interfaces"},
                             {7, "Magnet", "Electronics & Interfaces"},
                             {8, "SATA Connector", "Electronics & Interfaces"},
                             {9, "SATA Power Connector", "Electronics & Interfaces"},
                             {10, "Screw", "Fasteners"}});
    return t;
  }

  std::size_t size() const { return classes_.size(); }
  const std::vector<TaxonomyClass>& classes() const { return classes_; }
  const TaxonomyClass& at(int id) const {
    if (!contains(id)) throw ParameterError("class id out of range: " + std::to_string(id));
    return classes_[static_cast<std::size_t>(id)];
  }
  bool contains(int id) const { return id >= 0 && id < static_cast<int>(classes_.size()); }

  std::optional<int> find(const std::string& name) const {
    for (const auto& c : classes_)
      if (c.name == name) return c.id;
    return std::nullopt;
  }

  int require(const std::string& name) const {
    if (auto id = find(name)) return *id;
    throw ValidationError("taxonomy has no class named '" + name + "'");
  }

  nlohmann::json to_json() const {
    auto out = nlohmann::json::array();
    for (const auto& c : classes_) out.push_back({{"id", c.id}, {"name", c.name}, {"category", c.category}});
    return out;
  }

  static Taxonomy from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw FormatError("taxonomy must be a JSON list");
    std::vector<TaxonomyClass> classes;
    for (const auto& e : j) {
      for (const char* f : {"id", "name", "category"})
        if (!e.contains(f)) throw FormatError("taxonomy entry missing field", 0, f);
      classes.push_back({e["id"].get<int>(), e["name"].get<std::string>(), e["category"].get<std::string>()});
    }
    return Taxonomy(std::move(classes));
  }

  static Taxonomy load(const std::filesystem::path& path) {
    try {
      return from_json(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad taxonomy file: ") + e.what());
    }
  }

 private:
  std::vector<TaxonomyClass> classes_;
};

inline constexpr std::uint8_t kUnlabeled = 255;

/// Display colour for a class id; unlabeled points are grey.
inline std::array<std::uint8_t, 3> class_color(std::uint8_t label) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 11> palette{{{230, 25, 75},
                                                                       {60, 180, 75},
                                                                       {255, 225, 25},
                                                                       {0, 130, 200},
                                                                       {245, 130, 48},
                                                                       {145, 30, 180},
                                                                       {70, 240, 240},
                                                                       {240, 50, 230},
                                                                       {210, 245, 60},
                                                                       {250, 190, 212},
                                                                       {0, 128, 128}}};
  if (label < palette.size()) return palette[label];
  return {128, 128, 128};
}

}  // namespace fpp
