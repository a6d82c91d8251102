#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include <unistd.h>

#include "fpp/fpp.hpp"

namespace fpp::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "fpp") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Stack whose pixel (x, y) sees projector column coord(x, y); intensities
/// follow the ideal fringe model with the given bias and amplitude.
template <typename Coord>
ImageStack synth_stack(int w, int h, double period, int shifts, int bits, Coord&& coord, double bias = 0.5, double amp = 0.5) {
  ImageStack s;
  s.fringe_period = period;
  for (int n = 0; n < shifts; ++n) {
    ImageF64 img(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img(x, y) = bias + amp * std::cos(2 * std::numbers::pi * coord(x, y) / period + phase_shift(n, shifts));
    s.phase_images.push_back(std::move(img));
  }
  for (int b = 0; b < bits; ++b) {
    ImageF64 img(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int k = fringe_order_at(coord(x, y), period);
        img(x, y) = gray_plane_bit(static_cast<std::uint32_t>(std::max(k, 0)), b, bits) ? 1.0 : 0.0;
      }
    s.gray_images.push_back(std::move(img));
  }
  s.white_image = ImageF64(w, h, 1.0);
  return s;
}

inline Polygon square(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

}  // namespace fpp::test
