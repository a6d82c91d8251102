#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "fpp/core/image.hpp"
#include "fpp/core/image_io.hpp"

namespace fpp {

/// Vertical fringes vary along projector columns (u), horizontal along rows (v).
enum class FringeOrientation { Vertical, Horizontal };

inline std::string to_string(FringeOrientation o) { return o == FringeOrientation::Vertical ? "vertical" : "horizontal"; }

inline FringeOrientation orientation_from_string(const std::string& s) {
  if (s == "vertical") return FringeOrientation::Vertical;
  if (s == "horizontal") return FringeOrientation::Horizontal;
  throw ParameterError("orientation must be 'vertical' or 'horizontal', got '" + s + "'");
}

/// Phase shift of the n-th pattern (0-based): equally spaced over one period.
inline double phase_shift(int n, int num_shifts) {
  return 2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(num_shifts);
}

/// Ideal fringe profile 0.5 + 0.5 cos(2 pi coord / T + shift).
inline double fringe_intensity(double coord, double period, double shift) {
  return 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * coord / period + shift);
}

/// Fringe order of a projector coordinate. Orders change where the wrapped
/// phase jumps from +pi to -pi, i.e. at coord = (k + 1/2) T.
inline int fringe_order_at(double coord, double period) {
  return static_cast<int>(std::floor(coord / period + 0.5));
}

constexpr std::uint32_t gray_encode(std::uint32_t k) noexcept { return k ^ (k >> 1); }

constexpr std::uint32_t gray_decode(std::uint32_t g) noexcept {
  std::uint32_t k = g;
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) k ^= k >> shift;
  return k;
}

/// Bit shown by gray plane `plane` (0 = most significant) for fringe order k.
constexpr bool gray_plane_bit(std::uint32_t k, int plane, int num_bits) noexcept {
  return ((gray_encode(k) >> (num_bits - 1 - plane)) & 1u) != 0;
}

struct PatternParams {
  int projector_width = 912;
  int projector_height = 1140;
  double fringe_period = 18.0;
  int num_shifts = 18;
  int num_gray_bits = 6;
  FringeOrientation orientation = FringeOrientation::Vertical;

  int coded_extent() const { return orientation == FringeOrientation::Vertical ? projector_width : projector_height; }

  int max_fringe_order() const { return fringe_order_at(coded_extent() - 1, fringe_period); }

  void validate() const {
    if (projector_width <= 0 || projector_height <= 0) throw ParameterError("projector dimensions must be positive");
    if (!(fringe_period > 0.0) || !std::isfinite(fringe_period)) throw ParameterError("fringe period must be > 0");
    if (num_shifts < 3) throw ParameterError("phase shifting needs at least 3 shifts");
    if (num_gray_bits < 1 || num_gray_bits > 30) throw ParameterError("gray bits must be in [1, 30]");
    const double codes = std::ldexp(1.0, num_gray_bits);
    if (codes * fringe_period < coded_extent() || max_fringe_order() >= codes)
      throw ParameterError("insufficient gray bits: " + std::to_string(num_gray_bits) + " bits cannot code " +
                           std::to_string(max_fringe_order() + 1) + " fringe orders");
  }
};

struct PatternSet {
  std::vector<ImageF64> phase_patterns;
  std::vector<ImageF64> gray_patterns;
  ImageF64 white_pattern;
  PatternParams params;
  /// Set when phase patterns were binarized and blurred; the renderer then
  /// samples the stored images instead of the analytic profile.
  bool defocused = false;
};

namespace detail {

template <typename ColumnValue>
ImageF64 coded_image(const PatternParams& p, ColumnValue&& value) {
  ImageF64 img(p.projector_width, p.projector_height);
  const bool vertical = p.orientation == FringeOrientation::Vertical;
  std::vector<double> profile(static_cast<std::size_t>(p.coded_extent()));
  for (int c = 0; c < p.coded_extent(); ++c) profile[static_cast<std::size_t>(c)] = value(c);
  for (int y = 0; y < img.height(); ++y) {
    auto row = img.row(y);
    for (int x = 0; x < img.width(); ++x) row[static_cast<std::size_t>(x)] = profile[static_cast<std::size_t>(vertical ? x : y)];
  }
  return img;
}

}  // namespace detail

inline std::vector<ImageF64> generate_phase_patterns(const PatternParams& params) {
  params.validate();
  std::vector<ImageF64> out;
  out.reserve(static_cast<std::size_t>(params.num_shifts));
  for (int n = 0; n < params.num_shifts; ++n) {
    const double shift = phase_shift(n, params.num_shifts);
    out.push_back(detail::coded_image(params, [&](int c) {
      return std::clamp(fringe_intensity(c, params.fringe_period, shift), 0.0, 1.0);
    }));
  }
  return out;
}

/// Gray planes ordered most significant first; plane b is bright where bit b
/// of gray(k) is set for the fringe order k of that projector coordinate.
inline std::vector<ImageF64> generate_gray_patterns(const PatternParams& params) {
  params.validate();
  std::vector<ImageF64> out;
  out.reserve(static_cast<std::size_t>(params.num_gray_bits));
  for (int b = 0; b < params.num_gray_bits; ++b) {
    out.push_back(detail::coded_image(params, [&](int c) {
      const auto k = static_cast<std::uint32_t>(fringe_order_at(c, params.fringe_period));
      return gray_plane_bit(k, b, params.num_gray_bits) ? 1.0 : 0.0;
    }));
  }
  return out;
}

/// Thresholds at 0.5 and applies a Gaussian low-pass along the coded axis
/// (sigma = radius / 2, truncated at +-radius, clamped borders).
inline ImageF64 binary_defocus(const ImageF64& pattern, int kernel_radius,
                               FringeOrientation orientation = FringeOrientation::Vertical) {
  if (kernel_radius < 0) throw ParameterError("kernel radius must be >= 0");
  ImageF64 binary(pattern.width(), pattern.height());
  for (std::size_t i = 0; i < pattern.size(); ++i) binary[i] = pattern[i] >= 0.5 ? 1.0 : 0.0;
  if (kernel_radius == 0) return binary;

  const double sigma = kernel_radius / 2.0;
  std::vector<double> kernel(static_cast<std::size_t>(2 * kernel_radius + 1));
  double total = 0.0;
  for (int i = -kernel_radius; i <= kernel_radius; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + kernel_radius)] = w;
    total += w;
  }
  for (auto& w : kernel) w /= total;

  const bool vertical = orientation == FringeOrientation::Vertical;
  ImageF64 out(pattern.width(), pattern.height());
  for (int y = 0; y < pattern.height(); ++y) {
    for (int x = 0; x < pattern.width(); ++x) {
      double acc = 0.0;
      for (int i = -kernel_radius; i <= kernel_radius; ++i) {
        const int sx = vertical ? std::clamp(x + i, 0, pattern.width() - 1) : x;
        const int sy = vertical ? y : std::clamp(y + i, 0, pattern.height() - 1);
        acc += kernel[static_cast<std::size_t>(i + kernel_radius)] * binary(sx, sy);
      }
      out(x, y) = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

inline PatternSet generate_patterns(const PatternParams& params) {
  PatternSet set;
  set.params = params;
  set.phase_patterns = generate_phase_patterns(params);
  set.gray_patterns = generate_gray_patterns(params);
  set.white_pattern = ImageF64(params.projector_width, params.projector_height, 1.0);
  return set;
}

/// Pattern set whose phase patterns are 1-bit quasi-sinusoids.
inline PatternSet generate_defocused_patterns(const PatternParams& params, int kernel_radius) {
  PatternSet set = generate_patterns(params);
  for (auto& p : set.phase_patterns) p = binary_defocus(p, kernel_radius, params.orientation);
  set.defocused = true;
  return set;
}

inline std::string indexed_name(const std::string& prefix, int index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 2) digits.insert(0, 2 - digits.size(), '0');
  return prefix + "_" + digits + ".png";
}

/// Writes phase_00.png ... gray_05.png and white.png as 8-bit grayscale.
inline void export_patterns(const PatternSet& set, const std::filesystem::path& dir) {
  for (std::size_t n = 0; n < set.phase_patterns.size(); ++n)
    write_image(dir / indexed_name("phase", static_cast<int>(n)), set.phase_patterns[n], 8);
  for (std::size_t b = 0; b < set.gray_patterns.size(); ++b)
    write_image(dir / indexed_name("gray", static_cast<int>(b)), set.gray_patterns[b], 8);
  write_image(dir / "white.png", set.white_pattern, 8);
}

}  // namespace fpp
