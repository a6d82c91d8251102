#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "fpp/core/image.hpp"
#include "fpp/core/parallel.hpp"
#include "fpp/patterns.hpp"

namespace fpp {

/// Co-registered captures for one scan: N phase-shifted images, G gray-code
/// images and one fully illuminated image, all normalized to [0, 1].
struct ImageStack {
  std::vector<ImageF64> phase_images;
  std::vector<ImageF64> gray_images;
  ImageF64 white_image;
  double fringe_period = 18.0;
  FringeOrientation orientation = FringeOrientation::Vertical;
  /// Bit depth of the source files; 0 for synthetic floating-point captures.
  int source_bit_depth = 0;

  int width() const { return white_image.width(); }
  int height() const { return white_image.height(); }
  int num_shifts() const { return static_cast<int>(phase_images.size()); }
  int num_gray_bits() const { return static_cast<int>(gray_images.size()); }

  void validate() const {
    if (phase_images.size() < 3) throw ParameterError("image stack needs at least 3 phase images");
    if (gray_images.empty()) throw ParameterError("image stack needs at least 1 gray-code image");
    for (const auto& img : phase_images) require_same_shape(img, white_image, "phase image vs white image");
    for (const auto& img : gray_images) require_same_shape(img, white_image, "gray image vs white image");
  }
};

struct DecodeConfig {
  double modulation_floor = 0.02;
  double saturation_level = 0.995;
};

struct PhaseMap {
  ImageF64 wrapped_phase;      // radians in [-pi, pi); NaN where undefined
  ImageF64 average_intensity;  // I'
  ImageF64 modulation;         // I''
  Mask valid;
};

struct AbsolutePhaseMap {
  ImageF64 phase;  // NaN where invalid
  LabelImage fringe_order;
  Mask valid;
};

struct ReliabilityMask {
  Mask reliable;
  Mask saturated;
  Mask low_modulation;
};

/// Maps any angle into [-pi, pi).
inline double wrap_to_pi(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(angle + std::numbers::pi, two_pi);
  if (r < 0) r += two_pi;
  r -= std::numbers::pi;
  if (r >= std::numbers::pi) r -= two_pi;
  return r;
}

/// phi = -atan2(sum I_n sin d_n, sum I_n cos d_n), I' = mean, I'' = 2/N |S, C|.
inline PhaseMap compute_wrapped_phase(const ImageStack& stack, const DecodeConfig& config = {}) {
  stack.validate();
  const int w = stack.width();
  const int h = stack.height();
  const int n_shifts = stack.num_shifts();
  std::vector<double> sin_d(static_cast<std::size_t>(n_shifts)), cos_d(static_cast<std::size_t>(n_shifts));
  for (int n = 0; n < n_shifts; ++n) {
    sin_d[static_cast<std::size_t>(n)] = std::sin(phase_shift(n, n_shifts));
    cos_d[static_cast<std::size_t>(n)] = std::cos(phase_shift(n, n_shifts));
  }

  PhaseMap out{ImageF64(w, h), ImageF64(w, h), ImageF64(w, h), Mask(w, h)};
  const double inv_n = 1.0 / n_shifts;
  parallel_for(h, [&](int y0, int y1) {
    std::vector<double> s(static_cast<std::size_t>(w)), c(static_cast<std::size_t>(w)), m(static_cast<std::size_t>(w));
    for (int y = y0; y < y1; ++y) {
      std::fill(s.begin(), s.end(), 0.0);
      std::fill(c.begin(), c.end(), 0.0);
      std::fill(m.begin(), m.end(), 0.0);
      for (int n = 0; n < n_shifts; ++n) {
        const double sn = sin_d[static_cast<std::size_t>(n)];
        const double cn = cos_d[static_cast<std::size_t>(n)];
        const double* row = stack.phase_images[static_cast<std::size_t>(n)].row(y).data();
        for (int x = 0; x < w; ++x) {
          const double v = row[x];
          s[static_cast<std::size_t>(x)] += v * sn;
          c[static_cast<std::size_t>(x)] += v * cn;
          m[static_cast<std::size_t>(x)] += v;
        }
      }
      auto phi = out.wrapped_phase.row(y);
      auto avg = out.average_intensity.row(y);
      auto mod = out.modulation.row(y);
      auto valid = out.valid.row(y);
      for (int x = 0; x < w; ++x) {
        const auto i = static_cast<std::size_t>(x);
        avg[i] = m[i] * inv_n;
        mod[i] = 2.0 * inv_n * std::hypot(s[i], c[i]);
        if (s[i] == 0.0 && c[i] == 0.0) {
          phi[i] = std::numeric_limits<double>::quiet_NaN();
          valid[i] = 0;
          continue;
        }
        double p = -std::atan2(s[i], c[i]);
        if (p >= std::numbers::pi) p -= 2.0 * std::numbers::pi;
        phi[i] = p;
        valid[i] = mod[i] >= config.modulation_floor ? 1 : 0;
      }
    }
  });
  return out;
}

/// Per-pixel fringe order from the gray planes: bit b is set where plane b is
/// brighter than half the fully illuminated intensity.
inline LabelImage decode_fringe_order(const ImageStack& stack, const ImageF64& white) {
  stack.validate();
  require_same_shape(white, stack.white_image, "white image");
  const int w = stack.width();
  const int h = stack.height();
  const int bits = stack.num_gray_bits();
  LabelImage order(w, h);
  parallel_for(h, [&](int y0, int y1) {
    std::vector<std::uint32_t> code(static_cast<std::size_t>(w));
    for (int y = y0; y < y1; ++y) {
      std::fill(code.begin(), code.end(), 0u);
      const auto white_row = white.row(y);
      for (int b = 0; b < bits; ++b) {
        const auto row = stack.gray_images[static_cast<std::size_t>(b)].row(y);
        for (int x = 0; x < w; ++x) {
          const auto i = static_cast<std::size_t>(x);
          code[i] = (code[i] << 1) | (row[i] > 0.5 * white_row[i] ? 1u : 0u);
        }
      }
      auto out = order.row(y);
      for (int x = 0; x < w; ++x) out[static_cast<std::size_t>(x)] = static_cast<std::int32_t>(gray_decode(code[static_cast<std::size_t>(x)]));
    }
  });
  return order;
}

/// Absolute phase = wrapped phase + 2 pi k.
///
/// Gray transitions coincide with the phase wraps, so within an eighth of a
/// period of a wrap (|phi| > 3 pi/4) either the code or the sign of phi may
/// be misread. Such a pixel keeps its decoded order when the result lies within pi of the
/// absolute phase of the nearest "safe" pixel (|phi| <= pi/2) on either side
/// along the coded scan line. Otherwise the order one period toward the wrap
/// (k - 1 for phi > 0, k + 1 for phi < 0) is used if that one is consistent
/// with a side. Searches stop at invalid pixels, so true depth
/// discontinuities, which are consistent with one side, are left alone.
inline AbsolutePhaseMap unwrap_phase(const PhaseMap& phase, const LabelImage& order,
                                     FringeOrientation orientation = FringeOrientation::Vertical) {
  require_same_shape(phase.wrapped_phase, order, "phase map vs fringe order map");
  const int w = order.width();
  const int h = order.height();
  AbsolutePhaseMap out{ImageF64(w, h, std::numeric_limits<double>::quiet_NaN()), LabelImage(w, h), Mask(w, h)};

  const bool along_rows = orientation == FringeOrientation::Vertical;
  const int lines = along_rows ? h : w;
  const int length = along_rows ? w : h;
  constexpr double pi = std::numbers::pi;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  parallel_for(lines, [&](int l0, int l1) {
    std::vector<int> left(static_cast<std::size_t>(length)), right(static_cast<std::size_t>(length));
    for (int line = l0; line < l1; ++line) {
      auto at = [&](int t) { return along_rows ? std::pair{t, line} : std::pair{line, t}; };
      auto valid_at = [&](int t) { auto [x, y] = at(t); return phase.valid(x, y) != 0; };
      auto safe = [&](int t) { auto [x, y] = at(t); return phase.valid(x, y) && std::abs(phase.wrapped_phase(x, y)) <= pi / 2; };
      auto absolute = [&](int t) { auto [x, y] = at(t); return phase.wrapped_phase(x, y) + two_pi * order(x, y); };

      for (int t = 0, last = -1; t < length; ++t) {
        if (!valid_at(t)) last = -1;
        left[static_cast<std::size_t>(t)] = last;
        if (safe(t)) last = t;
      }
      for (int t = length - 1, last = -1; t >= 0; --t) {
        if (!valid_at(t)) last = -1;
        right[static_cast<std::size_t>(t)] = last;
        if (safe(t)) last = t;
      }

      for (int t = 0; t < length; ++t) {
        auto [x, y] = at(t);
        if (!phase.valid(x, y)) continue;
        const double p = phase.wrapped_phase(x, y);
        int k = order(x, y);
        if (std::abs(p) > 0.75 * pi) {
          const int refs[2] = {left[static_cast<std::size_t>(t)], right[static_cast<std::size_t>(t)]};
          auto consistent = [&](int candidate) {
            for (int r : refs)
              if (r >= 0 && std::abs(p + two_pi * candidate - absolute(r)) < pi) return true;
            return false;
          };
          const int alternative = k + (p > 0 ? -1 : 1);
          if (!consistent(k) && consistent(alternative)) k = alternative;
        }
        out.fringe_order(x, y) = k;
        out.phase(x, y) = p + two_pi * k;
        out.valid(x, y) = 1;
      }
    }
  });
  return out;
}

inline ReliabilityMask compute_reliability(const ImageStack& stack, const PhaseMap& phase, const DecodeConfig& config = {}) {
  stack.validate();
  require_same_shape(phase.modulation, stack.white_image, "phase map vs stack");
  const int w = stack.width();
  const int h = stack.height();
  ReliabilityMask out{Mask(w, h), Mask(w, h), Mask(w, h)};
  parallel_for(h, [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      auto sat = out.saturated.row(y);
      for (const auto& img : stack.phase_images) {
        const auto row = img.row(y);
        for (int x = 0; x < w; ++x)
          if (row[static_cast<std::size_t>(x)] >= config.saturation_level) sat[static_cast<std::size_t>(x)] = 1;
      }
      auto low = out.low_modulation.row(y);
      auto rel = out.reliable.row(y);
      const auto mod = phase.modulation.row(y);
      const auto valid = phase.valid.row(y);
      for (int x = 0; x < w; ++x) {
        const auto i = static_cast<std::size_t>(x);
        low[i] = mod[i] < config.modulation_floor ? 1 : 0;
        rel[i] = (!sat[i] && !low[i] && valid[i]) ? 1 : 0;
      }
    }
  });
  return out;
}

}  // namespace fpp
