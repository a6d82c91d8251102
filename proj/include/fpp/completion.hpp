#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpp/annotations/components.hpp"
#include "fpp/geometry.hpp"

namespace fpp {

/// Input to a depth completion backend. `sparse_depth` holds reliable pixels
/// only; `unreliable` marks the pixels to fill.
struct CompletionRequest {
  DepthFrame sparse_depth;
  ImageF64 guidance;
  Mask unreliable;

  int width() const { return sparse_depth.width(); }
  int height() const { return sparse_depth.height(); }

  void validate() const {
    require_same_shape(guidance, sparse_depth.z, "guidance vs sparse depth");
    require_same_shape(unreliable, sparse_depth.z, "unreliable mask vs sparse depth");
    for (std::size_t i = 0; i < unreliable.size(); ++i)
      if (unreliable[i] && sparse_depth.valid[i])
        throw ValidationError("unreliable mask overlaps valid sparse depth at pixel " + std::to_string(i));
  }
};

struct HoleReport {
  std::size_t pixels = 0;
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  bool completed = false;
  int iterations = 0;
  double residual = 0.0;
};

struct CompletionReport {
  std::string backend = "harmonic";
  std::vector<HoleReport> holes;
  std::size_t completed_pixels = 0;
  std::size_t skipped_pixels = 0;
  std::vector<std::string> warnings;

  std::size_t skipped_holes() const {
    return static_cast<std::size_t>(std::count_if(holes.begin(), holes.end(), [](const HoleReport& h) { return !h.completed; }));
  }

  nlohmann::json to_json() const {
    nlohmann::json holes_json = nlohmann::json::array();
    for (const auto& h : holes)
      holes_json.push_back({{"pixels", h.pixels},
                            {"bbox", {h.min_x, h.min_y, h.max_x, h.max_y}},
                            {"completed", h.completed},
                            {"iterations", h.iterations},
                            {"residual", h.residual}});
    return {{"backend", backend},
            {"completed_pixels", completed_pixels},
            {"skipped_pixels", skipped_pixels},
            {"skipped_holes", skipped_holes()},
            {"holes", holes_json},
            {"warnings", warnings}};
  }
};

struct CompletionResult {
  DepthFrame frame;
  CompletionReport report;
};

struct HarmonicOptions {
  /// Bound on the completed depth error, mm.
  double tolerance = 1e-6;
  int max_iterations = 10000;
};

/// Copies reliable pixels verbatim and leaves everything else invalid.
inline DepthFrame pass_through(const DepthFrame& sparse) {
  DepthFrame out = DepthFrame::empty(sparse.width(), sparse.height(), sparse.camera_intrinsics);
  out.reliability = sparse.reliability;
  for (std::size_t i = 0; i < out.z.size(); ++i)
    if (sparse.valid[i]) {
      out.z[i] = sparse.z[i];
      out.world_xyz[i] = sparse.world_xyz[i];
      out.valid[i] = 1;
    }
  return out;
}

namespace detail {

struct HoleSystem {
  std::vector<int> xs, ys;
  std::vector<std::array<int, 4>> neighbours;  // index into the hole, -1 if none
  std::vector<double> fixed_sum;               // Dirichlet contributions
  std::vector<int> degree;                     // Dirichlet + interior neighbours
  std::vector<std::size_t> red, black;
};

/// Solves the discrete Laplace equation on one hole by red-black SOR.
/// Reliable neighbours are Dirichlet data; out-of-image and invalid
/// neighbours are dropped from the stencil (zero-flux). The iteration stops
/// once max|r| / lambda_min < tolerance, where r is the Jacobi residual and
/// lambda_min = 1 - cos(pi / (n + 1)) lower-bounds the smallest eigenvalue
/// of the normalized operator for a hole spanning fewer than n pixels, so the
/// remaining error is below `tolerance`.
inline void solve_hole(HoleSystem& sys, std::vector<double>& value, int span, const HarmonicOptions& options,
                       HoleReport& report) {
  const std::size_t n = sys.xs.size();
  const double lambda_min = 1.0 - std::cos(std::numbers::pi / (2.0 * span + 1.0));
  const double omega = 2.0 / (1.0 + std::sin(std::numbers::pi / (span + 1.0)));
  const double target = options.tolerance * lambda_min;

  auto average = [&](std::size_t i) {
    double s = sys.fixed_sum[i];
    for (int nb : sys.neighbours[i])
      if (nb >= 0) s += value[static_cast<std::size_t>(nb)];
    return s / sys.degree[i];
  };
  auto residual = [&] {
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r = std::max(r, std::abs(average(i) - value[i]));
    return r;
  };

  double r = residual();
  int iter = 0;
  while (r >= target && iter < options.max_iterations) {
    for (const auto* colour : {&sys.red, &sys.black})
      for (std::size_t i : *colour) value[i] += omega * (average(i) - value[i]);
    ++iter;
    if (iter % 8 == 0 || iter == options.max_iterations) r = residual();
  }
  report.iterations = iter;
  report.residual = r / lambda_min;
  if (r >= target)
    throw ConvergenceError("harmonic completion did not converge in " + std::to_string(options.max_iterations) +
                           " iterations (error bound " + std::to_string(r / lambda_min) + " mm)");
}

}  // namespace detail

/// Fills every 4-connected unreliable hole with the harmonic interpolant of
/// its reliable boundary. Reliable pixels pass through unchanged; holes with
/// no reliable boundary are left invalid and reported.
inline CompletionResult complete_depth_harmonic(const CompletionRequest& req, const HarmonicOptions& options = {}) {
  req.validate();
  if (!(options.tolerance > 0)) throw ParameterError("harmonic tolerance must be > 0");
  if (options.max_iterations < 1) throw ParameterError("max_iterations must be >= 1");
  const int w = req.width(), h = req.height();
  CompletionResult result{pass_through(req.sparse_depth), {}};
  const Components holes = label_components(req.unreliable, false);

  std::vector<std::vector<std::size_t>> members(holes.count());
  for (std::size_t i = 0; i < holes.labels.size(); ++i)
    if (holes.labels[i] > 0) members[static_cast<std::size_t>(holes.labels[i] - 1)].push_back(i);

  std::vector<HoleReport> reports(holes.count());
  std::vector<std::vector<double>> solutions(holes.count());
  std::vector<std::exception_ptr> failures(holes.count());
  parallel_for(static_cast<int>(holes.count()), [&](int h0, int h1) {
    for (int hole = h0; hole < h1; ++hole) {
      const auto& pix = members[static_cast<std::size_t>(hole)];
      auto& rep = reports[static_cast<std::size_t>(hole)];
      detail::HoleSystem sys;
      rep.pixels = pix.size();
      rep.min_x = w, rep.min_y = h, rep.max_x = -1, rep.max_y = -1;
      for (std::size_t k = 0; k < pix.size(); ++k) {
        const int x = static_cast<int>(pix[k] % static_cast<std::size_t>(w));
        const int y = static_cast<int>(pix[k] / static_cast<std::size_t>(w));
        sys.xs.push_back(x);
        sys.ys.push_back(y);
        rep.min_x = std::min(rep.min_x, x), rep.max_x = std::max(rep.max_x, x);
        rep.min_y = std::min(rep.min_y, y), rep.max_y = std::max(rep.max_y, y);
      }
      // Local index lookup over the hole's bounding box.
      const int bw = rep.max_x - rep.min_x + 1, bh = rep.max_y - rep.min_y + 1;
      std::vector<int> index(static_cast<std::size_t>(bw) * static_cast<std::size_t>(bh), -1);
      for (std::size_t k = 0; k < pix.size(); ++k)
        index[static_cast<std::size_t>(sys.ys[k] - rep.min_y) * static_cast<std::size_t>(bw) +
              static_cast<std::size_t>(sys.xs[k] - rep.min_x)] = static_cast<int>(k);

      // Boundary values are shifted by their mean so the residual test is not
      // limited by the absolute depth magnitude.
      double boundary_sum = 0.0;
      std::size_t boundary_count = 0;
      constexpr int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (std::size_t k = 0; k < pix.size(); ++k)
        for (int d = 0; d < 4; ++d) {
          const int nx = sys.xs[k] + dx[d], ny = sys.ys[k] + dy[d];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (req.sparse_depth.valid(nx, ny) && !req.unreliable(nx, ny)) {
            boundary_sum += req.sparse_depth.z(nx, ny);
            ++boundary_count;
          }
        }
      if (boundary_count == 0) continue;
      const double offset = boundary_sum / static_cast<double>(boundary_count);

      sys.neighbours.resize(pix.size());
      sys.fixed_sum.assign(pix.size(), 0.0);
      sys.degree.assign(pix.size(), 0);
      for (std::size_t k = 0; k < pix.size(); ++k) {
        auto& nbs = sys.neighbours[k];
        nbs.fill(-1);
        for (int d = 0; d < 4; ++d) {
          const int nx = sys.xs[k] + dx[d], ny = sys.ys[k] + dy[d];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (req.unreliable(nx, ny)) {
            nbs[static_cast<std::size_t>(d)] =
                index[static_cast<std::size_t>(ny - rep.min_y) * static_cast<std::size_t>(bw) + static_cast<std::size_t>(nx - rep.min_x)];
            ++sys.degree[k];
          } else if (req.sparse_depth.valid(nx, ny)) {
            sys.fixed_sum[k] += req.sparse_depth.z(nx, ny) - offset;
            ++sys.degree[k];
          }
        }
        ((sys.xs[k] + sys.ys[k]) % 2 == 0 ? sys.red : sys.black).push_back(k);
      }

      std::vector<double> value(pix.size(), 0.0);
      try {
        detail::solve_hole(sys, value, std::max(bw, bh), options, rep);
      } catch (...) {
        failures[static_cast<std::size_t>(hole)] = std::current_exception();
        continue;
      }
      for (auto& v : value) v += offset;
      solutions[static_cast<std::size_t>(hole)] = std::move(value);
      rep.completed = true;
    }
  });
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  for (std::size_t hole = 0; hole < holes.count(); ++hole) {
    const auto& rep = reports[hole];
    if (!rep.completed) {
      result.report.skipped_pixels += rep.pixels;
      result.report.warnings.push_back("hole of " + std::to_string(rep.pixels) + " px at (" + std::to_string(rep.min_x) +
                                       ", " + std::to_string(rep.min_y) + ") has no reliable boundary; left invalid");
      continue;
    }
    const auto& pix = members[hole];
    for (std::size_t k = 0; k < pix.size(); ++k) {
      const int x = static_cast<int>(pix[k] % static_cast<std::size_t>(w));
      const int y = static_cast<int>(pix[k] / static_cast<std::size_t>(w));
      result.frame.set_depth(x, y, solutions[hole][k]);
    }
    result.report.completed_pixels += pix.size();
  }
  result.report.holes = std::move(reports);
  return result;
}

}  // namespace fpp
