// Acceptance run: one PASS/FAIL line per criterion. Exit status is 0 unless
// the harness itself cannot start; failing criteria are reported, not fatal.

#include <CLI11.hpp>
#include <Eigen/Sparse>

#include <bit>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "fpp/fpp.hpp"
#include "support.hpp"

using namespace fpp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[fail] " << what << "; ";
    }
  }
  template <typename T>
  Outcome& note(const std::string& key, const T& value) {
    detail << key << "=" << value << "; ";
    return *this;
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

PatternParams rig_patterns(const CalibrationModel& calib) {
  PatternParams p;
  p.fringe_period = calib.fringe_period;
  p.num_shifts = 18;
  p.num_gray_bits = 6;
  p.projector_width = calib.projector_width;
  p.projector_height = calib.projector_height;
  return p;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------- 1 and 2

struct NamedScene {
  std::string name;
  SceneSpec scene;
};

std::vector<NamedScene> closed_loop_scenes(const CalibrationModel& calib) {
  const int w = 512, h = 512;
  std::vector<NamedScene> out;
  out.push_back({"plane", make_plane_scene(w, h, 500.0)});
  out.push_back({"ramp", make_ramp_scene(calib, w, h, 500.0, 0.2, -0.1)});
  // 40 mm across, standing 20 mm proud of the plane.
  auto sphere = make_sphere_scene(calib, w, h, 500.0, {0, 0, 480}, 20.0);
  sphere.shadow = compute_projector_shadows(sphere, calib);
  out.push_back({"sphere", std::move(sphere)});
  return out;
}

struct LoopStats {
  double rmse = 0;
  double invalid_rate = 0;  // over lit (non-shadow) pixels
  std::size_t valid = 0;
};

LoopStats closed_loop(const SceneSpec& scene, const CalibrationModel& calib, double sigma, std::uint64_t seed) {
  RenderOptions ro;
  ro.noise_sigma = sigma;
  ro.seed = seed;
  const auto stack = render_stack(scene, analytic_patterns(rig_patterns(calib)), calib, ro);
  const auto rec = reconstruct(stack, calib);
  LoopStats s;
  double sq = 0;
  std::size_t lit = 0, lit_invalid = 0;
  for (std::size_t i = 0; i < scene.height_field.size(); ++i) {
    if (!scene.shadow[i]) {
      ++lit;
      lit_invalid += !rec.frame.valid[i];
    }
    if (!rec.frame.valid[i]) continue;
    sq += std::pow(rec.frame.z[i] - scene.height_field[i], 2);
    ++s.valid;
  }
  s.rmse = s.valid ? std::sqrt(sq / double(s.valid)) : std::numeric_limits<double>::infinity();
  s.invalid_rate = lit ? double(lit_invalid) / double(lit) : 1.0;
  return s;
}

Outcome criterion_closed_loop() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto calib = synthetic_calibration();
  for (const auto& [name, scene] : closed_loop_scenes(calib)) {
    const auto s = closed_loop(scene, calib, 0.0, 0);
    o.note(name + "_rmse_mm", s.rmse);
    o.require(s.rmse < 1e-3, name + " rmse below 1e-3 mm");
    o.require(s.invalid_rate < 0.01, name + " decodes the lit surface");
  }
  const double secs = seconds_since(t0);
  o.note("seconds", secs);
  o.require(secs < 30, "runtime under 30 s");
  return o;
}

Outcome criterion_noise() {
  Outcome o;
  const auto calib = synthetic_calibration();
  std::uint64_t seed = 11;
  for (const auto& [name, scene] : closed_loop_scenes(calib)) {
    const auto s = closed_loop(scene, calib, 0.01, seed++);
    o.note(name + "_rmse_mm", s.rmse).note(name + "_invalid", s.invalid_rate);
    o.require(s.rmse < 0.1, name + " rmse below 0.1 mm");
    o.require(s.invalid_rate <= 0.01, name + " invalid rate within 1%");
  }
  return o;
}

// ---------------------------------------------------------------- 3

int implied_order(double coord, double period, double wrapped) {
  return static_cast<int>(std::lround((2 * std::numbers::pi * coord / period - wrapped) / (2 * std::numbers::pi)));
}

Outcome criterion_gray_code() {
  Outcome o;
  int bad_codes = 0;
  for (std::uint32_t k = 0; k < 64; ++k) {
    bad_codes += gray_decode(gray_encode(k)) != k;
    if (k > 0) bad_codes += std::popcount(gray_encode(k) ^ gray_encode(k - 1)) != 1;
  }
  // Decode all 64 codewords from rendered bit planes.
  ImageStack planes;
  for (int i = 0; i < 3; ++i) planes.phase_images.push_back(ImageF64(64, 1, 0.5));
  planes.white_image = ImageF64(64, 1, 0.8);
  for (int b = 0; b < 6; ++b) {
    ImageF64 plane(64, 1);
    for (int k = 0; k < 64; ++k) plane(k, 0) = gray_plane_bit(static_cast<std::uint32_t>(k), b, 6) ? 0.8 : 0.02;
    planes.gray_images.push_back(plane);
  }
  const auto order = decode_fringe_order(planes, planes.white_image);
  for (int k = 0; k < 64; ++k) bad_codes += order(k, 0) != k;
  o.note("codeword_errors", bad_codes);
  o.require(bad_codes == 0, "gray encode/decode identity over 64 codewords");

  // Five-period ramp, aligned and with gray planes shifted by up to half a pixel.
  const double period = 18;
  const int w = 90;
  int order_errors = 0, checked = 0, misaligned = 0;
  for (double base : {0.0, 0.25, 0.5})
    for (double offset : {0.0, -0.5, -0.25, 0.25, 0.5}) {
      auto coord = [&](int x, int) { return x * 5 * period / w + base; };
      auto stack = test::synth_stack(w, 1, period, 18, 6, coord);
      stack.gray_images =
          test::synth_stack(w, 1, period, 18, 6, [&](int x, int y) { return coord(x, y) + offset; }).gray_images;
      const auto k = decode_fringe_order(stack, stack.white_image);
      for (int x = 0; x < w; ++x) misaligned += k(x, 0) != fringe_order_at(coord(x, 0), period);
      const auto pm = compute_wrapped_phase(stack);
      const auto abs = unwrap_phase(pm, k);
      for (int x = 0; x < w; ++x, ++checked)
        order_errors += !abs.valid(x, 0) || abs.fringe_order(x, 0) != implied_order(coord(x, 0), period, pm.wrapped_phase(x, 0));
    }
  o.note("ramp_pixels", checked).note("order_errors", order_errors).note("misaligned_codes", misaligned);
  o.require(order_errors == 0, "no 2pi-multiple errors on the 5-period ramp");
  o.require(misaligned > 0, "misaligned fixture actually disagrees with the phase");
  return o;
}

// ---------------------------------------------------------------- 4

Outcome criterion_state_gating() {
  Outcome o;
  const auto calib = synthetic_calibration(128, 128, 150, 500, 250);
  const auto& tax = Taxonomy::hdd();
  int tp = 0, fp = 0, fn = 0, tn = 0, wrong_completion = 0;
  Rng rng(404);
  for (int i = 0; i < 40; ++i) {
    const bool has_platter = i < 20;
    const int variant = (has_platter ? 0 : 7) + i % 7;
    const auto scene = make_hdd_scene(variant, calib, 128, 128);
    RenderOptions ro;
    ro.seed = static_cast<std::uint64_t>(i);
    const auto stack = render_stack(scene, analytic_patterns(rig_patterns(calib)), calib, ro);
    auto labels = labels_from_scene(scene);
    for (auto& inst : labels.instances) inst.confidence = rng.uniform(0.55, 1.0);
    const auto res = run_pipeline(stack, labels, calib);
    const bool predicted = res.state == DriveState::PlatterFacing;
    tp += predicted && has_platter;
    fp += predicted && !has_platter;
    fn += !predicted && has_platter;
    tn += !predicted && !has_platter;
    wrong_completion += res.diagnostics.completion_invoked != predicted;
  }
  const double precision = tp + fp ? double(tp) / (tp + fp) : 0.0;
  const double recall = tp + fn ? double(tp) / (tp + fn) : 0.0;
  o.note("tp", tp).note("fp", fp).note("fn", fn).note("tn", tn).note("precision", precision).note("recall", recall);
  o.note("completion_mismatches", wrong_completion);
  o.require(precision == 1.0 && recall == 1.0, "platter presence recognized exactly");
  o.require(wrong_completion == 0, "completion invoked on exactly the PlatterFacing fixtures");
  return o;
}

// ---------------------------------------------------------------- 5

CompletionRequest hole_request(int w, int h, const Mask& hole, const std::function<double(int, int)>& depth) {
  CompletionRequest req{DepthFrame::empty(w, h, synthetic_calibration(w, h).camera_intrinsics), ImageF64(w, h, 0.5), hole};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!hole(x, y)) req.sparse_depth.set_depth(x, y, depth(x, y));
  return req;
}

// With `interior` set every hole keeps a ring of known pixels to the border.
Mask random_holes(Rng& rng, int w, int h, int count, bool interior) {
  Mask m(w, h);
  for (int c = 0; c < count; ++c) {
    const double r = rng.uniform(3, 14);
    const double margin = interior ? r + 2 : 4;
    const double cx = rng.uniform(margin, w - margin), cy = rng.uniform(margin, h - margin);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (std::hypot(x - cx, y - cy) <= r) m(x, y) = 1;
  }
  return m;
}

// Assembles the 5-point Dirichlet system and solves it with a sparse LU.
std::vector<double> direct_solve(const CompletionRequest& req) {
  const int w = req.width(), h = req.height();
  std::vector<int> index(static_cast<std::size_t>(w * h), -1);
  int n = 0;
  for (int i = 0; i < w * h; ++i)
    if (req.unreliable[static_cast<std::size_t>(i)]) index[static_cast<std::size_t>(i)] = n++;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int row = index[static_cast<std::size_t>(y * w + x)];
      if (row < 0) continue;
      double diag = 0;
      const int nb[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
        const int col = index[static_cast<std::size_t>(q[1] * w + q[0])];
        if (col >= 0) {
          trips.emplace_back(row, col, -1.0);
          diag += 1;
        } else if (req.sparse_depth.valid(q[0], q[1])) {
          rhs[row] += req.sparse_depth.z(q[0], q[1]);
          diag += 1;
        }
      }
      trips.emplace_back(row, row, diag);
    }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(a);
  const Eigen::VectorXd sol = lu.solve(rhs);
  std::vector<double> out(static_cast<std::size_t>(w * h), std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < w * h; ++i)
    if (index[static_cast<std::size_t>(i)] >= 0) out[static_cast<std::size_t>(i)] = sol[index[static_cast<std::size_t>(i)]];
  return out;
}

// Counts hole pixels outside the [min, max] of their hole's 4-neighbour boundary.
int maximum_principle_violations(const Mask& hole, const DepthFrame& before, const DepthFrame& after) {
  const auto comps = label_components(hole, false);
  const int w = hole.width(), h = hole.height();
  std::vector<double> lo(comps.count() + 1, std::numeric_limits<double>::infinity());
  std::vector<double> hi(comps.count() + 1, -std::numeric_limits<double>::infinity());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto lbl = comps.labels(x, y);
      if (lbl <= 0) continue;
      const int nb[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
      for (const auto& q : nb)
        if (q[0] >= 0 && q[1] >= 0 && q[0] < w && q[1] < h && !hole(q[0], q[1]) && before.valid(q[0], q[1])) {
          lo[static_cast<std::size_t>(lbl)] = std::min(lo[static_cast<std::size_t>(lbl)], before.z(q[0], q[1]));
          hi[static_cast<std::size_t>(lbl)] = std::max(hi[static_cast<std::size_t>(lbl)], before.z(q[0], q[1]));
        }
    }
  int bad = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto lbl = static_cast<std::size_t>(std::max(0, static_cast<int>(comps.labels(x, y))));
      if (lbl == 0 || !after.valid(x, y) || !std::isfinite(lo[lbl])) continue;
      const double z = after.z(x, y);
      bad += z < lo[lbl] - 1e-9 || z > hi[lbl] + 1e-9;
    }
  return bad;
}

int changed_reliable_pixels(const Mask& hole, const DepthFrame& before, const DepthFrame& after) {
  int changed = 0;
  for (std::size_t i = 0; i < hole.size(); ++i) {
    if (hole[i]) continue;
    if (before.valid[i] != after.valid[i]) ++changed;
    else if (before.valid[i] && (before.z[i] != after.z[i] || !(before.world_xyz[i] == after.world_xyz[i]))) ++changed;
  }
  return changed;
}

Outcome criterion_harmonic() {
  Outcome o;
  Rng rng(505);
  double worst_affine = 0, worst_direct = 0;
  int mp_violations = 0, changed = 0, frames = 0;
  for (int trial = 0; trial < 6; ++trial) {
    const Mask hole = random_holes(rng, 64, 64, 3, true);
    const double a = rng.uniform(-0.5, 0.5), b = rng.uniform(-0.5, 0.5), c = rng.uniform(400, 600);
    const auto affine = hole_request(64, 64, hole, [&](int x, int y) { return c + a * x + b * y; });
    HarmonicOptions opts;
    opts.tolerance = 1e-6;
    const auto res = complete_depth_harmonic(affine, opts);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (hole(x, y) && res.frame.valid(x, y)) worst_affine = std::max(worst_affine, std::abs(res.frame.z(x, y) - (c + a * x + b * y)));
    mp_violations += maximum_principle_violations(hole, affine.sparse_depth, res.frame);
    changed += changed_reliable_pixels(hole, affine.sparse_depth, res.frame);
    ++frames;

    // Non-harmonic data: the discrete system itself is the reference.
    const Mask open_hole = random_holes(rng, 64, 64, 3, false);
    const auto bumpy = hole_request(64, 64, open_hole, [&](int x, int y) { return c + 20 * std::sin(0.2 * x) * std::cos(0.13 * y) + rng.uniform(-1, 1); });
    HarmonicOptions tight;
    tight.tolerance = 1e-10;
    tight.max_iterations = 200000;
    const auto res2 = complete_depth_harmonic(bumpy, tight);
    const auto oracle = direct_solve(bumpy);
    for (std::size_t i = 0; i < open_hole.size(); ++i)
      if (open_hole[i] && std::isfinite(oracle[i]) && res2.frame.valid[i]) worst_direct = std::max(worst_direct, std::abs(res2.frame.z[i] - oracle[i]));
    mp_violations += maximum_principle_violations(open_hole, bumpy.sparse_depth, res2.frame);
    changed += changed_reliable_pixels(open_hole, bumpy.sparse_depth, res2.frame);
    ++frames;
  }

  // A rendered specular platter through the full pipeline.
  const auto calib = synthetic_calibration(128, 128, 150, 500, 250);
  auto plane = make_plane_scene(128, 128, 500.0);
  add_specular_disk(plane, 63.5, 63.5, 20);
  RenderOptions ro;
  ro.noise_sigma = 0;
  const auto stack = render_stack(plane, analytic_patterns(rig_patterns(calib)), calib, ro);
  const auto raw = reconstruct(stack, calib);
  const auto res = run_pipeline(stack, labels_from_scene(plane), calib);
  Mask filled(128, 128);
  for (std::size_t i = 0; i < filled.size(); ++i) filled[i] = !(raw.frame.valid[i] && raw.reliability.reliable[i]) && res.frame.valid[i];
  DepthFrame sparse = raw.frame;
  for (std::size_t i = 0; i < filled.size(); ++i)
    if (!raw.reliability.reliable[i]) sparse.valid[i] = 0;
  mp_violations += maximum_principle_violations(filled, sparse, res.frame);
  changed += changed_reliable_pixels(filled, sparse, res.frame);
  ++frames;

  o.note("frames", frames).note("affine_max_err_mm", worst_affine).note("direct_max_err_mm", worst_direct);
  o.note("max_principle_violations", mp_violations).note("reliable_pixels_changed", changed);
  o.require(res.diagnostics.completion_invoked, "pipeline completed the platter hole");
  o.require(worst_affine <= 1e-6, "affine holes within 1e-6 mm");
  o.require(worst_direct < 1e-8, "iterative solve matches direct solve within 1e-8");
  o.require(mp_violations == 0, "maximum principle on every hole");
  o.require(changed == 0, "reliable pixels bit-identical");
  return o;
}

// ---------------------------------------------------------------- 6

struct Box {
  double x0, y0, x1, y1;
};

double rect_iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  return inter / ((a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter);
}

// Area under the interpolated PR curve, built from scratch.
double oracle_ap(const std::vector<double>& conf, const std::vector<std::vector<double>>& iou, std::size_t n_gt, double thr) {
  if (n_gt == 0) return 0.0;
  std::vector<std::size_t> order(conf.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return conf[a] > conf[b]; });
  std::vector<char> used(n_gt, 0);
  std::vector<double> prec, rec;
  int tp = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& row = iou[order[r]];
    int best = -1;
    for (std::size_t g = 0; g < n_gt; ++g)
      if (!used[g] && (best < 0 || row[g] > row[static_cast<std::size_t>(best)])) best = static_cast<int>(g);
    if (best >= 0 && row[static_cast<std::size_t>(best)] >= thr - 1e-12) {
      used[static_cast<std::size_t>(best)] = 1;
      ++tp;
    }
    prec.push_back(double(tp) / double(r + 1));
    rec.push_back(double(tp) / double(n_gt));
  }
  double ap = 0, last = 0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (rec[k] <= last) continue;
    double p = 0;
    for (std::size_t j = k; j < rec.size(); ++j) p = std::max(p, prec[j]);
    ap += (rec[k] - last) * p;
    last = rec[k];
  }
  return ap;
}

Box random_box(Rng& rng) {
  const double x = rng.uniform(0, 0.6), y = rng.uniform(0, 0.6);
  return {x, y, x + rng.uniform(0.1, 0.4), y + rng.uniform(0.1, 0.4)};
}

Polygon to_poly(const Box& b) { return test::square(b.x0, b.y0, b.x1, b.y1); }

AnnotationSet sized(int w, int h) {
  AnnotationSet s;
  s.image_width = w;
  s.image_height = h;
  return s;
}

Outcome criterion_ap_oracle() {
  Outcome o;
  Rng rng(606);
  const auto thresholds = coco_thresholds();
  double worst = 0;
  int instances = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    // Up to three classes, each with 1..3 GT and 0..5 predictions.
    const int classes = 1 + static_cast<int>(rng.uniform() * 3);
    AnnotationSet ps = sized(100, 100), gs = sized(100, 100);
    std::map<int, std::pair<std::vector<double>, std::vector<std::vector<double>>>> per_class;
    std::map<int, std::size_t> gt_count;
    for (int cls = 0; cls < classes; ++cls) {
      const std::size_t n_gt = 1 + static_cast<std::size_t>(rng.uniform() * 3);
      const std::size_t n_pred = static_cast<std::size_t>(rng.uniform() * 6);
      std::vector<Box> gt;
      for (std::size_t g = 0; g < n_gt; ++g) gt.push_back(random_box(rng));
      auto& [conf, iou] = per_class[cls];
      for (std::size_t p = 0; p < n_pred; ++p) {
        Box b = random_box(rng);
        if (rng.uniform() < 0.6) {
          const Box& src = gt[static_cast<std::size_t>(rng.uniform() * n_gt)];
          const double j = 0.08;
          b = {src.x0 + rng.uniform(-j, j), src.y0 + rng.uniform(-j, j), src.x1 + rng.uniform(-j, j), src.y1 + rng.uniform(-j, j)};
          if (b.x1 <= b.x0 + 0.01) b.x1 = b.x0 + 0.05;
          if (b.y1 <= b.y0 + 0.01) b.y1 = b.y0 + 0.05;
        }
        conf.push_back(std::round(rng.uniform() * 4) / 4);
        std::vector<double> row;
        for (const auto& g : gt) row.push_back(rect_iou(b, g));
        iou.push_back(row);
        ps.instances.push_back({cls, to_poly(b), conf.back()});
      }
      for (const auto& g : gt) gs.instances.push_back({cls, to_poly(g), 1.0});
      gt_count[cls] = n_gt;
      ++instances;
    }
    const auto m = detection_metrics({ps}, {gs}, DetectionMode::Box, thresholds);
    double map50 = 0, map = 0;
    for (const auto& [cls, data] : per_class) {
      double mean = 0;
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        const double expect = oracle_ap(data.first, data.second, gt_count[cls], thresholds[t]);
        worst = std::max(worst, std::abs(m.per_class_ap.at(cls)[t] - expect));
        mean += expect / double(thresholds.size());
      }
      map50 += oracle_ap(data.first, data.second, gt_count[cls], 0.5) / double(classes);
      map += mean / double(classes);
    }
    worst = std::max({worst, std::abs(m.map50 - map50), std::abs(m.map50_95 - map)});
  }
  o.note("class_instances", instances).note("max_abs_diff", worst);
  o.require(worst <= 1e-9, "AP matches the PR-curve oracle within 1e-9");

  // Perfect predictions and ranking-only dependence.
  bool perfect = true, invariant = true;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<AnnotationSet> gts, preds;
    for (int img = 0; img < 3; ++img) {
      AnnotationSet g = sized(64, 64), p = sized(64, 64);
      for (int i = 0; i < 4; ++i) {
        const Box b = random_box(rng);
        const int cls = static_cast<int>(rng.uniform() * 11);
        g.instances.push_back({cls, to_poly(b), 1.0});
        const Box q{b.x0 + 0.03, b.y0, b.x1, b.y1 + rng.uniform(-0.05, 0.05)};
        p.instances.push_back({rng.uniform() < 0.8 ? cls : (cls + 1) % 11, to_poly(q), rng.uniform(0.05, 1.0)});
      }
      gts.push_back(g);
      preds.push_back(p);
    }
    auto scaled = preds, squared = preds;
    for (auto& s : scaled)
      for (auto& i : s.instances) i.confidence /= 3;
    for (auto& s : squared)
      for (auto& i : s.instances) i.confidence *= i.confidence;
    for (auto mode : {DetectionMode::Box, DetectionMode::Mask}) {
      const auto self = detection_metrics(gts, gts, mode);
      perfect = perfect && self.map50 == 1.0 && self.map50_95 == 1.0;
      const auto base = detection_metrics(preds, gts, mode);
      for (const auto* other : {&scaled, &squared}) {
        const auto m = detection_metrics(*other, gts, mode);
        invariant = invariant && m.per_class_ap == base.per_class_ap && m.map50 == base.map50 && m.map50_95 == base.map50_95;
      }
    }
  }
  o.require(perfect, "perfect predictions score exactly 1.0");
  o.require(invariant, "confidence rescaling leaves AP unchanged");
  return o;
}

// ---------------------------------------------------------------- 7

struct DatasetCheck {
  std::size_t entries = 0;
  std::size_t overlap_pixels = 0;
  std::size_t missing_files = 0;
  std::size_t stray_files = 0;
  std::size_t wrong_size = 0;
};

void check_scene_dataset(const fs::path& dir, DatasetCheck& c) {
  const auto m = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  std::set<std::string> expected;
  for (const auto& e : m["entries"]) {
    ++c.entries;
    expected.insert(e["image"].get<std::string>());
    expected.insert(e["depth"].get<std::string>());
    expected.insert(e["depth"].get<std::string>() + ".json");  // shape sidecar
    const auto img = read_image(dir / e["image"].get<std::string>());
    c.wrong_size += img.pixels.width() != 512 || img.pixels.height() != 512;
    Mask seen(512, 512);
    for (const auto& name : e["masks"]) {
      expected.insert(name.get<std::string>());
      const fs::path p = dir / name.get<std::string>();
      if (!fs::exists(p)) {
        ++c.missing_files;
        continue;
      }
      const Mask mk = read_mask(p);
      c.wrong_size += mk.width() != 512 || mk.height() != 512;
      for (std::size_t i = 0; i < mk.size() && i < seen.size(); ++i) {
        c.overlap_pixels += mk[i] && seen[i];
        seen[i] |= mk[i];
      }
    }
  }
  for (const auto& f : expected) c.missing_files += !fs::exists(dir / f);
  std::size_t on_disk = 0;
  for (const auto& sub : {"images", "masks", "depth"})
    for (const auto& f : fs::directory_iterator(dir / sub)) on_disk += f.is_regular_file();
  c.stray_files += on_disk > expected.size() ? on_disk - expected.size() : 0;
  c.missing_files += on_disk < expected.size() ? expected.size() - on_disk : 0;
}

DatasetOptions sweep_options(double theta_max, double delta, std::uint64_t seed) {
  DatasetOptions opt;
  opt.theta_max = theta_max;
  opt.delta_theta = delta;
  opt.randomization.rng_seed = seed;
  opt.force = true;
  return opt;
}

Outcome criterion_dataset(const fs::path& scratch) {
  Outcome o;
  const fs::path root = scratch / "dataset";
  fs::remove_all(root);
  const auto calib = synthetic_calibration();
  const double theta_max = 359, delta = 1.365;
  const auto t0 = Clock::now();
  std::size_t total = 0;
  for (int v = 0; v < kHddSceneVariants; ++v) {
    const auto scene = make_hdd_scene(v, calib);
    total += generate_dataset(scene, calib, root / ("scene_" + std::to_string(v)), sweep_options(theta_max, delta, 1000 + v)).entries.size();
  }
  const double secs = seconds_since(t0);
  o.note("pairs", total).note("seconds", secs);
  o.require(total == static_cast<std::size_t>(kHddSceneVariants * orientation_count(theta_max, delta)), "pair count");
  o.require(total >= 3685, "at least 3685 pairs");
  o.require(secs < 600, "sweep under 10 min");

  DatasetCheck c;
  for (int v = 0; v < kHddSceneVariants; ++v) check_scene_dataset(root / ("scene_" + std::to_string(v)), c);
  o.note("manifest_entries", c.entries).note("mask_overlap_px", c.overlap_pixels).note("missing", c.missing_files).note("stray", c.stray_files);
  o.require(c.entries == total, "manifests list every pair");
  o.require(c.overlap_pixels == 0, "material masks pairwise disjoint");
  o.require(c.missing_files == 0 && c.stray_files == 0, "files on disk match the manifests");
  o.require(c.wrong_size == 0, "512x512 images and masks");

  // Re-run the first orientations of two scenes and compare bytes.
  std::size_t compared = 0, differing = 0;
  for (int v : {0, 9}) {
    const fs::path again = scratch / "dataset_rerun";
    fs::remove_all(again);
    const auto m = generate_dataset(make_hdd_scene(v, calib), calib, again, sweep_options(7 * delta, delta, 1000 + v));
    for (const auto& e : m.entries) {
      std::vector<std::string> files = e.masks;
      files.push_back(e.image);
      files.push_back(e.depth);
      for (const auto& f : files) {
        ++compared;
        differing += bytes(again / f) != bytes(root / ("scene_" + std::to_string(v)) / f);
      }
    }
    fs::remove_all(again);
  }
  o.note("rerun_files", compared).note("rerun_differing", differing);
  o.require(compared > 0 && differing == 0, "bit-identical re-run under the same seed");
  fs::remove_all(root);
  return o;
}

// ---------------------------------------------------------------- 8

Polygon random_convex(Rng& rng, double cx, double cy, double r) {
  std::vector<double> angles;
  const int n = 3 + static_cast<int>(rng.uniform() * 9);
  for (int i = 0; i < n; ++i) angles.push_back(rng.uniform(0, 2 * std::numbers::pi));
  std::sort(angles.begin(), angles.end());
  const double rx = r * rng.uniform(0.6, 1.0), ry = r * rng.uniform(0.6, 1.0);
  Polygon p;
  for (double a : angles) p.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  return convex_hull(p);
}

Outcome criterion_annotations() {
  Outcome o;
  Rng rng(808);
  double worst = 0;
  for (bool with_conf : {false, true}) {
    LabelSyntax syntax;
    syntax.with_confidence = with_conf;
    AnnotationSet set = sized(512, 512);
    for (int i = 0; i < 200; ++i) {
      Instance in;
      in.class_id = static_cast<int>(rng.uniform() * 11);
      in.confidence = rng.uniform();
      const int n = 3 + static_cast<int>(rng.uniform() * 10);
      for (int k = 0; k < n; ++k) in.polygon.push_back({rng.uniform(), rng.uniform()});
      set.instances.push_back(in);
    }
    const auto back = parse_labels(serialize_labels(set, syntax), 512, 512, syntax);
    if (back.instances.size() != set.instances.size()) {
      worst = 1;
      continue;
    }
    for (std::size_t i = 0; i < set.instances.size(); ++i) {
      const auto& a = set.instances[i];
      const auto& b = back.instances[i];
      if (a.class_id != b.class_id || a.polygon.size() != b.polygon.size()) {
        worst = 1;
        continue;
      }
      for (std::size_t k = 0; k < a.polygon.size(); ++k)
        worst = std::max({worst, std::abs(a.polygon[k].x - b.polygon[k].x), std::abs(a.polygon[k].y - b.polygon[k].y)});
      if (with_conf) worst = std::max(worst, std::abs(a.confidence - b.confidence));
    }
  }
  o.note("roundtrip_max_err", worst);
  o.require(worst <= 1e-6, "parse/serialize identity within 1e-6");

  const int w = 128, h = 96;
  double min_iou = 1;
  for (int i = 0; i < 100; ++i) {
    Polygon poly;
    do poly = random_convex(rng, rng.uniform(40, 88), rng.uniform(35, 61), rng.uniform(8, 30));
    while (area(poly) < 100);
    const Mask m = rasterize_pixels(poly, w, h);
    min_iou = std::min(min_iou, mask_iou(m, rasterize(Instance{0, mask_to_polygon(m), 1.0}, w, h)));
  }
  o.note("convex_min_iou", min_iou);
  o.require(min_iou >= 0.95, "mask->polygon->mask IoU >= 0.95 on 100 convex components");

  // Merged screw heads: three touching in a chain plus one apart.
  Mask merged(90, 40);
  const double heads[4][3] = {{15, 20, 7}, {27, 20, 7}, {39, 20, 7}, {70, 20, 7}};
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 90; ++x)
      for (const auto& d : heads)
        if (std::hypot(x - d[0], y - d[1]) <= d[2]) merged(x, y) = 1;
  const auto parts = separate_instances(merged);
  o.note("components", label_components(merged).count()).note("instances", parts.size());
  o.require(parts.size() == 4, "merged screws separate into 4 instances");
  return o;
}

// ---------------------------------------------------------------- 9

Outcome criterion_throughput() {
  Outcome o;
  auto fx = std::make_shared<BenchFixture>();
  fx->calib = synthetic_calibration();
  const auto scene = make_hdd_scene(0, fx->calib);
  RenderOptions ro;
  fx->stack = render_stack(scene, analytic_patterns(rig_patterns(fx->calib)), fx->calib, ro);
  const auto stage = make_bench_stage("wrapped-phase", fx);

  const int saved = thread_limit();
  set_thread_limit(1);
  const auto single = run_benchmark(stage.name, 100, 1000, stage.body, stage.input_shape);
  set_thread_limit(8);
  const auto eight = run_benchmark(stage.name, 100, 1000, stage.body, stage.input_shape);
  set_thread_limit(saved);

  const double scaling = eight.throughput_fps / single.throughput_fps;
  o.note("input", stage.input_shape).note("fps_1t", single.throughput_fps).note("fps_8t", eight.throughput_fps);
  o.note("scaling", scaling).note("hardware_threads", std::thread::hardware_concurrency());
  o.require(single.warmup_iterations == 100 && single.measured_iterations == 1000, "warmup 100 / iters 1000 protocol");
  o.require(single.throughput_fps >= 30, "single-thread wrapped phase >= 30 FPS");
  o.require(scaling >= 3, "8 threads scale >= 3x");
  return o;
}

// ---------------------------------------------------------------- 10

// Independent point-in-convex test: the point is on the inner side of every edge.
bool inside_convex(const Polygon& hull, const Vec2& p) {
  const double orient = signed_area(hull) >= 0 ? 1 : -1;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    if (orient * ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) < -1e-12) return false;
  }
  return true;
}

Outcome criterion_association() {
  Outcome o;
  const auto& tax = Taxonomy::hdd();
  const int screw = tax.require("Screw");
  const auto calib = synthetic_calibration();
  int screws = 0, single = 0, nested = 0, mismatches = 0, rotation_mismatches = 0;
  for (int v = 0; v < kHddSceneVariants; ++v) {
    const auto labels = labels_from_scene(make_hdd_scene(v, calib));
    const auto links = associate_fasteners(labels, tax);
    std::vector<Polygon> hulls(labels.instances.size());
    for (std::size_t i = 0; i < labels.instances.size(); ++i) {
      Polygon px;
      for (const auto& p : labels.instances[i].polygon) px.push_back({p.x * 512, p.y * 512});
      hulls[i] = convex_hull(px);
    }
    for (const auto& link : links) {
      ++screws;
      Polygon px;
      for (const auto& p : labels.instances[link.screw].polygon) px.push_back({p.x * 512, p.y * 512});
      const Vec2 c = centroid(px);
      std::vector<std::size_t> containing;
      for (std::size_t i = 0; i < hulls.size(); ++i)
        if (labels.instances[i].class_id != screw && hulls[i].size() >= 3 && inside_convex(hulls[i], c)) containing.push_back(i);
      std::optional<std::size_t> expect;
      for (auto i : containing)
        if (!expect || area(hulls[i]) < area(hulls[*expect])) expect = i;
      single += containing.size() == 1;
      nested += containing.size() > 1;
      mismatches += link.parent != expect;
    }
    AnnotationSet rotated = labels;
    for (int turn = 0; turn < 3; ++turn) {
      for (auto& in : rotated.instances)
        for (auto& p : in.polygon) p = {1.0 - p.y, p.x};
      const auto again = associate_fasteners(rotated, tax);
      rotation_mismatches += again.size() != links.size();
      for (std::size_t i = 0; i < std::min(again.size(), links.size()); ++i)
        rotation_mismatches += again[i].screw != links[i].screw || again[i].parent != links[i].parent;
    }
  }

  AnnotationSet fixture = sized(100, 100);
  fixture.instances.push_back({tax.require("Top Plate"), test::square(0.05, 0.05, 0.95, 0.95), 1.0});
  fixture.instances.push_back({tax.require("Spindle Motor Hub"), test::square(0.4, 0.4, 0.6, 0.6), 1.0});
  fixture.instances.push_back({screw, test::square(0.49, 0.49, 0.51, 0.51), 1.0});
  const auto nested_links = associate_fasteners(fixture, tax);
  const bool nested_ok = nested_links.size() == 1 && nested_links[0].parent == std::optional<std::size_t>(1);

  o.note("screws", screws).note("single_hull", single).note("nested", nested).note("mismatches", mismatches);
  o.note("rotation_mismatches", rotation_mismatches);
  o.require(screws > 0 && single > 0, "procedural scenes contain screws inside one hull");
  o.require(mismatches == 0, "each screw maps to its containing (smallest) hull");
  o.require(nested_ok, "nested-hull fixture resolves to the smaller hull");
  o.require(rotation_mismatches == 0, "mapping invariant under 90 degree rotation");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string scratch = (fs::temp_directory_path() / "fpp_acceptance").string();
  std::vector<int> only;
  app.add_option("--scratch", scratch, "Working directory for generated data")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(scratch);
  set_thread_limit(1);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"closed-loop reconstruction", criterion_closed_loop},
      {"noise robustness", criterion_noise},
      {"gray-code correctness", criterion_gray_code},
      {"state-recognition gating", criterion_state_gating},
      {"harmonic completion", criterion_harmonic},
      {"detection metrics oracle", criterion_ap_oracle},
      {"dataset generation", [&] { return criterion_dataset(scratch); }},
      {"annotation round trips", criterion_annotations},
      {"throughput harness", criterion_throughput},
      {"fastener association", criterion_association},
  };
  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    ++ran;
    failed += !o.pass;
    std::cout << "criterion " << id << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << "  "
              << o.detail.str() << "elapsed_s=" << seconds_since(t0) << std::endl;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed\n";
  return 0;
}
