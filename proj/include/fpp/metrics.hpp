#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpp/annotations/labels.hpp"
#include "fpp/annotations/raster.hpp"
#include "fpp/annotations/taxonomy.hpp"
#include "fpp/geometry.hpp"

namespace fpp {

struct DepthMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t evaluated_pixels = 0;
  std::string region = "all";

  nlohmann::json to_json() const {
    return {{"schema_version", 1}, {"rmse_mm", rmse}, {"mae_mm", mae}, {"evaluated_pixels", evaluated_pixels}, {"region", region}};
  }

  std::string table() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %12s %12s %10s\n%-16s %12.4f %12.4f %10zu\n", "Region", "RMSE (mm)", "MAE (mm)",
                  "Pixels", region.c_str(), rmse, mae, evaluated_pixels);
    return buf;
  }
};

/// RMSE and MAE of predicted vs. ground-truth depth. Without a region, all
/// pixels valid in both are evaluated; a given region must lie inside them.
inline DepthMetrics depth_metrics(const DepthFrame& predicted, const ImageF64& truth, const Mask* region = nullptr,
                                  std::string region_name = {}) {
  require_same_shape(truth, predicted.z, "ground truth vs prediction");
  if (region) require_same_shape(*region, truth, "region vs ground truth");
  double sq = 0.0, abs_sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool joint = predicted.valid[i] && std::isfinite(truth[i]) && std::isfinite(predicted.z[i]);
    if (region) {
      if (!(*region)[i]) continue;
      if (!joint) throw ValidationError("evaluation region includes pixel " + std::to_string(i) + " without valid depth");
    } else if (!joint) {
      continue;
    }
    const double d = predicted.z[i] - truth[i];
    sq += d * d;
    abs_sum += std::abs(d);
    ++n;
  }
  if (n == 0) throw EmptyRegionError("no pixels to evaluate");
  DepthMetrics m;
  m.rmse = std::sqrt(sq / static_cast<double>(n));
  m.mae = abs_sum / static_cast<double>(n);
  // Guard the power-mean inequality against the last-ulp rounding of sqrt.
  m.rmse = std::max(m.rmse, m.mae);
  m.evaluated_pixels = n;
  m.region = region_name.empty() ? (region ? "custom" : "all") : std::move(region_name);
  return m;
}

enum class DetectionMode { Box, Mask };

inline std::string to_string(DetectionMode m) { return m == DetectionMode::Box ? "box" : "mask"; }

inline DetectionMode detection_mode_from_string(const std::string& s) {
  if (s == "box") return DetectionMode::Box;
  if (s == "mask") return DetectionMode::Mask;
  throw ParameterError("mode must be 'box' or 'mask', got '" + s + "'");
}

/// 0.50, 0.55, ..., 0.95.
inline std::vector<double> coco_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

struct DetectionMetrics {
  DetectionMode mode = DetectionMode::Box;
  std::vector<double> thresholds;
  /// class id -> AP at each threshold (same order as `thresholds`).
  std::map<int, std::vector<double>> per_class_ap;
  std::map<int, double> per_class_ap50;
  double map50 = 0.0;
  double map50_95 = 0.0;

  nlohmann::json to_json(const Taxonomy* taxonomy = nullptr) const {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& [id, aps] : per_class_ap) {
      nlohmann::json c{{"class_id", id}, {"ap50", per_class_ap50.at(id)}, {"ap", aps}};
      c["ap50_95"] = std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
      if (taxonomy && taxonomy->contains(id)) c["name"] = taxonomy->at(id).name;
      classes.push_back(std::move(c));
    }
    return {{"schema_version", 1}, {"mode", to_string(mode)}, {"thresholds", thresholds}, {"map50", map50},
            {"map50_95", map50_95}, {"classes", classes}};
  }

  std::string table(const Taxonomy* taxonomy = nullptr) const {
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-24s %10s %12s\n", "Class", (to_string(mode) == "box" ? "Box AP@50" : "Mask AP@50"),
                  "AP@50-95");
    out << buf;
    for (const auto& [id, aps] : per_class_ap) {
      const std::string name = taxonomy && taxonomy->contains(id) ? taxonomy->at(id).name : std::to_string(id);
      const double mean = std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
      std::snprintf(buf, sizeof buf, "%-24s %10.3f %12.3f\n", name.c_str(), per_class_ap50.at(id), mean);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%-24s %10.3f %12.3f\n", "Overall mAP", map50, map50_95);
    out << buf;
    return out.str();
  }
};

/// Area under the precision envelope of a ranked list of hits (true = TP).
inline double average_precision(const std::vector<bool>& ranked_hits, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  std::vector<double> recall, precision;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked_hits.size(); ++i) {
    if (ranked_hits[i]) ++tp;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

namespace detail {

inline double instance_iou(const Instance& a, const Instance& b, DetectionMode mode, int w, int h) {
  if (mode == DetectionMode::Box) return box_iou(bounding_box(a.polygon), bounding_box(b.polygon));
  return mask_iou(rasterize(a, w, h), rasterize(b, w, h));
}

}  // namespace detail

/// Standard AP per class: predictions ranked by confidence (stable on ties),
/// each greedily matched to the highest-IoU unmatched ground truth in its
/// image at IoU >= threshold; all-points interpolation. Classes without
/// ground truth anywhere are left out of the means.
inline DetectionMetrics detection_metrics(const std::vector<AnnotationSet>& predictions,
                                          const std::vector<AnnotationSet>& ground_truth, DetectionMode mode,
                                          std::vector<double> thresholds = coco_thresholds()) {
  if (predictions.size() != ground_truth.size())
    throw StructuralError("prediction and ground-truth lists differ in length");
  if (thresholds.empty()) throw ParameterError("at least one IoU threshold is required");

  struct Pred {
    std::size_t image, index;
    double confidence;
  };
  std::map<int, std::vector<Pred>> preds_by_class;
  std::map<int, std::size_t> gt_count;
  for (std::size_t img = 0; img < ground_truth.size(); ++img) {
    for (const auto& g : ground_truth[img].instances) ++gt_count[g.class_id];
    const auto& p = predictions[img].instances;
    for (std::size_t i = 0; i < p.size(); ++i) preds_by_class[p[i].class_id].push_back({img, i, p[i].confidence});
  }

  // IoU of every (prediction, same-class ground truth) pair, computed once.
  std::map<int, std::vector<std::vector<std::pair<std::size_t, double>>>> ious;
  for (auto& [cls, preds] : preds_by_class) {
    std::stable_sort(preds.begin(), preds.end(), [](const Pred& a, const Pred& b) { return a.confidence > b.confidence; });
    auto& rows = ious[cls];
    for (const auto& pr : preds) {
      std::vector<std::pair<std::size_t, double>> row;
      const auto& gts = ground_truth[pr.image].instances;
      const int w = std::max(ground_truth[pr.image].image_width, 1);
      const int h = std::max(ground_truth[pr.image].image_height, 1);
      for (std::size_t g = 0; g < gts.size(); ++g)
        if (gts[g].class_id == cls)
          row.push_back({g, detail::instance_iou(predictions[pr.image].instances[pr.index], gts[g], mode, w, h)});
      rows.push_back(std::move(row));
    }
  }

  DetectionMetrics out;
  out.mode = mode;
  out.thresholds = thresholds;
  // AP@50 is always reported; evaluate 0.5 as an extra threshold if needed.
  std::size_t at50 = thresholds.size();
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    if (std::abs(thresholds[i] - 0.5) < 1e-12) at50 = i;
  std::vector<double> evaluated = thresholds;
  if (at50 == thresholds.size()) evaluated.push_back(0.5);
  for (const auto& [cls, n_gt] : gt_count) {
    std::vector<double> aps;
    const auto pit = preds_by_class.find(cls);
    for (double thr : evaluated) {
      if (pit == preds_by_class.end()) {
        aps.push_back(0.0);
        continue;
      }
      const auto& preds = pit->second;
      const auto& rows = ious[cls];
      std::map<std::pair<std::size_t, std::size_t>, bool> taken;
      std::vector<bool> hits;
      for (std::size_t k = 0; k < preds.size(); ++k) {
        double best = -1.0;
        std::size_t best_g = 0;
        for (const auto& [g, iou] : rows[k]) {
          if (taken.count({preds[k].image, g})) continue;
          if (iou > best) best = iou, best_g = g;
        }
        const bool hit = best >= thr - 1e-12;
        if (hit) taken[{preds[k].image, best_g}] = true;
        hits.push_back(hit);
      }
      aps.push_back(average_precision(hits, n_gt));
    }
    out.per_class_ap50[cls] = aps[at50];
    aps.resize(thresholds.size());
    out.per_class_ap[cls] = std::move(aps);
  }
  if (!out.per_class_ap.empty()) {
    double s50 = 0.0, s = 0.0;
    for (const auto& [cls, aps] : out.per_class_ap) {
      s50 += out.per_class_ap50.at(cls);
      s += std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
    }
    out.map50 = s50 / static_cast<double>(out.per_class_ap.size());
    out.map50_95 = s / static_cast<double>(out.per_class_ap.size());
  }
  return out;
}

}  // namespace fpp
