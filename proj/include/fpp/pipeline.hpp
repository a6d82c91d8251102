#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpp/annotations/labels.hpp"
#include "fpp/annotations/taxonomy.hpp"
#include "fpp/completion.hpp"
#include "fpp/external_completion.hpp"
#include "fpp/geometry.hpp"
#include "fpp/phase.hpp"

namespace fpp {

enum class DriveState { PlatterFacing, PcbFacing };

inline std::string to_string(DriveState s) { return s == DriveState::PlatterFacing ? "PlatterFacing" : "PcbFacing"; }

/// Platter Facing iff some instance of class "Platter" reaches min_confidence.
inline DriveState recognize_state(const AnnotationSet& set, const Taxonomy& taxonomy, double min_confidence = 0.5) {
  const auto platter = taxonomy.find("Platter");
  if (!platter) throw ValidationError("taxonomy has no 'Platter' class");
  for (const auto& inst : set.instances)
    if (inst.class_id == *platter && inst.confidence >= min_confidence) return DriveState::PlatterFacing;
  return DriveState::PcbFacing;
}

enum class CompletionBackend { Harmonic, External, ExternalWithFallback };

inline std::string to_string(CompletionBackend b) {
  switch (b) {
    case CompletionBackend::Harmonic: return "harmonic";
    case CompletionBackend::External: return "external";
    default: return "external-with-fallback";
  }
}

inline CompletionBackend backend_from_string(const std::string& s) {
  if (s == "harmonic") return CompletionBackend::Harmonic;
  if (s == "external") return CompletionBackend::External;
  if (s == "external-with-fallback") return CompletionBackend::ExternalWithFallback;
  throw ParameterError("backend must be harmonic, external or external-with-fallback, got '" + s + "'");
}

/// Unreliable region handed to completion: every 4-connected component of
/// pixels without reliable depth that contains a saturated pixel. Shadow
/// strips inside a specular area join its hole; isolated dark or unlit
/// regions stay invalid.
inline Mask unreliable_region(const ReliabilityMask& reliability, const Mask& reliable_depth) {
  require_same_shape(reliability.saturated, reliable_depth, "reliability vs depth");
  Mask missing(reliable_depth.width(), reliable_depth.height());
  for (std::size_t i = 0; i < missing.size(); ++i) missing[i] = reliable_depth[i] ? 0 : 1;
  const Components comps = label_components(missing, false);
  std::vector<char> seeded(comps.count() + 1, 0);
  for (std::size_t i = 0; i < missing.size(); ++i)
    if (reliability.saturated[i] && comps.labels[i] > 0) seeded[static_cast<std::size_t>(comps.labels[i])] = 1;
  Mask out(missing.width(), missing.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = comps.labels[i] > 0 && seeded[static_cast<std::size_t>(comps.labels[i])] ? 1 : 0;
  return out;
}

struct PipelineConfig {
  DecodeConfig decode;
  double min_confidence = 0.5;
  CompletionBackend backend = CompletionBackend::Harmonic;
  HarmonicOptions harmonic;
  std::shared_ptr<CompletionEndpoint> endpoint;
  Taxonomy taxonomy = Taxonomy::hdd();
};

struct PipelineDiagnostics {
  DriveState state = DriveState::PcbFacing;
  bool completion_invoked = false;
  bool completion_skipped_no_unreliable = false;
  std::string completion_backend = "none";
  std::size_t unreliable_pixels = 0;
  std::size_t saturated_pixels = 0;
  std::size_t low_modulation_pixels = 0;
  std::size_t valid_before_completion = 0;
  std::size_t valid_after_completion = 0;
  TriangulationDiagnostics triangulation;
  std::optional<CompletionReport> completion;
  std::vector<std::string> warnings;
  std::map<std::string, double> timings_ms;

  nlohmann::json to_json() const {
    nlohmann::json j{{"schema_version", 1},
                     {"state", to_string(state)},
                     {"completion", completion_invoked ? "invoked" : "not_invoked"},
                     {"completion_backend", completion_backend},
                     {"completion_skipped_no_unreliable", completion_skipped_no_unreliable},
                     {"unreliable_pixels", unreliable_pixels},
                     {"saturated_pixels", saturated_pixels},
                     {"low_modulation_pixels", low_modulation_pixels},
                     {"valid_before_completion", valid_before_completion},
                     {"valid_after_completion", valid_after_completion},
                     {"triangulation",
                      {{"valid", triangulation.valid},
                       {"invalid_input", triangulation.invalid_input},
                       {"degenerate", triangulation.degenerate},
                       {"out_of_volume", triangulation.out_of_volume}}},
                     {"warnings", warnings},
                     {"timings_ms", timings_ms}};
    if (completion) j["completion_report"] = completion->to_json();
    return j;
  }
};

struct PipelineResult {
  DriveState state = DriveState::PcbFacing;
  DepthFrame frame;
  PipelineDiagnostics diagnostics;
};

/// Decoded but not yet completed frame, shared by the pipeline and tools.
struct Reconstruction {
  PhaseMap phase;
  AbsolutePhaseMap absolute;
  ReliabilityMask reliability;
  DepthFrame frame;
  TriangulationDiagnostics triangulation;
};

inline Reconstruction reconstruct(const ImageStack& stack, const CalibrationModel& calib, const DecodeConfig& decode = {}) {
  stack.validate();
  calib.validate();
  if (std::abs(stack.fringe_period - calib.fringe_period) > 1e-9)
    throw ValidationError("stack fringe period " + std::to_string(stack.fringe_period) + " differs from calibration " +
                          std::to_string(calib.fringe_period));
  if (stack.orientation != calib.coded_axis) throw ValidationError("stack orientation differs from calibration coded axis");
  Reconstruction r;
  r.phase = compute_wrapped_phase(stack, decode);
  r.reliability = compute_reliability(stack, r.phase, decode);
  r.absolute = unwrap_phase(r.phase, decode_fringe_order(stack, stack.white_image), stack.orientation);
  r.frame = triangulate(phase_to_projector_column(r.absolute, stack.fringe_period), calib, &r.triangulation);
  r.frame.reliability = r.reliability;
  return r;
}

namespace detail {

template <typename Fn>
auto timed_stage(const std::string& stage, std::map<std::string, double>& timings, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&] {
    timings[stage] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto out = fn();
      finish();
      return out;
    }
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

}  // namespace detail

/// decode -> state -> triangulate -> (Platter Facing only) complete.
inline PipelineResult run_pipeline(const ImageStack& stack, const AnnotationSet& annotations, const CalibrationModel& calib,
                                   const PipelineConfig& config = {}) {
  PipelineResult out;
  auto& diag = out.diagnostics;
  auto& t = diag.timings_ms;

  Reconstruction rec = detail::timed_stage("decode", t, [&] {
    if (annotations.image_width && (annotations.image_width != stack.width() || annotations.image_height != stack.height()))
      throw StructuralError("annotations and stack are not co-registered");
    stack.validate();
    calib.validate();
    Reconstruction r;
    r.phase = compute_wrapped_phase(stack, config.decode);
    r.reliability = compute_reliability(stack, r.phase, config.decode);
    r.absolute = unwrap_phase(r.phase, decode_fringe_order(stack, stack.white_image), stack.orientation);
    return r;
  });
  out.state = detail::timed_stage("state", t, [&] { return recognize_state(annotations, config.taxonomy, config.min_confidence); });
  diag.state = out.state;
  detail::timed_stage("triangulate", t, [&] {
    if (std::abs(stack.fringe_period - calib.fringe_period) > 1e-9)
      throw ValidationError("stack fringe period differs from calibration");
    if (stack.orientation != calib.coded_axis) throw ValidationError("stack orientation differs from calibration coded axis");
    rec.frame = triangulate(phase_to_projector_column(rec.absolute, stack.fringe_period), calib, &rec.triangulation);
    rec.frame.reliability = rec.reliability;
  });
  diag.triangulation = rec.triangulation;
  diag.saturated_pixels = count_set(rec.reliability.saturated);
  diag.low_modulation_pixels = count_set(rec.reliability.low_modulation);

  // Reliable depth = triangulated and not flagged by the reliability mask.
  DepthFrame sparse = rec.frame;
  for (std::size_t i = 0; i < sparse.z.size(); ++i)
    if (sparse.valid[i] && !rec.reliability.reliable[i]) {
      sparse.z[i] = std::numeric_limits<double>::quiet_NaN();
      sparse.world_xyz[i] = {};
      sparse.valid[i] = 0;
    }
  diag.valid_before_completion = count_set(sparse.valid);

  if (out.state == DriveState::PcbFacing) {
    out.frame = std::move(rec.frame);
    diag.valid_after_completion = count_set(out.frame.valid);
    return out;
  }

  const Mask unreliable = unreliable_region(rec.reliability, sparse.valid);
  diag.unreliable_pixels = count_set(unreliable);
  if (diag.unreliable_pixels == 0) {
    diag.completion_skipped_no_unreliable = true;
    diag.warnings.push_back("Platter Facing frame has no unreliable pixels; completion skipped");
    out.frame = std::move(sparse);
    diag.valid_after_completion = count_set(out.frame.valid);
    return out;
  }

  CompletionRequest req{std::move(sparse), stack.white_image, unreliable};
  CompletionResult done = detail::timed_stage("complete", t, [&]() -> CompletionResult {
    diag.completion_invoked = true;
    if (config.backend == CompletionBackend::Harmonic) {
      diag.completion_backend = "harmonic";
      return complete_depth_harmonic(req, config.harmonic);
    }
    if (!config.endpoint) throw ParameterError("external completion selected but no endpoint configured");
    try {
      diag.completion_backend = "external";
      return complete_depth_external(req, *config.endpoint);
    } catch (const CompletionBackendError& e) {
      if (config.backend != CompletionBackend::ExternalWithFallback) throw;
      diag.warnings.push_back(std::string("external completion failed (") + e.what() + "); fell back to harmonic");
      diag.completion_backend = "harmonic-fallback";
      return complete_depth_harmonic(req, config.harmonic);
    }
  });
  for (const auto& w : done.report.warnings) diag.warnings.push_back(w);
  out.frame = std::move(done.frame);
  out.frame.reliability = rec.reliability;
  diag.completion = std::move(done.report);
  diag.valid_after_completion = count_set(out.frame.valid);
  return out;
}

struct PipelineJob {
  const ImageStack* stack = nullptr;
  const AnnotationSet* annotations = nullptr;
};

/// Runs independent frames concurrently. External requests are additionally
/// capped by the endpoint's declared max_in_flight.
inline std::vector<PipelineResult> run_pipeline_batch(const std::vector<PipelineJob>& jobs, const CalibrationModel& calib,
                                                      const PipelineConfig& config = {}) {
  std::vector<PipelineResult> results(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), [&](int j0, int j1) {
    for (int j = j0; j < j1; ++j)
      results[static_cast<std::size_t>(j)] =
          run_pipeline(*jobs[static_cast<std::size_t>(j)].stack, *jobs[static_cast<std::size_t>(j)].annotations, calib, config);
  });
  return results;
}

}  // namespace fpp
