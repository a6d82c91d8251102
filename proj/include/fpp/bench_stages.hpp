#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fpp/bench.hpp"
#include "fpp/pipeline.hpp"

namespace fpp {

/// Inputs shared by the benchmark stages; loaded once before any warmup.
struct BenchFixture {
  ImageStack stack;
  CalibrationModel calib;
  AnnotationSet annotations;
};

inline const std::vector<std::string>& bench_stage_names() {
  static const std::vector<std::string> names = {"wrapped-phase", "graycode", "unwrap", "triangulate", "harmonic", "pipeline"};
  return names;
}

/// Throws a usage error listing the stages when `name` is not one of them.
inline void require_bench_stage(const std::string& name) {
  const auto& names = bench_stage_names();
  if (std::find(names.begin(), names.end(), name) != names.end()) return;
  std::string list;
  for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
  throw UsageError("unknown bench stage '" + name + "'; available: " + list);
}

struct BenchStage {
  std::string name;
  std::string input_shape;
  std::function<void()> body;
};

/// Builds the timed body for `name`; the stage's inputs are precomputed here.
inline BenchStage make_bench_stage(const std::string& name, std::shared_ptr<const BenchFixture> fx) {
  require_bench_stage(name);
  if (!fx) throw ParameterError("bench stage needs a fixture");
  const auto& stack = fx->stack;
  std::string shape = std::to_string(stack.width()) + "x" + std::to_string(stack.height()) + " N=" +
                      std::to_string(stack.num_shifts()) + " G=" + std::to_string(stack.num_gray_bits());
  BenchStage stage{name, shape, {}};
  if (name == "wrapped-phase") {
    stage.body = [fx] { compute_wrapped_phase(fx->stack); };
  } else if (name == "graycode") {
    stage.body = [fx] { decode_fringe_order(fx->stack, fx->stack.white_image); };
  } else if (name == "unwrap") {
    auto phase = std::make_shared<PhaseMap>(compute_wrapped_phase(stack));
    auto order = std::make_shared<LabelImage>(decode_fringe_order(stack, stack.white_image));
    stage.body = [fx, phase, order] { unwrap_phase(*phase, *order, fx->stack.orientation); };
  } else if (name == "triangulate") {
    const auto abs = unwrap_phase(compute_wrapped_phase(stack), decode_fringe_order(stack, stack.white_image), stack.orientation);
    auto coords = std::make_shared<ImageF64>(phase_to_projector_column(abs, stack.fringe_period));
    stage.body = [fx, coords] { triangulate(*coords, fx->calib); };
  } else if (name == "harmonic") {
    Reconstruction rec = reconstruct(stack, fx->calib);
    DepthFrame sparse = rec.frame;
    for (std::size_t i = 0; i < sparse.z.size(); ++i)
      if (sparse.valid[i] && !rec.reliability.reliable[i]) sparse.invalidate(static_cast<int>(i % static_cast<std::size_t>(sparse.width())),
                                                                              static_cast<int>(i / static_cast<std::size_t>(sparse.width())));
    const Mask unreliable = unreliable_region(rec.reliability, sparse.valid);
    auto req = std::make_shared<CompletionRequest>(CompletionRequest{std::move(sparse), stack.white_image, unreliable});
    stage.input_shape += " unreliable=" + std::to_string(count_set(unreliable));
    stage.body = [req] { complete_depth_harmonic(*req); };
  } else {
    stage.body = [fx] { run_pipeline(fx->stack, fx->annotations, fx->calib); };
  }
  return stage;
}

}  // namespace fpp
