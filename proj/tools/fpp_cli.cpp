// fpp: command-line front end for the fringe projection toolkit.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error. Failures print a
// single line `error: <category>: <message>` on stderr.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fpp/fpp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  int threads = 1;
  std::uint64_t seed = 0;
  bool verbose = false;
};

void emit_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    fpp::write_text_file(path, j.dump(2) + "\n");
  }
}

// plane | ramp | sphere | specular | hdd:<variant>
fpp::SceneSpec build_scene(const std::string& name, const fpp::CalibrationModel& calib, int w, int h) {
  if (name == "plane") return fpp::make_plane_scene(w, h, 500.0);
  if (name == "ramp") return fpp::make_ramp_scene(calib, w, h, 500.0, 0.2, -0.1);
  if (name == "sphere") {
    auto s = fpp::make_sphere_scene(calib, w, h, 500.0, {0, 0, 490}, 20.0);
    s.shadow = fpp::compute_projector_shadows(s, calib);
    return s;
  }
  if (name == "specular") {
    auto s = fpp::make_plane_scene(w, h, 500.0);
    fpp::add_specular_disk(s, (w - 1) / 2.0, (h - 1) / 2.0, std::min(w, h) / 6.0);
    return s;
  }
  if (name.rfind("hdd:", 0) == 0) {
    int v = -1;
    try {
      v = std::stoi(name.substr(4));
    } catch (const std::exception&) {
    }
    if (v < 0 || v >= fpp::kHddSceneVariants)
      throw fpp::ParameterError("hdd variant must be 0.." + std::to_string(fpp::kHddSceneVariants - 1) + ", got '" +
                                name.substr(4) + "'");
    return fpp::make_hdd_scene(v, calib, w, h);
  }
  throw fpp::ParameterError("unknown scene '" + name + "' (plane, ramp, sphere, specular, hdd:N)");
}

fpp::AnnotationSet load_labels(const fs::path& path, int w, int h, bool with_confidence) {
  fpp::LabelSyntax syntax;
  syntax.with_confidence = with_confidence;
  return fpp::parse_labels(fpp::read_text_file(path), w, h, syntax);
}

fpp::DepthFrame frame_from_depth(const fpp::ImageF64& z) {
  fpp::DepthFrame f = fpp::DepthFrame::empty(z.width(), z.height(), fpp::Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}});
  for (std::size_t i = 0; i < z.size(); ++i)
    if (std::isfinite(z[i])) {
      f.z[i] = z[i];
      f.valid[i] = 1;
    }
  return f;
}

void write_depth_output(const fpp::DepthFrame& frame, const fpp::AnnotationSet* labels, const fs::path& out) {
  if (fpp::detail::has_extension(out, ".ply")) {
    if (labels) {
      const auto image = fpp::label_image(*labels, frame.width(), frame.height());
      fpp::export_pointcloud(frame, &image, out);
    } else {
      fpp::export_pointcloud(frame, nullptr, out);
    }
  } else if (fpp::detail::has_extension(out, ".f32")) {
    fpp::write_f32(out, frame.z);
  } else {
    throw fpp::ParameterError("output must end in .ply or .f32: " + out.string());
  }
}

std::vector<fs::path> label_files(const fs::path& p) {
  std::vector<fs::path> files;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(p);
  }
  return files;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Fringe projection profilometry toolkit: simulate, decode, reconstruct, complete, evaluate, benchmark."};
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "Worker thread cap (0 = all cores)")->capture_default_str()->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
  app.add_flag("-v,--verbose", g.verbose, "Print the effective configuration to stderr");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Render a fringe image stack with ground truth");
  std::string sim_scene = "plane", sim_out;
  int sim_w = 512, sim_h = 512, sim_shifts = 18, sim_bits = 6;
  double sim_focal = 1000.0, sim_noise = 0.01, sim_period = 18.0;
  sim->add_option("--scene", sim_scene, "plane | ramp | sphere | specular | hdd:N")->capture_default_str();
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--width", sim_w, "Camera width")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--height", sim_h, "Camera height")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--focal", sim_focal, "Camera focal length in pixels")->capture_default_str();
  sim->add_option("--noise", sim_noise, "Gaussian noise sigma, fraction of full scale")->capture_default_str();
  sim->add_option("--period", sim_period, "Fringe period in projector pixels")->capture_default_str();
  sim->add_option("--shifts", sim_shifts, "Phase shifts N")->capture_default_str();
  sim->add_option("--bits", sim_bits, "Gray-code bits G")->capture_default_str();

  // datagen
  auto* gen = app.add_subcommand("datagen", "Render an orientation sweep dataset (images, masks, depth)");
  std::string gen_scene = "hdd:0", gen_out;
  double gen_theta_max = 360.0, gen_delta = 1.0, gen_noise = 0.01, gen_focal = 1000.0;
  int gen_w = 512, gen_h = 512;
  bool gen_force = false, gen_labels = false;
  gen->add_option("--scene", gen_scene, "Scene name, or hdd:all for every drive variant")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--theta-max", gen_theta_max, "Last orientation in degrees")->capture_default_str();
  gen->add_option("--delta", gen_delta, "Orientation step in degrees")->capture_default_str();
  gen->add_option("--noise", gen_noise, "Gaussian noise sigma")->capture_default_str();
  gen->add_option("--width", gen_w, "Image width")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--height", gen_h, "Image height")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--focal", gen_focal, "Camera focal length in pixels")->capture_default_str();
  gen->add_flag("--force", gen_force, "Write into a non-empty directory");
  gen->add_flag("--labels", gen_labels, "Also write polygon label files");

  // decode
  auto* dec = app.add_subcommand("decode", "Decode a stack to absolute phase");
  std::string dec_stack, dec_out, dec_wrapped, dec_reliability;
  dec->add_option("--stack", dec_stack, "Stack directory")->required();
  dec->add_option("--out", dec_out, "Absolute phase output (.f32)")->required();
  dec->add_option("--wrapped", dec_wrapped, "Also write the wrapped phase (.f32)");
  dec->add_option("--reliability", dec_reliability, "Also write the reliable-pixel mask (.png)");

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "Decode and triangulate a stack");
  std::string rec_stack, rec_calib, rec_out, rec_labels;
  rec->add_option("--stack", rec_stack, "Stack directory")->required();
  rec->add_option("--calib", rec_calib, "Calibration JSON (default: <stack>/calib.json)");
  rec->add_option("--out", rec_out, "Output .ply or .f32")->required();
  rec->add_option("--labels", rec_labels, "Polygon labels to attach to the point cloud");

  // pipeline run
  auto* pipe = app.add_subcommand("pipeline", "Full state-aware reconstruction");
  pipe->require_subcommand(1);
  auto* pipe_run = pipe->add_subcommand("run", "Run the pipeline on one stack");
  std::string p_stack, p_calib, p_labels, p_out, p_diag, p_backend = "harmonic", p_endpoint;
  int p_timeout_ms = 30000, p_in_flight = 1;
  double p_min_conf = 0.5, p_tol = 1e-6;
  int p_max_iter = 10000;
  bool p_label_conf = false;
  pipe_run->add_option("--stack", p_stack, "Stack directory")->required();
  pipe_run->add_option("--calib", p_calib, "Calibration JSON (default: <stack>/calib.json)");
  pipe_run->add_option("--labels", p_labels, "Instance labels (default: <stack>/labels.txt)");
  pipe_run->add_flag("--labels-confidence", p_label_conf, "Label lines carry a trailing confidence");
  pipe_run->add_option("--out", p_out, "Output .ply or .f32");
  pipe_run->add_option("--diagnostics", p_diag, "Diagnostics JSON path (default: stdout)");
  pipe_run->add_option("--backend", p_backend, "harmonic | external | external-with-fallback")->capture_default_str();
  pipe_run->add_option("--endpoint", p_endpoint, "External completion command line");
  pipe_run->add_option("--timeout-ms", p_timeout_ms, "External completion timeout")->capture_default_str();
  pipe_run->add_option("--max-in-flight", p_in_flight, "External completion concurrency cap")->capture_default_str();
  pipe_run->add_option("--min-confidence", p_min_conf, "Platter confidence threshold")->capture_default_str();
  pipe_run->add_option("--tolerance", p_tol, "Harmonic solver tolerance (mm)")->capture_default_str();
  pipe_run->add_option("--max-iterations", p_max_iter, "Harmonic solver iteration cap")->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate depth or detections");
  ev->require_subcommand(1);
  auto* ev_depth = ev->add_subcommand("depth", "RMSE / MAE of a depth map against ground truth");
  std::string ed_pred, ed_truth, ed_region, ed_json;
  ev_depth->add_option("--pred", ed_pred, "Predicted depth (.f32)")->required();
  ev_depth->add_option("--truth", ed_truth, "Ground-truth depth (.f32)")->required();
  ev_depth->add_option("--region", ed_region, "Evaluation mask (.png)");
  ev_depth->add_option("--json", ed_json, "Write the report JSON here");
  auto* ev_det = ev->add_subcommand("detect", "AP@50 and AP@50-95 of polygon detections");
  std::string et_pred, et_gt, et_mode = "box", et_json;
  int et_w = 512, et_h = 512;
  bool et_conf = false;
  ev_det->add_option("--pred", et_pred, "Prediction label file or directory")->required();
  ev_det->add_option("--gt", et_gt, "Ground-truth label file or directory")->required();
  ev_det->add_option("--mode", et_mode, "box | mask")->capture_default_str();
  ev_det->add_option("--width", et_w, "Image width")->capture_default_str();
  ev_det->add_option("--height", et_h, "Image height")->capture_default_str();
  ev_det->add_flag("--pred-confidence", et_conf, "Prediction lines carry a trailing confidence");
  ev_det->add_option("--json", et_json, "Write the report JSON here");

  // bench
  auto* bench = app.add_subcommand("bench", "Time one stage: warmup runs, then measured runs");
  std::string b_stage, b_stack, b_calib, b_labels, b_json;
  int b_warmup = 100, b_iters = 1000;
  bench->add_option("stage", b_stage, "Stage name, or 'list'")->required();
  bench->add_option("--warmup", b_warmup, "Unmeasured iterations")->capture_default_str();
  bench->add_option("--iters", b_iters, "Measured iterations")->capture_default_str();
  bench->add_option("--stack", b_stack, "Stack directory (default: simulated 512x512 drive scene)");
  bench->add_option("--calib", b_calib, "Calibration JSON (default: <stack>/calib.json)");
  bench->add_option("--labels", b_labels, "Labels for the pipeline stage (default: <stack>/labels.txt)");
  bench->add_option("--json", b_json, "Write the report JSON here");

  // patterns export
  auto* pat = app.add_subcommand("patterns", "Projector pattern utilities");
  pat->require_subcommand(1);
  auto* pat_exp = pat->add_subcommand("export", "Write the projector pattern sequence as PNGs");
  std::string px_out, px_orient = "vertical";
  int px_w = 912, px_h = 1140, px_shifts = 18, px_bits = 6, px_defocus = 0;
  double px_period = 18.0;
  pat_exp->add_option("--out", px_out, "Output directory")->required();
  pat_exp->add_option("--width", px_w, "Projector width")->capture_default_str();
  pat_exp->add_option("--height", px_h, "Projector height")->capture_default_str();
  pat_exp->add_option("--period", px_period, "Fringe period")->capture_default_str();
  pat_exp->add_option("--shifts", px_shifts, "Phase shifts N")->capture_default_str();
  pat_exp->add_option("--bits", px_bits, "Gray-code bits G")->capture_default_str();
  pat_exp->add_option("--orientation", px_orient, "vertical | horizontal")->capture_default_str();
  pat_exp->add_option("--defocus", px_defocus, "Binary defocus kernel radius (0 = sinusoidal)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  fpp::set_thread_limit(g.threads);
  if (g.verbose) std::cerr << "# effective configuration\n" << app.config_to_str(true, true);

  if (*sim) {
    auto calib = fpp::synthetic_calibration(sim_w, sim_h, 150.0, 500.0, sim_focal);
    calib.fringe_period = sim_period;
    const auto scene = build_scene(sim_scene, calib, sim_w, sim_h);
    fpp::PatternParams params;
    params.fringe_period = sim_period;
    params.num_shifts = sim_shifts;
    params.num_gray_bits = sim_bits;
    params.validate();
    fpp::RenderOptions ro;
    ro.noise_sigma = sim_noise;
    ro.seed = g.seed;
    const auto stack = fpp::render_stack(scene, fpp::analytic_patterns(params), calib, ro);
    const fs::path out = sim_out;
    fpp::save_stack(stack, out);
    fpp::save_calibration(calib, out / "calib.json");
    fpp::write_f32(out / "depth_gt.f32", scene.height_field);
    fpp::write_png(out / "shadow.png", fpp::mask_to_gray(scene.shadow));
    fpp::write_text_file(out / "labels.txt", fpp::serialize_labels(fpp::labels_from_scene(scene)));
    json meta{{"schema_version", 1}, {"scene", sim_scene}, {"noise_sigma", sim_noise}, {"seed", g.seed},
              {"width", sim_w},      {"height", sim_h},   {"focal", sim_focal}};
    fpp::write_text_file(out / "scene.json", meta.dump(2) + "\n");
    return 0;
  }

  if (*gen) {
    auto calib = fpp::synthetic_calibration(gen_w, gen_h, 150.0, 500.0, gen_focal);
    fpp::DatasetOptions opt;
    opt.theta_max = gen_theta_max;
    opt.delta_theta = gen_delta;
    opt.noise_sigma = gen_noise;
    opt.force = gen_force;
    opt.write_labels = gen_labels;
    opt.randomization.rng_seed = g.seed;
    const fs::path out = gen_out;
    if (gen_scene != "hdd:all") {
      const auto m = fpp::generate_dataset(build_scene(gen_scene, calib, gen_w, gen_h), calib, out, opt);
      std::cout << "wrote " << m.entries.size() << " orientations to " << out.string() << "\n";
      return 0;
    }
    if (fs::exists(out) && !fs::is_empty(out) && !gen_force)
      throw fpp::IoError("output directory is not empty (use --force): " + out.string());
    json top{{"schema_version", 1}, {"scenes", json::array()}};
    std::size_t total = 0;
    for (int v = 0; v < fpp::kHddSceneVariants; ++v) {
      char name[16];
      std::snprintf(name, sizeof name, "scene_%02d", v);
      auto scene_opt = opt;
      scene_opt.force = true;
      scene_opt.randomization.rng_seed = fpp::Rng::stream(g.seed, static_cast<std::uint64_t>(v), 0xd5).next();
      const auto m = fpp::generate_dataset(fpp::make_hdd_scene(v, calib, gen_w, gen_h), calib, out / name, scene_opt);
      total += m.entries.size();
      top["scenes"].push_back({{"name", name}, {"variant", v}, {"entries", m.entries.size()}, {"manifest", std::string(name) + "/manifest.json"}});
    }
    top["total_entries"] = total;
    fpp::write_text_file(out / "manifest.json", top.dump(2) + "\n");
    std::cout << "wrote " << total << " orientations over " << fpp::kHddSceneVariants << " scenes to " << out.string() << "\n";
    return 0;
  }

  if (*dec) {
    const auto stack = fpp::load_stack(dec_stack);
    const auto phase = fpp::compute_wrapped_phase(stack);
    const auto abs = fpp::unwrap_phase(phase, fpp::decode_fringe_order(stack, stack.white_image), stack.orientation);
    fpp::write_f32(dec_out, abs.phase);
    if (!dec_wrapped.empty()) fpp::write_f32(dec_wrapped, phase.wrapped_phase);
    if (!dec_reliability.empty())
      fpp::write_png(dec_reliability, fpp::mask_to_gray(fpp::compute_reliability(stack, phase).reliable));
    return 0;
  }

  if (*rec) {
    const auto stack = fpp::load_stack(rec_stack);
    const auto calib = fpp::load_calibration(rec_calib.empty() ? fs::path(rec_stack) / "calib.json" : fs::path(rec_calib));
    const auto r = fpp::reconstruct(stack, calib);
    std::optional<fpp::AnnotationSet> labels;
    if (!rec_labels.empty()) labels = load_labels(rec_labels, stack.width(), stack.height(), false);
    write_depth_output(r.frame, labels ? &*labels : nullptr, rec_out);
    json d{{"schema_version", 1},
           {"valid", r.triangulation.valid},
           {"invalid_input", r.triangulation.invalid_input},
           {"degenerate", r.triangulation.degenerate},
           {"out_of_volume", r.triangulation.out_of_volume}};
    std::cout << d.dump(2) << "\n";
    return 0;
  }

  if (*pipe_run) {
    const auto stack = fpp::load_stack(p_stack);
    const auto calib = fpp::load_calibration(p_calib.empty() ? fs::path(p_stack) / "calib.json" : fs::path(p_calib));
    const auto labels =
        load_labels(p_labels.empty() ? fs::path(p_stack) / "labels.txt" : fs::path(p_labels), stack.width(), stack.height(), p_label_conf);
    fpp::PipelineConfig cfg;
    cfg.backend = fpp::backend_from_string(p_backend);
    cfg.min_confidence = p_min_conf;
    cfg.harmonic.tolerance = p_tol;
    cfg.harmonic.max_iterations = p_max_iter;
    if (cfg.backend != fpp::CompletionBackend::Harmonic) {
      if (p_endpoint.empty()) throw fpp::UsageError("--endpoint is required for external completion");
      std::vector<std::string> argv_list;
      std::istringstream words(p_endpoint);
      for (std::string w; words >> w;) argv_list.push_back(w);
      cfg.endpoint = std::make_shared<fpp::ProcessCompletionEndpoint>(argv_list, std::chrono::milliseconds(p_timeout_ms), p_in_flight);
    }
    const auto result = fpp::run_pipeline(stack, labels, calib, cfg);
    if (!p_out.empty()) write_depth_output(result.frame, &labels, p_out);
    emit_json(result.diagnostics.to_json(), p_diag);
    return 0;
  }

  if (*ev_depth) {
    const auto pred = frame_from_depth(fpp::read_f32(ed_pred));
    const auto truth = fpp::read_f32(ed_truth);
    fpp::DepthMetrics m;
    if (!ed_region.empty()) {
      const auto region = fpp::read_mask(ed_region);
      m = fpp::depth_metrics(pred, truth, &region, fs::path(ed_region).stem().string());
    } else {
      m = fpp::depth_metrics(pred, truth);
    }
    std::cout << m.table();
    if (!ed_json.empty()) emit_json(m.to_json(), ed_json);
    return 0;
  }

  if (*ev_det) {
    const auto mode = fpp::detection_mode_from_string(et_mode);
    const bool dirs = fs::is_directory(et_gt);
    if (dirs != fs::is_directory(et_pred)) throw fpp::UsageError("--pred and --gt must both be files or both directories");
    std::vector<fpp::AnnotationSet> preds, gts;
    for (const auto& gt_file : label_files(et_gt)) {
      gts.push_back(load_labels(gt_file, et_w, et_h, false));
      const fs::path pred_file = dirs ? fs::path(et_pred) / gt_file.filename() : fs::path(et_pred);
      if (fs::exists(pred_file)) {
        preds.push_back(load_labels(pred_file, et_w, et_h, et_conf));
      } else {
        preds.push_back(fpp::AnnotationSet{{}, et_w, et_h});
      }
    }
    const auto m = fpp::detection_metrics(preds, gts, mode);
    const auto& tax = fpp::Taxonomy::hdd();
    std::cout << m.table(&tax);
    if (!et_json.empty()) emit_json(m.to_json(&tax), et_json);
    return 0;
  }

  if (*bench) {
    if (b_stage == "list") {
      for (const auto& n : fpp::bench_stage_names()) std::cout << n << "\n";
      return 0;
    }
    // Validate the name before paying for the fixture.
    fpp::require_bench_stage(b_stage);
    if (b_iters <= 0) throw fpp::UsageError("iters must be > 0");
    if (b_warmup < 0) throw fpp::UsageError("warmup must be >= 0");
    auto fx = std::make_shared<fpp::BenchFixture>();
    if (!b_stack.empty()) {
      fx->stack = fpp::load_stack(b_stack);
      fx->calib = fpp::load_calibration(b_calib.empty() ? fs::path(b_stack) / "calib.json" : fs::path(b_calib));
      const fs::path lp = b_labels.empty() ? fs::path(b_stack) / "labels.txt" : fs::path(b_labels);
      fx->annotations = fs::exists(lp) ? load_labels(lp, fx->stack.width(), fx->stack.height(), false)
                                       : fpp::AnnotationSet{{}, fx->stack.width(), fx->stack.height()};
    } else {
      fx->calib = fpp::synthetic_calibration();
      const auto scene = fpp::make_hdd_scene(0, fx->calib);
      fpp::RenderOptions ro;
      ro.seed = g.seed;
      fx->stack = fpp::render_stack(scene, fpp::analytic_patterns(fpp::PatternParams{}), fx->calib, ro);
      fx->annotations = fpp::labels_from_scene(scene);
    }
    const auto stage = fpp::make_bench_stage(b_stage, fx);
    auto report = fpp::run_benchmark(stage.name, b_warmup, b_iters, stage.body, stage.input_shape);
    report.threads = fpp::thread_limit();
    std::cout << report.table();
    if (!b_json.empty()) emit_json(report.to_json(), b_json);
    return 0;
  }

  if (*pat_exp) {
    fpp::PatternParams p;
    p.projector_width = px_w;
    p.projector_height = px_h;
    p.fringe_period = px_period;
    p.num_shifts = px_shifts;
    p.num_gray_bits = px_bits;
    p.orientation = fpp::orientation_from_string(px_orient);
    p.validate();
    fpp::export_patterns(px_defocus > 0 ? fpp::generate_defocused_patterns(p, px_defocus) : fpp::generate_patterns(p), px_out);
    return 0;
  }
  return 2;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const fpp::UsageError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const fpp::Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}
