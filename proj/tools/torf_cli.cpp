// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

// torf: simulate, fit, render and evaluate time-of-flight radiance fields.

#include "torf/checkpoint.hpp"
#include "torf/dataset.hpp"
#include "torf/io.hpp"
#include "torf/metrics.hpp"
#include "torf/optimizer.hpp"
#include "torf/parallel.hpp"
#include "torf/renderer.hpp"
#include "torf/scene_sim.hpp"
#include "torf/tof_model.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace torf;

namespace {

struct Globals {
  int threads = 0;
  std::uint64_t seed = 0;
};

struct SimulateArgs {
  std::string scene;
  std::string capture;
  std::string out;
  bool preview = false;
};

struct FitArgs {
  std::string data;
  std::string config;
  std::string out;
  std::string trace;
  std::string gt_data;
  int resolution = 16;
  int time_steps = 1;
  std::vector<double> box_min;
  std::vector<double> box_max;
  double padding = 0.1;
  double init_blend = 0.5;
  double density_scale = 10.0;
};

struct RenderArgs {
  std::string ckpt;
  std::string pose;
  double time = 0.0;
  std::string mode = "rgb";
  std::string sensor;
  std::string out;
  std::string png;
  int samples = 0;
};

struct DepthArgs {
  std::string quad;
  double freq = 30e6;
  double light_speed = 3e8;
  double offset = 0.0;
  std::optional<double> unwrap;
  std::string out = "depth.pfm";
  double amplitude_floor = 0.0;
};

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  int samples = 0;
};

struct CalibrateArgs {
  std::string quad;
  std::string target;
  double freq = 30e6;
  double light_speed = 3e8;
  double amplitude_floor = 0.0;
  std::string out;
};

void run_simulate(const SimulateArgs& a, const Globals& g) {
  const AnalyticScene scene = scene_from_json(read_json(a.scene));
  CaptureConfig cfg = capture_config_from_json(read_json(a.capture));
  if (g.seed != 0) cfg.seed = g.seed;
  const Dataset data = capture_dataset(scene, cfg, a.out);
  if (a.preview) {
    for (std::size_t f = 0; f < data.frames.size(); ++f) {
      char name[16];
      std::snprintf(name, sizeof(name), "%04zu", f);
      const fs::path dir = fs::path(a.out) / "frames" / name;
      write_png_rgb(dir / "rgb.png", data.frames[f].rgb);
      write_png_signed(dir / "tof_phasor.png", data.normalized_phasors(f).to_image());
    }
  }
  std::cout << "wrote " << data.frames.size() << " frames to " << a.out << "\n";
}

std::pair<Vec3, Vec3> fit_box(const FitArgs& a, const Dataset& data) {
  if (a.box_min.size() == 3 && a.box_max.size() == 3)
    return {Vec3(a.box_min[0], a.box_min[1], a.box_min[2]), Vec3(a.box_max[0], a.box_max[1], a.box_max[2])};
  if (!a.box_min.empty() || !a.box_max.empty())
    throw std::invalid_argument("--box-min and --box-max need three values each");
  if (!data.scene_bounds)
    throw std::invalid_argument("dataset '" + a.data + "' has no scene_bounds; pass --box-min/--box-max");
  const Vec3 lo = data.scene_bounds->first;
  const Vec3 hi = data.scene_bounds->second;
  const Vec3 pad = (hi - lo) * a.padding;
  return {lo - pad, hi + pad};
}

void run_fit(const FitArgs& a, const Globals& g) {
  const Dataset data = load_dataset(a.data);
  TrainConfig cfg;
  if (!a.config.empty()) {
    try {
      cfg = train_config_from_json(read_json(a.config));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("'" + a.config + "': " + e.what());
    }
  }
  const auto [lo, hi] = fit_box(a, data);
  Activations act;
  act.density_scale = a.density_scale;
  FieldInit init;
  init.blend = a.init_blend;
  const std::array<int, 3> res{a.resolution, a.resolution, a.resolution};
  RadianceFieldSet fields{StaticField(res, lo, hi, act, init), std::nullopt, true};
  if (a.time_steps > 1) fields.dyn = DynamicField(res, a.time_steps, lo, hi, act, init);

  std::vector<Pose> rig_poses;
  std::vector<double> times;
  for (const Frame& f : data.frames) {
    rig_poses.push_back(f.rig_pose);
    times.push_back(f.tau);
  }
  PoseParams poses = PoseParams::from_poses(rig_poses, data.rig.tof_in_rgb);

  std::vector<Pose> truth;
  TrainHooks hooks;
  if (!a.gt_data.empty()) {
    const Dataset gt = load_dataset(a.gt_data);
    for (const Frame& f : gt.frames) truth.push_back(f.rig_pose);
    if (truth.size() != data.frames.size())
      throw std::invalid_argument("'" + a.gt_data + "': frame count differs from the training data");
    hooks.true_poses = truth;
  }
  const long report_every = std::max(1L, cfg.iterations / 20);
  hooks.on_iteration = [&](const TraceRow& row) {
    if ((row.iteration + 1) % report_every == 0)
      std::cerr << "iter " << row.iteration + 1 << "/" << cfg.iterations << "\n";
  };
  const TrainResult result = train(data, fields, poses, cfg, g.seed, hooks);

  Checkpoint ckpt{fields, data.rig, poses, times, cfg.n_samples};
  ckpt.rig.tof_in_rgb = poses.tof_in_rgb();
  save_checkpoint(a.out, ckpt);
  const fs::path trace = a.trace.empty() ? fs::path(a.out + ".loss.csv") : fs::path(a.trace);
  write_trace_csv(trace, result.trace);
  std::cout << "wrote " << a.out << " and " << trace.string() << "\n";
}

RenderOptions eval_options(int samples, const Checkpoint& ckpt, std::uint64_t seed) {
  RenderOptions opt;
  opt.n_samples = samples > 0 ? samples : ckpt.n_samples;
  opt.stratified = false;
  opt.seed = seed;
  return opt;
}

void run_render(const RenderArgs& a, const Globals& g) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const RenderMode mode = parse_render_mode(a.mode);
  const nlohmann::json pj = read_json(a.pose);
  Pose rig_pose;
  try {
    rig_pose = pose_from_json(pj.contains("rgb") ? pj.at("rgb") : pj);
  } catch (const std::exception& e) {
    throw FormatError("'" + a.pose + "': " + e.what());
  }
  std::string sensor = a.sensor;
  if (sensor.empty()) sensor = mode == RenderMode::kRgb ? "rgb" : "tof";
  if (sensor != "rgb" && sensor != "tof") throw std::invalid_argument("--sensor must be rgb or tof");
  const Sensor s = sensor == "rgb" ? Sensor::kRgb : Sensor::kTof;
  const Camera cam{ckpt.rig.intrinsics(s), ckpt.rig.sensor_pose(rig_pose, s)};
  const Image img = render_image(cam, ckpt.fields, a.time, ckpt.rig.model, mode,
                                 eval_options(a.samples, ckpt, g.seed),
                                 ViewBounds{ckpt.rig.t_near, ckpt.rig.t_far});
  write_pfm(a.out, img);
  if (!a.png.empty()) {
    if (mode == RenderMode::kRgb) write_png_rgb(a.png, img);
    else if (mode == RenderMode::kTof) write_png_signed(a.png, img);
    else write_png_gray(a.png, img, ckpt.rig.t_far);
  }
  std::cout << "wrote " << a.out << "\n";
}

ToFModel cli_model(double freq, double light_speed, double offset) {
  ToFModel m;
  m.mod_frequency = freq;
  m.light_speed = light_speed;
  m.zero_phase_offset = offset;
  m.validate();
  return m;
}

QuadImage read_quad(const std::string& path) {
  Image img = read_pfm(path);
  if (img.channels() != 4) throw FormatError("'" + path + "': expected 4 exposure channels");
  return QuadImage(std::move(img));
}

void run_depth(const DepthArgs& a) {
  const ToFModel model = cli_model(a.freq, a.light_speed, a.offset);
  const PhasorImage p = combine_quad(read_quad(a.quad));
  Image depth(p.width(), p.height(), 1);
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x) {
      const DepthEstimate e = phasor_to_depth(p(x, y), model, a.amplitude_floor);
      if (!e.reliable) continue;
      depth(x, y, 0) = a.unwrap ? unwrap_depth(e.depth, model, *a.unwrap) : e.depth;
    }
  write_pfm(a.out, depth);
  std::cout << "wrote " << a.out << "\n";
}

void run_eval(const EvalArgs& a, const Globals& g) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const Dataset holdout = load_dataset(a.data);
  const Metrics m = evaluate(ckpt.fields, holdout, eval_options(a.samples, ckpt, g.seed));
  write_json(a.out, to_json(m));
  std::cout << "psnr " << m.psnr << " dB, depth_mse " << m.depth_mse << " m^2\n";
}

void run_calibrate(const CalibrateArgs& a) {
  const ToFModel model = cli_model(a.freq, a.light_speed, 0.0);
  const PhasorImage p = combine_quad(read_quad(a.quad));
  std::optional<Image> target_map;
  double target = 0.0;
  if (fs::exists(a.target)) {
    target_map = read_pfm(a.target);
    if (target_map->width() != p.width() || target_map->height() != p.height() || target_map->channels() != 1)
      throw FormatError("'" + a.target + "': target depth map must match the quad image size");
  } else {
    try {
      std::size_t used = 0;
      target = std::stod(a.target, &used);
      if (used != a.target.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::invalid_argument("--target-depth: '" + a.target + "' is neither a number nor a PFM file");
    }
  }
  std::vector<double> phases;
  std::vector<double> depths;
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x) {
      const double d = target_map ? (*target_map)(x, y, 0) : target;
      if (!(d > 0.0) || amplitude(p(x, y)) <= a.amplitude_floor) continue;
      phases.push_back(principal_phase(p(x, y)));
      depths.push_back(d);
    }
  const double offset = estimate_zero_phase_offset(phases, depths, model);
  std::cout.precision(12);
  std::cout << offset << "\n";
  if (!a.out.empty()) write_json(a.out, {{"zero_phase_offset", offset}, {"pixels", phases.size()}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-of-flight radiance fields: simulation, fitting and evaluation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (default: TORF_THREADS or 1)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Random seed");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Capture a synthetic RGB + quad-ToF dataset");
  c_sim->add_option("--scene", sim.scene, "Scene JSON")->required();
  c_sim->add_option("--capture", sim.capture, "Capture JSON")->required();
  c_sim->add_option("--out", sim.out, "Output dataset directory")->required();
  c_sim->add_flag("--preview", sim.preview, "Also write PNG previews");

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Reconstruct fields (and optionally poses) from a dataset");
  c_fit->add_option("--data", fit.data, "Dataset directory")->required();
  c_fit->add_option("--config", fit.config, "Training config JSON");
  c_fit->add_option("--out", fit.out, "Output checkpoint")->required();
  c_fit->add_option("--trace", fit.trace, "Loss trace CSV (default: <out>.loss.csv)");
  c_fit->add_option("--gt-data", fit.gt_data, "Dataset with ground-truth poses for the trace");
  c_fit->add_option("--resolution", fit.resolution, "Voxels per axis")->check(CLI::PositiveNumber);
  c_fit->add_option("--time-steps", fit.time_steps, "Dynamic grid time steps (1 = static only)")
      ->check(CLI::PositiveNumber);
  c_fit->add_option("--box-min", fit.box_min, "Grid box minimum corner")->expected(3);
  c_fit->add_option("--box-max", fit.box_max, "Grid box maximum corner")->expected(3);
  c_fit->add_option("--padding", fit.padding, "Relative padding around the dataset scene bounds");
  c_fit->add_option("--init-blend", fit.init_blend, "Initial blend weight")->check(CLI::Range(0.001, 0.999));
  c_fit->add_option("--density-scale", fit.density_scale, "Density activation scale")->check(CLI::PositiveNumber);

  RenderArgs ren;
  auto* c_ren = app.add_subcommand("render", "Render a view from a checkpoint");
  c_ren->add_option("--ckpt", ren.ckpt, "Checkpoint")->required();
  c_ren->add_option("--pose", ren.pose, "Pose JSON (color camera-to-world)")->required();
  c_ren->add_option("--time", ren.time, "Normalized time in [0, 1]");
  c_ren->add_option("--mode", ren.mode, "rgb | tof | depth");
  c_ren->add_option("--sensor", ren.sensor, "rgb | tof (default: rgb for rgb mode, tof otherwise)");
  c_ren->add_option("--out", ren.out, "Output PFM")->required();
  c_ren->add_option("--png", ren.png, "Optional PNG preview");
  c_ren->add_option("--samples", ren.samples, "Samples per ray (default: checkpoint value)");

  DepthArgs dep;
  auto* c_dep = app.add_subcommand("depth", "Convert quad exposures to depth");
  c_dep->add_option("--quad", dep.quad, "4-channel quad PFM")->required();
  c_dep->add_option("--freq", dep.freq, "Modulation frequency in Hz")->required();
  c_dep->add_option("--light-speed", dep.light_speed, "Speed of light in m/s");
  c_dep->add_option("--offset", dep.offset, "Zero-phase offset in radians");
  c_dep->add_option("--unwrap-threshold", dep.unwrap, "Add one unambiguous range below this depth (m)");
  c_dep->add_option("--amplitude-floor", dep.amplitude_floor, "Pixels at or below this amplitude get depth 0");
  c_dep->add_option("--out", dep.out, "Output depth PFM");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Evaluate a checkpoint on hold-out views");
  c_ev->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  c_ev->add_option("--data", ev.data, "Hold-out dataset directory")->required();
  c_ev->add_option("--out", ev.out, "Metrics JSON")->required();
  c_ev->add_option("--samples", ev.samples, "Samples per ray (default: checkpoint value)");

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate-phase", "Estimate the zero-phase offset from a known target");
  c_cal->add_option("--quad", cal.quad, "4-channel quad PFM")->required();
  c_cal->add_option("--target-depth", cal.target, "Target range in meters, or a range PFM")->required();
  c_cal->add_option("--freq", cal.freq, "Modulation frequency in Hz")->required();
  c_cal->add_option("--light-speed", cal.light_speed, "Speed of light in m/s");
  c_cal->add_option("--amplitude-floor", cal.amplitude_floor, "Ignore pixels at or below this amplitude");
  c_cal->add_option("--out", cal.out, "Optional JSON result");

  CLI11_PARSE(app, argc, argv);
  if (g.threads > 0) set_thread_count(g.threads);

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "simulate") run_simulate(sim, g);
    else if (cmd == "fit") run_fit(fit, g);
    else if (cmd == "render") run_render(ren, g);
    else if (cmd == "depth") run_depth(dep);
    else if (cmd == "eval") run_eval(ev, g);
    else if (cmd == "calibrate-phase") run_calibrate(cal);
  } catch (const std::exception& e) {
    std::cerr << "torf " << cmd << ": error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
