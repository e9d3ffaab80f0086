// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/checkpoint.hpp"
#include "torf/dataset.hpp"
#include "torf/io.hpp"
#include "torf/metrics.hpp"
#include "torf/optimizer.hpp"
#include "torf/parallel.hpp"
#include "torf/renderer.hpp"
#include "torf/scene_sim.hpp"
#include "torf/tof_model.hpp"

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

namespace py = pybind11;
using namespace torf;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using C128Array = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

// (H, W) or (H, W, C) arrays <-> interleaved images.
Image image_from_array(const F64Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw std::invalid_argument("expected an (H, W) or (H, W, C) array");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(w, h, c);
  std::memcpy(img.data().data(), a.data(), img.data().size() * sizeof(double));
  return img;
}

F64Array array_from_image(const Image& img) {
  F64Array a({img.height(), img.width(), img.channels()});
  std::memcpy(a.mutable_data(), img.data().data(), img.data().size() * sizeof(double));
  return a;
}

C128Array array_from_phasors(const PhasorImage& p) {
  C128Array a({p.height(), p.width()});
  std::memcpy(static_cast<void*>(a.mutable_data()), p.data().data(), p.data().size() * sizeof(Phasor));
  return a;
}

PhasorImage phasors_from_array(const C128Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected an (H, W) complex array");
  PhasorImage p(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(static_cast<void*>(p.data().data()), a.data(), p.data().size() * sizeof(Phasor));
  return p;
}

nlohmann::json parse(const std::string& text) { return nlohmann::json::parse(text); }

py::dict trace_dict(const std::vector<TraceRow>& trace) {
  std::vector<long> it;
  std::vector<double> rgb, tof, lam, pose;
  for (const TraceRow& r : trace) {
    it.push_back(r.iteration);
    rgb.push_back(r.rgb_loss);
    tof.push_back(r.tof_loss);
    lam.push_back(r.lambda);
    pose.push_back(r.pose_error);
  }
  py::dict d;
  d["iteration"] = it;
  d["rgb_loss"] = rgb;
  d["tof_loss"] = tof;
  d["lambda"] = lam;
  d["pose_error"] = pose;
  return d;
}

}  // namespace

PYBIND11_MODULE(_torf, m) {
  m.doc() = "Time-of-flight radiance fields: sensor model, simulator, renderer and optimizer";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  py::class_<ToFModel>(m, "ToFModel")
      .def(py::init([](double frequency, double light_speed, double offset, double intensity) {
             ToFModel t{frequency, light_speed, offset, intensity};
             t.validate();
             return t;
           }),
           py::arg("frequency") = 30e6, py::arg("light_speed") = 3e8,
           py::arg("zero_phase_offset") = 0.0, py::arg("source_intensity") = 1.0)
      .def_readwrite("frequency", &ToFModel::mod_frequency)
      .def_readwrite("light_speed", &ToFModel::light_speed)
      .def_readwrite("zero_phase_offset", &ToFModel::zero_phase_offset)
      .def_readwrite("source_intensity", &ToFModel::source_intensity)
      .def_property_readonly("unambiguous_range", &ToFModel::unambiguous_range);

  m.def("importance_weight", &importance_weight, py::arg("path_length"), py::arg("model"));

  m.def(
      "simulate_quad",
      [](const std::vector<double>& delays, const std::vector<double>& energies, const ToFModel& model,
         long n_periods) {
        if (delays.size() != energies.size()) throw std::invalid_argument("delays and energies differ in length");
        std::vector<Impulse> imp;
        for (std::size_t i = 0; i < delays.size(); ++i) imp.push_back({delays[i], energies[i]});
        const QuadImage q = simulate_quad_exposures(TemporalResponse::from_unsorted(imp), model, n_periods);
        return std::vector<double>{q.at(0, 0, 0), q.at(0, 0, 1), q.at(0, 0, 2), q.at(0, 0, 3)};
      },
      py::arg("delays"), py::arg("energies"), py::arg("model"), py::arg("n_periods"),
      "Four exposures [L_0, L_pi/2, L_pi, L_3pi/2] of an impulse train (delays in seconds).");

  m.def(
      "combine_quad",
      [](const F64Array& quad) {
        Image img = image_from_array(quad);
        if (img.channels() != 4) throw std::invalid_argument("expected (H, W, 4) exposures");
        return array_from_phasors(combine_quad(QuadImage(std::move(img))));
      },
      py::arg("quad"), "Complex (H, W) phasor image from (H, W, 4) exposures.");

  m.def(
      "phasor_to_depth",
      [](const C128Array& phasors, const ToFModel& model, double floor) {
        const PhasorImage p = phasors_from_array(phasors);
        Image depth(p.width(), p.height(), 1);
        Image amp(p.width(), p.height(), 1);
        for (int y = 0; y < p.height(); ++y)
          for (int x = 0; x < p.width(); ++x) {
            const DepthEstimate e = phasor_to_depth(p(x, y), model, floor);
            depth(x, y) = e.depth;
            amp(x, y) = e.amplitude;
          }
        return py::make_tuple(array_from_image(depth), array_from_image(amp));
      },
      py::arg("phasors"), py::arg("model"), py::arg("amplitude_floor") = kDefaultAmplitudeFloor,
      "Wrapped depth and amplitude images.");

  m.def("unwrap_depth", &unwrap_depth, py::arg("depth"), py::arg("model"), py::arg("threshold"));

  m.def("read_pfm", [](const std::string& path) { return array_from_image(read_pfm(path)); }, py::arg("path"));
  m.def("write_pfm", [](const std::string& path, const F64Array& a) { write_pfm(path, image_from_array(a)); },
        py::arg("path"), py::arg("image"));

  m.def("psnr", [](const F64Array& a, const F64Array& b) { return psnr(image_from_array(a), image_from_array(b)); },
        py::arg("a"), py::arg("b"));
  m.def(
      "depth_mse",
      [](const F64Array& pred, const F64Array& gt, const F64Array& mask) {
        return depth_mse(image_from_array(pred), image_from_array(gt), image_from_array(mask));
      },
      py::arg("pred"), py::arg("gt"), py::arg("mask"));

  m.def(
      "lambda_at",
      [](long iteration, const std::string& config_json) {
        return lambda_at(iteration, train_config_from_json(parse(config_json)));
      },
      py::arg("iteration"), py::arg("config_json"));

  m.def(
      "simulate",
      [](const std::string& scene_json, const std::string& capture_json, const std::string& out_dir) {
        const Dataset d =
            capture_dataset(scene_from_json(parse(scene_json)), capture_config_from_json(parse(capture_json)), out_dir);
        return d.frames.size();
      },
      py::arg("scene_json"), py::arg("capture_json"), py::arg("out_dir"),
      "Captures a dataset to out_dir and returns the frame count.");

  m.def(
      "load_frame",
      [](const std::string& dir, std::size_t frame) {
        const Dataset d = load_dataset(dir);
        const Frame& f = d.frames.at(frame);
        py::dict out;
        out["tau"] = f.tau;
        out["rgb"] = array_from_image(f.rgb);
        out["quad"] = array_from_image(f.quad.exposures());
        out["depth_gt"] = array_from_image(f.depth_gt);
        out["phasor"] = array_from_phasors(d.normalized_phasors(frame));
        out["frequency"] = d.rig.model.mod_frequency;
        return out;
      },
      py::arg("dataset_dir"), py::arg("frame"));

  m.def(
      "fit",
      [](const std::string& data_dir, const std::string& config_json, const std::string& ckpt_path,
         int resolution, int time_steps, const std::vector<double>& box_min, const std::vector<double>& box_max,
         std::uint64_t seed) {
        if (box_min.size() != 3 || box_max.size() != 3) throw std::invalid_argument("box corners need 3 values");
        const Dataset data = load_dataset(data_dir);
        const TrainConfig cfg = train_config_from_json(parse(config_json));
        const Vec3 lo(box_min[0], box_min[1], box_min[2]);
        const Vec3 hi(box_max[0], box_max[1], box_max[2]);
        const std::array<int, 3> res{resolution, resolution, resolution};
        RadianceFieldSet fields{StaticField(res, lo, hi), std::nullopt, true};
        if (time_steps > 1) fields.dyn = DynamicField(res, time_steps, lo, hi);
        std::vector<Pose> rig_poses;
        std::vector<double> times;
        for (const Frame& f : data.frames) {
          rig_poses.push_back(f.rig_pose);
          times.push_back(f.tau);
        }
        PoseParams poses = PoseParams::from_poses(rig_poses, data.rig.tof_in_rgb);
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(data, fields, poses, cfg, seed);
        }
        save_checkpoint(ckpt_path, Checkpoint{fields, data.rig, poses, times, cfg.n_samples});
        return trace_dict(result.trace);
      },
      py::arg("data_dir"), py::arg("config_json"), py::arg("ckpt_path"), py::arg("resolution") = 16,
      py::arg("time_steps") = 1, py::arg("box_min"), py::arg("box_max"), py::arg("seed") = 0,
      "Fits fields to a dataset, writes a checkpoint and returns the loss trace.");

  m.def(
      "render",
      [](const std::string& ckpt_path, const F64Array& rotation, const std::vector<double>& translation,
         double tau, const std::string& mode, const std::string& sensor, int samples) {
        const Checkpoint ckpt = load_checkpoint(ckpt_path);
        if (rotation.ndim() != 2 || rotation.shape(0) != 3 || rotation.shape(1) != 3 || translation.size() != 3)
          throw std::invalid_argument("pose needs a 3x3 rotation and a 3-vector translation");
        Pose pose;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) pose.rotation(r, c) = rotation.at(r, c);
        pose.translation = Vec3(translation[0], translation[1], translation[2]);
        pose.validate();
        const Sensor s = sensor == "tof" ? Sensor::kTof : Sensor::kRgb;
        RenderOptions opt;
        opt.n_samples = samples > 0 ? samples : ckpt.n_samples;
        opt.stratified = false;
        const Camera cam{ckpt.rig.intrinsics(s), ckpt.rig.sensor_pose(pose, s)};
        return array_from_image(render_image(cam, ckpt.fields, tau, ckpt.rig.model, parse_render_mode(mode), opt,
                                             ViewBounds{ckpt.rig.t_near, ckpt.rig.t_far}));
      },
      py::arg("ckpt_path"), py::arg("rotation"), py::arg("translation"), py::arg("tau") = 0.0,
      py::arg("mode") = "rgb", py::arg("sensor") = "rgb", py::arg("samples") = 0);

  m.def(
      "evaluate",
      [](const std::string& ckpt_path, const std::string& data_dir, int samples) {
        const Checkpoint ckpt = load_checkpoint(ckpt_path);
        RenderOptions opt;
        opt.n_samples = samples > 0 ? samples : ckpt.n_samples;
        opt.stratified = false;
        return to_json(evaluate(ckpt.fields, load_dataset(data_dir), opt)).dump();
      },
      py::arg("ckpt_path"), py::arg("data_dir"), py::arg("samples") = 0,
      "Metrics JSON text for a hold-out dataset.");

  m.def("set_thread_count", &set_thread_count, py::arg("n"));
  m.def("thread_count", &thread_count);
}
