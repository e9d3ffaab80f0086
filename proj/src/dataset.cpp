// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/dataset.hpp"

#include "torf/io.hpp"

#include <cstdio>

namespace torf {

namespace fs = std::filesystem;

namespace {

constexpr int kDatasetVersion = 1;

fs::path frame_dir(const fs::path& dir, std::size_t f) {
  char name[16];
  std::snprintf(name, sizeof(name), "%04zu", f);
  return dir / "frames" / name;
}

}  // namespace

PhasorImage Dataset::normalized_phasors(std::size_t f) const {
  PhasorImage p = combine_quad(frames.at(f).quad);
  const double inv = 1.0 / rig.phasor_scale();
  for (Phasor& v : p.data()) v *= inv;
  return p;
}

nlohmann::json to_json(const ToFModel& model) {
  return {{"frequency", model.mod_frequency},
          {"light_speed", model.light_speed},
          {"zero_phase_offset", model.zero_phase_offset},
          {"source_intensity", model.source_intensity}};
}

ToFModel tof_model_from_json(const nlohmann::json& j, const ToFModel& base) {
  ToFModel m = base;
  m.mod_frequency = j.value("frequency", m.mod_frequency);
  m.light_speed = j.value("light_speed", m.light_speed);
  m.zero_phase_offset = j.value("zero_phase_offset", m.zero_phase_offset);
  m.source_intensity = j.value("source_intensity", m.source_intensity);
  m.validate();
  return m;
}

nlohmann::json to_json(const SensorRig& rig) {
  return {{"intrinsics", {{"rgb", to_json(rig.rgb)}, {"tof", to_json(rig.tof)}}},
          {"baseline_transform", to_json(rig.tof_in_rgb)},
          {"tof", to_json(rig.model)},
          {"n_periods", rig.n_periods},
          {"phasor_scale", rig.phasor_scale()},
          {"near", rig.t_near},
          {"far", rig.t_far}};
}

SensorRig rig_from_json(const nlohmann::json& j, const SensorRig& base) {
  SensorRig rig = base;
  if (j.contains("intrinsics")) {
    const auto& in = j.at("intrinsics");
    if (in.contains("rgb")) rig.rgb = intrinsics_from_json(in.at("rgb"));
    if (in.contains("tof")) rig.tof = intrinsics_from_json(in.at("tof"));
  }
  if (j.contains("baseline_transform")) rig.tof_in_rgb = pose_from_json(j.at("baseline_transform"));
  if (j.contains("tof")) rig.model = tof_model_from_json(j.at("tof"), rig.model);
  rig.n_periods = j.value("n_periods", rig.n_periods);
  rig.t_near = j.value("near", rig.t_near);
  rig.t_far = j.value("far", rig.t_far);
  if (rig.n_periods < 1) throw FormatError("rig: n_periods must be >= 1");
  if (!(rig.t_near > 0.0 && rig.t_near < rig.t_far)) throw FormatError("rig: need 0 < near < far");
  return rig;
}

void save_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir / "frames");
  nlohmann::json meta = to_json(data.rig);
  meta["format_version"] = kDatasetVersion;
  meta["frame_count"] = data.frames.size();
  nlohmann::json times = nlohmann::json::array();
  for (const Frame& f : data.frames) times.push_back(f.tau);
  meta["times"] = times;
  if (data.scene_bounds)
    meta["scene_bounds"] = {{"min", to_json(data.scene_bounds->first)},
                            {"max", to_json(data.scene_bounds->second)}};
  write_json(dir / "meta.json", meta);

  for (std::size_t f = 0; f < data.frames.size(); ++f) {
    const Frame& frame = data.frames[f];
    const fs::path fd = frame_dir(dir, f);
    fs::create_directories(fd);
    write_pfm(fd / "rgb.pfm", frame.rgb);
    write_pfm(fd / "tof_quad.pfm", frame.quad.exposures());
    write_pfm(fd / "depth_gt.pfm", frame.depth_gt);
    write_json(fd / "poses.json", {{"convention", "camera-to-world"},
                                   {"tau", frame.tau},
                                   {"rgb", to_json(frame.rig_pose)},
                                   {"tof", to_json(data.rig.sensor_pose(frame.rig_pose, Sensor::kTof))}});
  }
}

Dataset load_dataset(const fs::path& dir) {
  const nlohmann::json meta = read_json(dir / "meta.json");
  Dataset data;
  try {
    if (meta.value("format_version", 0) != kDatasetVersion)
      throw FormatError("unsupported format_version");
    data.rig = rig_from_json(meta);
    if (meta.contains("scene_bounds"))
      data.scene_bounds = std::make_pair(vec3_from_json(meta["scene_bounds"].at("min")),
                                         vec3_from_json(meta["scene_bounds"].at("max")));
  } catch (const std::exception& e) {
    throw FormatError("'" + (dir / "meta.json").string() + "': " + e.what());
  }
  const std::size_t count = meta.at("frame_count").get<std::size_t>();
  for (std::size_t f = 0; f < count; ++f) {
    const fs::path fd = frame_dir(dir, f);
    Frame frame;
    frame.rgb = read_pfm(fd / "rgb.pfm");
    frame.quad = QuadImage(read_pfm(fd / "tof_quad.pfm"));
    frame.depth_gt = read_pfm(fd / "depth_gt.pfm");
    const nlohmann::json poses = read_json(fd / "poses.json");
    try {
      frame.tau = poses.value("tau", 0.0);
      frame.rig_pose = pose_from_json(poses.at("rgb"));
    } catch (const std::exception& e) {
      throw FormatError("'" + (fd / "poses.json").string() + "': " + e.what());
    }
    if (frame.rgb.channels() != 3)
      throw FormatError("'" + (fd / "rgb.pfm").string() + "': expected 3 channels");
    data.frames.push_back(std::move(frame));
  }
  return data;
}

}  // namespace torf
