// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

// Time-indexed RGB + quad-ToF captures and their on-disk layout:
//
//   DIR/meta.json
//   DIR/frames/NNNN/{rgb.pfm, tof_quad.pfm, depth_gt.pfm, poses.json}

#pragma once

#include "torf/camera.hpp"
#include "torf/tof_model.hpp"
#include "torf/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace torf {

enum class Sensor { kRgb = 0, kTof = 1 };

// Color and ToF cameras. The ToF camera pose is rig_pose * tof_in_rgb, where
// the rig pose is the color camera's camera-to-world transform.
struct SensorRig {
  Intrinsics rgb;
  Intrinsics tof;
  Pose tof_in_rgb;
  ToFModel model;
  long n_periods = 30000;
  double t_near = 0.1;
  double t_far = 10.0;

  const Intrinsics& intrinsics(Sensor s) const { return s == Sensor::kRgb ? rgb : tof; }
  Pose sensor_pose(const Pose& rig_pose, Sensor s) const {
    return s == Sensor::kRgb ? rig_pose : rig_pose.compose(tof_in_rgb);
  }
  // Recombined phasor of a unit-energy impulse; measured phasors divided by
  // this are in renderer units.
  double phasor_scale() const { return quad_phasor_scale(model, n_periods); }
};

struct Frame {
  double tau = 0.0;  // normalized time in [0, 1]
  Image rgb;         // color camera, 3 channels
  QuadImage quad;    // ToF camera exposures
  Image depth_gt;    // ToF camera range per pixel, 0 where nothing was hit
  Pose rig_pose;     // color camera-to-world
};

struct Dataset {
  SensorRig rig;
  std::vector<Frame> frames;
  // Optional bounding box of the scene content, used to size grids.
  std::optional<std::pair<Vec3, Vec3>> scene_bounds;

  // Phasor image of frame f divided by the rig's phasor scale.
  PhasorImage normalized_phasors(std::size_t f) const;
};

void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

nlohmann::json to_json(const SensorRig& rig);
// Missing keys fall back to `base`.
SensorRig rig_from_json(const nlohmann::json& j, const SensorRig& base = {});
nlohmann::json to_json(const ToFModel& model);
ToFModel tof_model_from_json(const nlohmann::json& j, const ToFModel& base = {});

}  // namespace torf
