// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

// Analytic ground-truth scenes and an RGB + quad-ToF capture simulator.
//
// Light transport is single-bounce from a point source at the ToF camera
// center, plus one explicit specular bounce off primitives with nonzero
// reflectivity. The color camera sees albedo under constant ambient light.

#pragma once

#include "torf/camera.hpp"
#include "torf/dataset.hpp"
#include "torf/fields.hpp"
#include "torf/renderer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace torf {

enum class PrimitiveKind { kPlane, kSphere, kBox };

struct Material {
  Vec3 rgb = Vec3::Constant(0.5);
  double ir = 0.5;
  // Checkerboard with cells of this size (meters) alternating with the *_alt
  // values; 0 disables it.
  double checker_size = 0.0;
  Vec3 rgb_alt = Vec3::Zero();
  double ir_alt = 0.0;
};

struct MotionKey {
  double tau = 0.0;
  Vec3 offset = Vec3::Zero();
};

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kPlane;
  // plane: a point and unit normal; sphere: center and radius; box: corners.
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  Vec3 box_min = Vec3::Zero();
  Vec3 box_max = Vec3::Ones();
  Material material;
  // Piecewise-linear translation over tau, clamped at the ends; empty = static.
  std::vector<MotionKey> motion;
  // Fraction of light specularly reflected in addition to the diffuse return.
  double reflectivity = 0.0;

  Vec3 offset_at(double tau) const;
  void validate() const;
};

struct AnalyticScene {
  std::vector<Primitive> primitives;
  double ambient = 1.0;
  Vec3 background = Vec3::Zero();  // color of rays that hit nothing

  void validate() const;
  // Box enclosing all spheres and boxes over their motion; planes are skipped.
  std::optional<std::pair<Vec3, Vec3>> bounds() const;
};

struct Hit {
  double depth = 0.0;  // range along the unit ray direction, meters
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();  // faces the incoming ray
  Vec3 rgb = Vec3::Zero();     // albedo * ambient
  double ir_albedo = 0.0;
  // ir_albedo * |n . w| / depth^2 for a unit source at the ray origin.
  double ir_energy = 0.0;
  std::size_t primitive = 0;
};

// Nearest intersection at time tau with range in (1e-9, inf); the ray's near
// and far bounds are ignored. `skip` excludes one primitive index.
std::optional<Hit> trace_first_hit(const AnalyticScene& scene, const Ray& ray, double tau,
                                   std::optional<std::size_t> skip = std::nullopt);

// Light paths seen by one ToF ray: the direct return and, off reflective
// surfaces, the once-mirrored return, each as an (energy, delay) impulse.
struct PathContributions {
  std::optional<Impulse> direct;
  std::optional<Impulse> mirrored;  // energy already scaled by reflectivity
};
PathContributions trace_paths(const AnalyticScene& scene, const Ray& ray, double tau,
                              const ToFModel& model);

struct CaptureConfig {
  SensorRig rig;
  std::vector<Pose> trajectory;  // color camera-to-world per frame
  std::vector<double> times;     // per frame; empty = evenly spaced over [0, 1]
  double noise_std = 0.0;        // per-exposure additive gaussian, exposure units
  std::uint64_t seed = 0;
  int supersample = 1;  // k x k sub-rays per ToF pixel

  void validate() const;
  double time_of(std::size_t frame) const;
};

// 320x240 ToF and color cameras 41 mm apart along x, 30 MHz modulation.
SensorRig default_rig();

// Camera-to-world pose at `eye` looking at `target`; camera y points along -up.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitY());

Frame capture_frame(const AnalyticScene& scene, const CaptureConfig& cfg, std::size_t frame);
Dataset capture_dataset(const AnalyticScene& scene, const CaptureConfig& cfg);
// Captures and writes the dataset layout to `dir`.
Dataset capture_dataset(const AnalyticScene& scene, const CaptureConfig& cfg,
                        const std::filesystem::path& dir);

// A dataset whose measurements are renders of `fields` (quad exposures are
// consistent with the rendered phasors; depth_gt holds expected depth).
Dataset render_dataset(const RadianceFieldSet& fields, const SensorRig& rig,
                       std::span<const Pose> rig_poses, std::span<const double> times,
                       const RenderOptions& opt);

AnalyticScene scene_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnalyticScene& scene);
// Rig keys override default_rig(); trajectory entries are pose objects or
// {"eye", "target", "up"} look-at specs.
CaptureConfig capture_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CaptureConfig& cfg);

}  // namespace torf
