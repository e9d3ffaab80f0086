// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

// Joint RGB + phasor reconstruction: squared-error loss, exact reverse-mode
// gradients for grid parameters and camera poses, and the staged training loop.

#pragma once

#include "torf/camera.hpp"
#include "torf/dataset.hpp"
#include "torf/fields.hpp"
#include "torf/renderer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace torf {

// Per-frame color-camera poses plus the shared ToF-in-color transform, all as
// axis-angle rotation and translation.
struct PoseParams {
  std::vector<Vec3> rotation;
  std::vector<Vec3> translation;
  Vec3 rel_rotation = Vec3::Zero();
  Vec3 rel_translation = Vec3::Zero();

  static PoseParams from_poses(std::span<const Pose> rig_poses, const Pose& tof_in_rgb);

  std::size_t frame_count() const { return rotation.size(); }
  Pose rig_pose(std::size_t f) const;
  Pose tof_in_rgb() const;
  Pose sensor_pose(std::size_t f, Sensor s) const;
  // Keeps every axis-angle vector below pi in norm.
  void renormalize();
};

enum class Supervision { kRgb, kTof, kDepth };

// One pixel measurement and the ray that observes it.
struct RayQuery {
  std::size_t frame = 0;
  Sensor sensor = Sensor::kRgb;
  double px = 0.0;
  double py = 0.0;
  double tau = 0.0;
  std::uint64_t seed = 0;  // stratified sampling generator seed
  Supervision kind = Supervision::kRgb;
  Vec3 rgb = Vec3::Zero();
  Phasor phasor{};
  double depth = 0.0;
};

// loss = sum rgb * |L_rgb - m|^2 + lambda * (tof * |L_tof - m|^2 + depth * (D - m)^2)
struct LossWeights {
  double lambda = 1.0;
  double rgb = 1.0;
  double tof = 1.0;
  double depth = 1.0;
};

struct GradientSet {
  std::vector<double> stat;  // layout of StaticField::grid().params()
  std::vector<double> dyn;   // layout of DynamicField::grid().params(), blend included
  std::vector<Vec3> pose_rotation;
  std::vector<Vec3> pose_translation;
  Vec3 rel_rotation = Vec3::Zero();
  Vec3 rel_translation = Vec3::Zero();

  static GradientSet zeros_like(const RadianceFieldSet& fields, const PoseParams& poses);
  void set_zero();
  void add(const GradientSet& other);
  // Name of the first block holding a non-finite entry, empty if none.
  std::string first_non_finite_block() const;
};

struct LossBreakdown {
  double total = 0.0;
  double rgb = 0.0;    // unweighted sum of squared rgb residuals
  double tof = 0.0;    // unweighted sum of squared phasor residuals
  double depth = 0.0;  // unweighted sum of squared depth residuals
};

// Loss of a batch; when `grad` is non-null it receives the gradient (added,
// not overwritten). Rays are processed in fixed chunks and reduced in order,
// so results do not depend on the worker count.
LossBreakdown evaluate_batch(std::span<const RayQuery> batch, const RadianceFieldSet& fields,
                             const PoseParams& poses, const SensorRig& rig,
                             const LossWeights& weights, const RenderOptions& opt,
                             GradientSet* grad = nullptr);

double loss(std::span<const RayQuery> batch, const RadianceFieldSet& fields,
            const PoseParams& poses, const SensorRig& rig, const LossWeights& weights,
            const RenderOptions& opt);

// Throws std::runtime_error naming the offending block on non-finite gradients.
GradientSet gradients(std::span<const RayQuery> batch, const RadianceFieldSet& fields,
                      const PoseParams& poses, const SensorRig& rig, const LossWeights& weights,
                      const RenderOptions& opt);

// Analytic versus central-difference gradients per parameter block.
struct GradientCheckEntry {
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_rel_error = 0.0;
};
using GradientReport = std::map<std::string, GradientCheckEntry>;

struct GradientCheckOptions {
  double field_step = 1e-4;
  double pose_step = 1e-6;
  // Parameters with zero analytic gradient probed per field block.
  int zero_probes = 16;
  std::uint64_t seed = 7;
};

// Relative error of one entry: |a - n| / max(|a|, |n|, 1e-3 * max_block |n|, 1e-12).
GradientReport check_gradients(std::span<const RayQuery> batch, const RadianceFieldSet& fields,
                               const PoseParams& poses, const SensorRig& rig,
                               const LossWeights& weights, const RenderOptions& opt,
                               const GradientCheckOptions& check = {});

enum class SupervisionMode {
  kPhasor,   // rgb + raw phasor loss (alternating)
  kDepth,    // rgb + loss on phase-derived depth (ablation)
  kRgbOnly,  // rgb loss only (ablation)
};

struct TrainConfig {
  double lambda = 1.0;
  long lambda_half_life = 2000;
  int rays_per_batch = 512;
  long iterations = 5000;
  double lr_fields = 1e-2;
  double lr_pose_initial = 1e-3;
  double lr_pose_late = 5e-4;
  long pose_stage_iters = 500;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Field learning rate decays exponentially to lr_fields * lr_final_fraction.
  double lr_final_fraction = 1.0;
  int n_samples = 64;
  bool optimize_poses = false;
  bool optimize_relative = false;
  // Frame 0 stays fixed and defines the world frame during pose refinement.
  bool anchor_first_frame = true;
  bool normalize_residuals = true;
  SupervisionMode mode = SupervisionMode::kPhasor;
  // Loss above this multiple of its first value aborts training.
  double divergence_factor = 1e6;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

double lambda_at(long iteration, const TrainConfig& cfg);

struct TraceRow {
  long iteration = 0;
  double rgb_loss = std::numeric_limits<double>::quiet_NaN();  // mean per ray
  double tof_loss = std::numeric_limits<double>::quiet_NaN();  // mean per ray, phasor or depth
  double lambda = 0.0;
  double pose_error = std::numeric_limits<double>::quiet_NaN();  // mean translation error, m
};

struct TrainResult {
  std::vector<TraceRow> trace;
  LossWeights weights;  // residual normalization used
};

// Rotation (degrees) and translation (meters) error of each frame's rig pose,
// measured relative to frame 0 so that a common rigid offset is ignored. With
// a single frame the absolute error is reported.
struct PoseError {
  double rotation_deg = 0.0;
  double translation_m = 0.0;
};
std::vector<PoseError> pose_errors(const PoseParams& estimate, std::span<const Pose> truth);

struct TrainHooks {
  // Ground-truth rig poses for the pose-error column.
  std::span<const Pose> true_poses;
  std::function<void(const TraceRow&)> on_iteration;
};

// Stage 1 (iterations < pose_stage_iters): static field and poses with
// lr_pose_initial. Stage 2: full model with lr_pose_late. Iterations alternate
// color and ToF batches, starting with color. Throws std::runtime_error on
// divergence.
TrainResult train(const Dataset& data, RadianceFieldSet& fields, PoseParams& poses,
                  const TrainConfig& cfg, std::uint64_t seed, const TrainHooks& hooks = {});

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace);

}  // namespace torf
