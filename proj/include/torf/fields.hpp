// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

// Explicit voxel-grid radiance fields: a static field, a time-conditioned
// dynamic field with a blend channel, and the opacity blending used by the
// renderer.

#pragma once

#include "torf/types.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace torf {

// Channel layout shared by static (first five) and dynamic (all six) grids.
enum Channel : int { kDensity = 0, kRed = 1, kGreen = 2, kBlue = 3, kIr = 4, kBlend = 5 };

inline constexpr int kStaticChannels = 5;
inline constexpr int kDynamicChannels = 6;

struct FieldSample {
  double sigma = 0.0;  // 1/m
  Vec3 rgb = Vec3::Zero();
  double ir = 0.0;
  double blend = 0.0;  // static samples carry 0
};

// Output activations applied after interpolation.
//   sigma = density_scale * softplus(p)
//   rgb   = radiance_max * sigmoid(p)
//   ir    = ir_scale * softplus(p)
//   b     = sigmoid(p)
struct Activations {
  double density_scale = 10.0;
  double radiance_max = 1.0;
  double ir_scale = 1.0;
};

double softplus(double x);
double softplus_inverse(double y);
double sigmoid(double x);
double logit(double y);

struct GridShape {
  std::array<int, 3> resolution{1, 1, 1};
  int time_steps = 1;
  Vec3 box_min = Vec3::Zero();
  Vec3 box_max = Vec3::Ones();

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(resolution[0]) * resolution[1] * resolution[2] * time_steps;
  }
  Vec3 voxel_size() const;
  void validate() const;
};

// Multilinear interpolation weights over voxel centers (8 corners in space,
// doubled along time for dynamic grids). `count == 0` means outside the box.
struct Stencil {
  int count = 0;
  std::array<std::size_t, 16> voxel{};
  std::array<double, 16> weight{};
  std::array<Vec3, 16> dweight_dx{};
};

// Interpolated pre-activation channel values with the stencil that produced them.
struct PreSample {
  Stencil stencil;
  std::array<double, kDynamicChannels> pre{};
  bool inside() const { return stencil.count > 0; }
};

class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(GridShape shape, int channels);

  const GridShape& shape() const { return shape_; }
  int channels() const { return channels_; }
  std::size_t voxel_count() const { return shape_.voxel_count(); }

  std::size_t voxel_index(int ix, int iy, int iz, int it = 0) const;
  Vec3 voxel_center(int ix, int iy, int iz) const;

  // Flat parameter layout: params[channel * voxel_count() + voxel].
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> channel(int c);
  std::span<const double> channel(int c) const;

  double& at(int c, std::size_t voxel) { return params_[c * voxel_count() + voxel]; }
  double at(int c, std::size_t voxel) const { return params_[c * voxel_count() + voxel]; }

  bool contains(const Vec3& x) const;
  Stencil stencil(const Vec3& x, double tau) const;
  PreSample interpolate(const Vec3& x, double tau) const;

 private:
  GridShape shape_;
  int channels_ = 0;
  std::vector<double> params_;
};

// Initial pre-activation values: sigma ~ 0.05/m, mid-range radiance, b ~ 0.5.
struct FieldInit {
  double sigma = 0.05;
  double rgb = 0.5;
  double ir = 0.1;
  double blend = 0.5;
};

class StaticField {
 public:
  StaticField() = default;
  StaticField(std::array<int, 3> resolution, Vec3 box_min, Vec3 box_max,
              const Activations& act = {}, const FieldInit& init = {});

  FieldSample sample(const Vec3& x) const;
  const VoxelGrid& grid() const { return grid_; }
  VoxelGrid& grid() { return grid_; }
  const Activations& activations() const { return act_; }
  Activations& activations() { return act_; }

 private:
  VoxelGrid grid_;
  Activations act_;
};

class DynamicField {
 public:
  DynamicField() = default;
  DynamicField(std::array<int, 3> resolution, int time_steps, Vec3 box_min, Vec3 box_max,
               const Activations& act = {}, const FieldInit& init = {});

  // tau is clamped to [0, 1]; time steps sit at tau = i / (time_steps - 1).
  FieldSample sample(const Vec3& x, double tau) const;
  const VoxelGrid& grid() const { return grid_; }
  VoxelGrid& grid() { return grid_; }
  const Activations& activations() const { return act_; }
  Activations& activations() { return act_; }

 private:
  VoxelGrid grid_;
  Activations act_;
};

// Activated sample plus d(activated)/d(pre) for each channel.
struct ActivatedSample {
  FieldSample value;
  std::array<double, kDynamicChannels> dvalue_dpre{};
};

ActivatedSample activate(const PreSample& pre, const Activations& act, bool has_blend);

// Static/dynamic pair at one point; `dyn` is engaged only for blended rendering.
struct SamplePair {
  FieldSample stat;
  std::optional<FieldSample> dyn;
};

// The scene representation consumed by the renderer and optimizer.
struct RadianceFieldSet {
  StaticField stat;
  std::optional<DynamicField> dyn;
  // When false, rendering ignores the dynamic field (b == 0 path).
  bool use_dynamic = true;

  bool dynamic_active() const { return dyn.has_value() && use_dynamic; }
  SamplePair sample_pair(const Vec3& x, double tau) const;
};

// 1 - exp(-sigma * delta). Throws std::domain_error on negative inputs.
double opacity_from_density(double sigma, double delta);

struct BlendedSample {
  double alpha = 0.0;
  Vec3 rgb = Vec3::Zero();  // premultiplied by alpha
  double ir = 0.0;          // premultiplied by alpha
};

BlendedSample blend_samples(const FieldSample& stat, const FieldSample& dyn, double delta);
// Static-only path; identical arithmetic to blend_samples with b == 0.
BlendedSample static_sample(const FieldSample& stat, double delta);

}  // namespace torf
