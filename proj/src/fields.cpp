// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/fields.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace torf {

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw std::domain_error("softplus_inverse: argument must be positive");
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double y) {
  if (!(y > 0.0 && y < 1.0)) throw std::domain_error("logit: argument must be in (0, 1)");
  return std::log(y / (1.0 - y));
}

Vec3 GridShape::voxel_size() const {
  return (box_max - box_min).cwiseQuotient(Vec3(resolution[0], resolution[1], resolution[2]));
}

void GridShape::validate() const {
  for (int r : resolution)
    if (r < 1) throw std::invalid_argument("GridShape: resolution must be >= 1");
  if (time_steps < 1) throw std::invalid_argument("GridShape: time_steps must be >= 1");
  if (!((box_max - box_min).array() > 0.0).all())
    throw std::invalid_argument("GridShape: empty bounding box");
}

VoxelGrid::VoxelGrid(GridShape shape, int channels) : shape_(std::move(shape)), channels_(channels) {
  shape_.validate();
  if (channels < 1) throw std::invalid_argument("VoxelGrid: channels must be >= 1");
  params_.assign(static_cast<std::size_t>(channels) * shape_.voxel_count(), 0.0);
}

std::size_t VoxelGrid::voxel_index(int ix, int iy, int iz, int it) const {
  const auto& r = shape_.resolution;
  return ((static_cast<std::size_t>(it) * r[2] + iz) * r[1] + iy) * r[0] + ix;
}

Vec3 VoxelGrid::voxel_center(int ix, int iy, int iz) const {
  const Vec3 size = shape_.voxel_size();
  return shape_.box_min + Vec3((ix + 0.5) * size.x(), (iy + 0.5) * size.y(), (iz + 0.5) * size.z());
}

std::span<double> VoxelGrid::channel(int c) {
  return std::span<double>(params_).subspan(c * voxel_count(), voxel_count());
}

std::span<const double> VoxelGrid::channel(int c) const {
  return std::span<const double>(params_).subspan(c * voxel_count(), voxel_count());
}

bool VoxelGrid::contains(const Vec3& x) const {
  return (x.array() >= shape_.box_min.array()).all() && (x.array() <= shape_.box_max.array()).all();
}

namespace {

struct AxisWeights {
  int i0 = 0;
  int i1 = 0;
  double w0 = 1.0;
  double w1 = 0.0;
  double dw1 = 0.0;  // d w1 / d coordinate; d w0 = -dw1
};

// Linear weights between neighbouring cell centers, clamped to the edge value
// in the half cell next to the box boundary.
AxisWeights axis_weights(double coord, int n, double inv_size) {
  AxisWeights a;
  if (n == 1) return a;
  const double u = coord * inv_size - 0.5;
  if (u <= 0.0) {
    a.i0 = a.i1 = 0;
    return a;
  }
  if (u >= n - 1) {
    a.i0 = a.i1 = n - 1;
    return a;
  }
  a.i0 = std::min(static_cast<int>(std::floor(u)), n - 2);
  a.i1 = a.i0 + 1;
  a.w1 = u - a.i0;
  a.w0 = 1.0 - a.w1;
  a.dw1 = inv_size;
  return a;
}

}  // namespace

Stencil VoxelGrid::stencil(const Vec3& x, double tau) const {
  Stencil s;
  if (!contains(x)) return s;
  const Vec3 size = shape_.voxel_size();
  const Vec3 local = x - shape_.box_min;
  const auto& r = shape_.resolution;
  const AxisWeights ax[3] = {axis_weights(local.x(), r[0], 1.0 / size.x()),
                             axis_weights(local.y(), r[1], 1.0 / size.y()),
                             axis_weights(local.z(), r[2], 1.0 / size.z())};

  int t_index[2] = {0, 0};
  double t_weight[2] = {1.0, 0.0};
  int t_count = 1;
  if (shape_.time_steps > 1) {
    const double u = std::clamp(tau, 0.0, 1.0) * (shape_.time_steps - 1);
    const int t0 = std::min(static_cast<int>(std::floor(u)), shape_.time_steps - 2);
    t_index[0] = t0;
    t_index[1] = t0 + 1;
    t_weight[1] = u - t0;
    t_weight[0] = 1.0 - t_weight[1];
    t_count = 2;
  }

  int n = 0;
  for (int it = 0; it < t_count; ++it) {
    for (int corner = 0; corner < 8; ++corner) {
      const int bx = corner & 1, by = (corner >> 1) & 1, bz = (corner >> 2) & 1;
      const double wx = bx ? ax[0].w1 : ax[0].w0;
      const double wy = by ? ax[1].w1 : ax[1].w0;
      const double wz = bz ? ax[2].w1 : ax[2].w0;
      const double dwx = bx ? ax[0].dw1 : -ax[0].dw1;
      const double dwy = by ? ax[1].dw1 : -ax[1].dw1;
      const double dwz = bz ? ax[2].dw1 : -ax[2].dw1;
      const double wt = t_weight[it];
      s.voxel[n] = voxel_index(bx ? ax[0].i1 : ax[0].i0, by ? ax[1].i1 : ax[1].i0,
                               bz ? ax[2].i1 : ax[2].i0, t_index[it]);
      s.weight[n] = wt * wx * wy * wz;
      s.dweight_dx[n] = wt * Vec3(dwx * wy * wz, wx * dwy * wz, wx * wy * dwz);
      ++n;
    }
  }
  s.count = n;
  return s;
}

PreSample VoxelGrid::interpolate(const Vec3& x, double tau) const {
  PreSample out;
  out.stencil = stencil(x, tau);
  const std::size_t nv = voxel_count();
  for (int c = 0; c < channels_; ++c) {
    const double* base = params_.data() + c * nv;
    double v = 0.0;
    for (int k = 0; k < out.stencil.count; ++k) v += out.stencil.weight[k] * base[out.stencil.voxel[k]];
    out.pre[c] = v;
  }
  return out;
}

ActivatedSample activate(const PreSample& pre, const Activations& act, bool has_blend) {
  ActivatedSample a;
  if (!pre.inside()) return a;
  const double pd = pre.pre[kDensity];
  a.value.sigma = act.density_scale * softplus(pd);
  a.dvalue_dpre[kDensity] = act.density_scale * sigmoid(pd);
  for (int c = kRed; c <= kBlue; ++c) {
    const double s = sigmoid(pre.pre[c]);
    a.value.rgb[c - kRed] = act.radiance_max * s;
    a.dvalue_dpre[c] = act.radiance_max * s * (1.0 - s);
  }
  a.value.ir = act.ir_scale * softplus(pre.pre[kIr]);
  a.dvalue_dpre[kIr] = act.ir_scale * sigmoid(pre.pre[kIr]);
  if (has_blend) {
    const double b = sigmoid(pre.pre[kBlend]);
    a.value.blend = b;
    a.dvalue_dpre[kBlend] = b * (1.0 - b);
  }
  return a;
}

namespace {

void fill_initial(VoxelGrid& grid, const Activations& act, const FieldInit& init) {
  const double pd = softplus_inverse(init.sigma / act.density_scale);
  const double pc = logit(init.rgb / act.radiance_max);
  const double pi = softplus_inverse(init.ir / act.ir_scale);
  std::fill_n(grid.channel(kDensity).begin(), grid.voxel_count(), pd);
  for (int c = kRed; c <= kBlue; ++c) std::fill_n(grid.channel(c).begin(), grid.voxel_count(), pc);
  std::fill_n(grid.channel(kIr).begin(), grid.voxel_count(), pi);
  if (grid.channels() > kBlend)
    std::fill_n(grid.channel(kBlend).begin(), grid.voxel_count(), logit(init.blend));
}

}  // namespace

StaticField::StaticField(std::array<int, 3> resolution, Vec3 box_min, Vec3 box_max,
                         const Activations& act, const FieldInit& init)
    : grid_(GridShape{resolution, 1, box_min, box_max}, kStaticChannels), act_(act) {
  fill_initial(grid_, act_, init);
}

FieldSample StaticField::sample(const Vec3& x) const {
  return activate(grid_.interpolate(x, 0.0), act_, false).value;
}

DynamicField::DynamicField(std::array<int, 3> resolution, int time_steps, Vec3 box_min,
                           Vec3 box_max, const Activations& act, const FieldInit& init)
    : grid_(GridShape{resolution, time_steps, box_min, box_max}, kDynamicChannels), act_(act) {
  fill_initial(grid_, act_, init);
}

FieldSample DynamicField::sample(const Vec3& x, double tau) const {
  return activate(grid_.interpolate(x, tau), act_, true).value;
}

SamplePair RadianceFieldSet::sample_pair(const Vec3& x, double tau) const {
  SamplePair pair;
  pair.stat = stat.sample(x);
  if (dynamic_active()) pair.dyn = dyn->sample(x, tau);
  return pair;
}

double opacity_from_density(double sigma, double delta) {
  if (!(sigma >= 0.0) || !(delta >= 0.0))
    throw std::domain_error("opacity_from_density: sigma and delta must be non-negative");
  return -std::expm1(-sigma * delta);
}

BlendedSample static_sample(const FieldSample& stat, double delta) {
  const double alpha = opacity_from_density(stat.sigma, delta);
  return {alpha, alpha * stat.rgb, alpha * stat.ir};
}

BlendedSample blend_samples(const FieldSample& stat, const FieldSample& dyn, double delta) {
  const double b = dyn.blend;
  const double ws = (1.0 - b) * opacity_from_density(stat.sigma, delta);
  const double wd = b * opacity_from_density(dyn.sigma, delta);
  return {ws + wd, ws * stat.rgb + wd * dyn.rgb, ws * stat.ir + wd * dyn.ir};
}

}  // namespace torf
