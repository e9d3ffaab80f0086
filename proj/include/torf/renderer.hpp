// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

// Quadrature volume rendering of RGB radiance and C-ToF phasors.
//
// Samples t_0 < ... < t_{n-1} along a ray get spacings
//   delta_k = t_{k+1} - t_k,  delta_{n-1} = t_far - t_{n-1},
// blended opacities alpha_k and premultiplied radiance C_k / intensity J_k.
// With T_k = prod_{j<k} (1 - alpha_j):
//   rgb = sum_k T_k C_k + T_n * background
//   tof = I * sum_k T_k^2 J_k W(2 t_k) / max(t_k^2, eps^2)
// The ToF sum uses the squared transmittance because the active light crosses
// the volume twice; the sensor and the source share the ray origin.

#pragma once

#include "torf/camera.hpp"
#include "torf/fields.hpp"
#include "torf/tof_model.hpp"
#include "torf/types.hpp"

#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace torf {

template <class F>
concept RadianceSource = requires(const F& f, const Vec3& x, double tau) {
  { f.sample_pair(x, tau) } -> std::convertible_to<SamplePair>;
};

struct RenderOptions {
  int n_samples = 64;
  bool stratified = true;  // false: bin midpoints
  std::uint64_t seed = 0;
  Vec3 background = Vec3::Zero();
  double min_range = 1e-3;      // inverse-square clamp radius
  double opacity_floor = 1e-6;  // expected depth is 0 below this
};

// splitmix64-based seed combination for per-ray generators.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

// One uniform draw in each of n equal bins of [t_near, t_far].
std::vector<double> stratified_samples(const Ray& ray, int n, std::uint64_t seed);
std::vector<double> midpoint_samples(const Ray& ray, int n);
std::vector<double> sample_distances(const Ray& ray, const RenderOptions& opt, std::uint64_t seed);

struct RaySamples {
  std::vector<double> t;
  std::vector<double> delta;
  std::vector<BlendedSample> blended;
  std::vector<double> transmittance;  // T_k before sample k; size n + 1
};

struct RenderOutput {
  Vec3 rgb = Vec3::Zero();
  Phasor tof{};
  double expected_depth = 0.0;
  double accumulated_opacity = 0.0;
};

inline std::vector<double> sample_spacings(const Ray& ray, std::span<const double> t) {
  std::vector<double> delta(t.size());
  for (std::size_t k = 0; k < t.size(); ++k)
    delta[k] = (k + 1 < t.size() ? t[k + 1] : ray.t_far) - t[k];
  return delta;
}

template <RadianceSource Source>
RaySamples march(const Ray& ray, const Source& source, double tau, std::span<const double> t) {
  RaySamples rs;
  rs.t.assign(t.begin(), t.end());
  rs.delta = sample_spacings(ray, t);
  rs.blended.resize(t.size());
  rs.transmittance.resize(t.size() + 1);
  rs.transmittance[0] = 1.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const SamplePair pair = source.sample_pair(ray.at(t[k]), tau);
    rs.blended[k] = pair.dyn ? blend_samples(pair.stat, *pair.dyn, rs.delta[k])
                             : static_sample(pair.stat, rs.delta[k]);
    rs.transmittance[k + 1] = rs.transmittance[k] * (1.0 - rs.blended[k].alpha);
  }
  return rs;
}

RenderOutput composite(const RaySamples& rs, const ToFModel& model, const RenderOptions& opt);

template <RadianceSource Source>
RenderOutput render_ray(const Ray& ray, const Source& source, double tau, const ToFModel& model,
                        const RenderOptions& opt, std::uint64_t ray_seed) {
  const std::vector<double> t = sample_distances(ray, opt, ray_seed);
  return composite(march(ray, source, tau, t), model, opt);
}

template <RadianceSource Source>
Vec3 render_rgb(const Ray& ray, const Source& source, double tau, const RenderOptions& opt = {},
                std::uint64_t ray_seed = 0) {
  return render_ray(ray, source, tau, ToFModel{}, opt, ray_seed).rgb;
}

template <RadianceSource Source>
Phasor render_tof(const Ray& ray, const Source& source, double tau, const ToFModel& model,
                  const RenderOptions& opt = {}, std::uint64_t ray_seed = 0) {
  return render_ray(ray, source, tau, model, opt, ray_seed).tof;
}

template <RadianceSource Source>
double expected_depth(const Ray& ray, const Source& source, double tau,
                      const RenderOptions& opt = {}, std::uint64_t ray_seed = 0) {
  return render_ray(ray, source, tau, ToFModel{}, opt, ray_seed).expected_depth;
}

enum class RenderMode { kRgb, kTof, kDepth };

RenderMode parse_render_mode(const std::string& name);

struct ViewBounds {
  double t_near = 0.1;
  double t_far = 10.0;
};

// Renders every pixel of `cam`. Output channels: rgb 3, tof 2 (re, im), depth 1.
// Pixel (x, y) uses generator seed mix_seed(opt.seed, frame, y * width + x).
Image render_image(const Camera& cam, const RadianceFieldSet& fields, double tau,
                   const ToFModel& model, RenderMode mode, const RenderOptions& opt,
                   const ViewBounds& bounds, std::uint64_t frame = 0);

}  // namespace torf
