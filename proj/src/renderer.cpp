// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/renderer.hpp"

#include "torf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace torf {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

std::vector<double> stratified_samples(const Ray& ray, int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("stratified_samples: need at least 2 samples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double width = (ray.t_far - ray.t_near) / n;
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = ray.t_near + (k + uniform(rng)) * width;
  return t;
}

std::vector<double> midpoint_samples(const Ray& ray, int n) {
  if (n < 2) throw std::invalid_argument("midpoint_samples: need at least 2 samples");
  const double width = (ray.t_far - ray.t_near) / n;
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = ray.t_near + (k + 0.5) * width;
  return t;
}

std::vector<double> sample_distances(const Ray& ray, const RenderOptions& opt, std::uint64_t seed) {
  return opt.stratified ? stratified_samples(ray, opt.n_samples, seed)
                        : midpoint_samples(ray, opt.n_samples);
}

RenderOutput composite(const RaySamples& rs, const ToFModel& model, const RenderOptions& opt) {
  RenderOutput out;
  double weight_sum = 0.0;
  double depth_sum = 0.0;
  const double eps2 = opt.min_range * opt.min_range;
  for (std::size_t k = 0; k < rs.t.size(); ++k) {
    const double tk = rs.transmittance[k];
    const BlendedSample& s = rs.blended[k];
    out.rgb += tk * s.rgb;
    const double falloff = 1.0 / std::max(rs.t[k] * rs.t[k], eps2);
    out.tof += (tk * tk * s.ir * falloff) * importance_weight(2.0 * rs.t[k], model);
    weight_sum += tk * s.alpha;
    depth_sum += tk * s.alpha * rs.t[k];
  }
  out.tof *= model.source_intensity;
  out.rgb += rs.transmittance.back() * opt.background;
  out.accumulated_opacity = std::clamp(weight_sum, 0.0, 1.0);
  out.expected_depth = weight_sum < opt.opacity_floor ? 0.0 : depth_sum / weight_sum;
  return out;
}

RenderMode parse_render_mode(const std::string& name) {
  if (name == "rgb") return RenderMode::kRgb;
  if (name == "tof") return RenderMode::kTof;
  if (name == "depth") return RenderMode::kDepth;
  throw std::invalid_argument("unknown render mode '" + name + "' (expected rgb|tof|depth)");
}

Image render_image(const Camera& cam, const RadianceFieldSet& fields, double tau,
                   const ToFModel& model, RenderMode mode, const RenderOptions& opt,
                   const ViewBounds& bounds, std::uint64_t frame) {
  const int w = cam.intrinsics.width;
  const int h = cam.intrinsics.height;
  const int channels = mode == RenderMode::kRgb ? 3 : mode == RenderMode::kTof ? 2 : 1;
  Image image(w, h, channels);
  parallel_for(static_cast<std::size_t>(w) * h, [&](std::size_t i) {
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    const Ray ray = generate_ray(cam, x, y, bounds.t_near, bounds.t_far);
    const RenderOutput r = render_ray(ray, fields, tau, model, opt, mix_seed(opt.seed, frame, i));
    switch (mode) {
      case RenderMode::kRgb:
        for (int c = 0; c < 3; ++c) image(x, y, c) = r.rgb[c];
        break;
      case RenderMode::kTof:
        image(x, y, 0) = r.tof.real();
        image(x, y, 1) = r.tof.imag();
        break;
      case RenderMode::kDepth:
        image(x, y, 0) = r.expected_depth;
        break;
    }
  });
  return image;
}

}  // namespace torf
