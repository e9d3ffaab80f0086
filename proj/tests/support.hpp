// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

// Randomized small problems shared by unit and acceptance tests.

#pragma once

#include "torf/optimizer.hpp"
#include "torf/scene_sim.hpp"

#include <random>
#include <vector>

namespace torf::testing {

// Axis-aligned slabs along z with constant density, color and IR intensity.
// Rays along +z from the origin see each slab over [z0, z1).
struct Slab {
  double z0 = 0.0;
  double z1 = 0.0;
  double sigma = 0.0;
  Vec3 rgb = Vec3::Zero();
  double ir = 0.0;
};

struct SlabSource {
  std::vector<Slab> slabs;
  SamplePair sample_pair(const Vec3& x, double) const {
    SamplePair out;
    for (const Slab& s : slabs)
      if (x.z() >= s.z0 && x.z() < s.z1) {
        out.stat.sigma += s.sigma;
        out.stat.rgb = s.rgb;
        out.stat.ir = s.ir;
      }
    return out;
  }
};

inline Ray axis_ray(double t_near, double t_far) {
  Ray r;
  r.origin = Vec3::Zero();
  r.direction = Vec3::UnitZ();
  r.t_near = t_near;
  r.t_far = t_far;
  return r;
}

struct SmallProblem {
  RadianceFieldSet fields;
  PoseParams poses;
  SensorRig rig;
  std::vector<RayQuery> batch;
  LossWeights weights;
  RenderOptions opt;
};

// 8^3 grids on [-1, 1]^3 (dynamic with 3 time steps), two frames looking at
// the origin, `rays` rays alternating color / ToF, 16 stratified samples.
inline SmallProblem random_problem(std::uint64_t seed, int rays = 4, bool dynamic = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  SmallProblem p;
  const Vec3 lo = Vec3::Constant(-1.0);
  const Vec3 hi = Vec3::Constant(1.0);
  p.fields.stat = StaticField({8, 8, 8}, lo, hi);
  if (dynamic) p.fields.dyn = DynamicField({8, 8, 8}, 3, lo, hi);
  auto randomize = [&](VoxelGrid& g) {
    const std::size_t nv = g.voxel_count();
    for (int c = 0; c < g.channels(); ++c)
      for (std::size_t v = 0; v < nv; ++v)
        g.at(c, v) = c == kDensity ? -2.0 + normal(rng) : normal(rng);
  };
  randomize(p.fields.stat.grid());
  if (dynamic) randomize(p.fields.dyn->grid());

  p.rig.rgb = Intrinsics{8.0, 8.0, 4.0, 4.0, 8, 8};
  p.rig.tof = Intrinsics{7.0, 7.0, 3.5, 3.5, 7, 7};
  p.rig.tof_in_rgb = Pose{so3_exp(Vec3(0.02, -0.03, 0.01) + 0.01 * Vec3(normal(rng), normal(rng), normal(rng))),
                          Vec3(0.041, 0.002, -0.003)};
  p.rig.model.mod_frequency = 30e6;
  p.rig.model.zero_phase_offset = 0.3;
  p.rig.t_near = 1.0;
  p.rig.t_far = 4.5;

  std::vector<Pose> poses;
  for (int f = 0; f < 2; ++f) {
    const Vec3 dir = Vec3(normal(rng), normal(rng), normal(rng)).normalized();
    const Vec3 jitter = 0.1 * Vec3(normal(rng), normal(rng), normal(rng));
    poses.push_back(look_at(2.6 * dir, jitter, Vec3::UnitY() + 0.2 * Vec3(normal(rng), 0.0, normal(rng))));
  }
  p.poses = PoseParams::from_poses(poses, p.rig.tof_in_rgb);

  for (int i = 0; i < rays; ++i) {
    RayQuery q;
    q.frame = static_cast<std::size_t>(i % 2);
    q.sensor = (i / 2) % 2 == 0 ? Sensor::kRgb : Sensor::kTof;
    q.kind = q.sensor == Sensor::kRgb ? Supervision::kRgb : Supervision::kTof;
    const Intrinsics& in = p.rig.intrinsics(q.sensor);
    q.px = std::floor(uni(rng) * in.width);
    q.py = std::floor(uni(rng) * in.height);
    q.tau = uni(rng);
    q.seed = rng();
    q.rgb = Vec3(uni(rng), uni(rng), uni(rng));
    q.phasor = Phasor(0.05 * normal(rng), 0.05 * normal(rng));
    q.depth = 1.5 + uni(rng);
    p.batch.push_back(q);
  }
  p.weights = LossWeights{0.7, 1.3, 2.0, 0.5};
  p.opt.n_samples = 16;
  p.opt.stratified = true;
  p.opt.background = Vec3(0.1, 0.2, 0.3);
  return p;
}

}  // namespace torf::testing
