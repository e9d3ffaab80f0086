// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/scene_sim.hpp"

#include "torf/io.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

namespace torf {
namespace {

Primitive plane_at_z(double z, double ir = 1.0) {
  Primitive p;
  p.kind = PrimitiveKind::kPlane;
  p.point = Vec3(0.0, 0.0, z);
  p.normal = Vec3(0.0, 0.0, -1.0);
  p.material.rgb = Vec3(0.6, 0.5, 0.4);
  p.material.ir = ir;
  return p;
}

Primitive sphere(const Vec3& c, double r) {
  Primitive p;
  p.kind = PrimitiveKind::kSphere;
  p.center = c;
  p.radius = r;
  p.material.rgb = Vec3(0.9, 0.2, 0.2);
  p.material.ir = 0.8;
  return p;
}

Ray ray_from(const Vec3& o, const Vec3& d) { return Ray{o, d.normalized(), 0.1, 100.0}; }

CaptureConfig small_capture(int w, int h, std::vector<Pose> trajectory) {
  CaptureConfig cfg;
  cfg.rig = default_rig();
  cfg.rig.rgb = Intrinsics{w * 0.9, w * 0.9, w / 2.0, h / 2.0, w, h};
  cfg.rig.tof = cfg.rig.rgb;
  cfg.trajectory = std::move(trajectory);
  return cfg;
}

const Pose kFacingZ = look_at(Vec3::Zero(), Vec3(0.0, 0.0, 1.0));

TEST(TraceFirstHit, PerpendicularPlane) {
  AnalyticScene scene;
  scene.primitives.push_back(plane_at_z(2.0));
  const auto hit = trace_first_hit(scene, ray_from(Vec3::Zero(), Vec3::UnitZ()), 0.0);
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(hit->depth, 2.0, 1e-12);
  EXPECT_NEAR(hit->ir_energy, 0.25, 1e-12);
  EXPECT_NEAR((hit->rgb - Vec3(0.6, 0.5, 0.4)).norm(), 0.0, 1e-12);
}

TEST(TraceFirstHit, MissAndGrazing) {
  AnalyticScene scene;
  scene.primitives.push_back(plane_at_z(2.0));
  EXPECT_FALSE(trace_first_hit(scene, ray_from(Vec3::Zero(), -Vec3::UnitZ()), 0.0).has_value());
  const auto graze = trace_first_hit(scene, ray_from(Vec3::Zero(), Vec3(1.0, 0.0, 1e-4)), 0.0);
  ASSERT_TRUE(graze.has_value());
  EXPECT_LT(graze->ir_energy, 1e-10);
}

TEST(TraceFirstHit, NearestOfSphereAndBox) {
  AnalyticScene scene;
  scene.primitives.push_back(plane_at_z(5.0));
  scene.primitives.push_back(sphere(Vec3(0.0, 0.0, 3.0), 0.5));
  Primitive box;
  box.kind = PrimitiveKind::kBox;
  box.box_min = Vec3(-0.2, -0.2, 1.0);
  box.box_max = Vec3(0.2, 0.2, 1.5);
  scene.primitives.push_back(box);
  const auto hit = trace_first_hit(scene, ray_from(Vec3::Zero(), Vec3::UnitZ()), 0.0);
  ASSERT_TRUE(hit.has_value());
  EXPECT_NEAR(hit->depth, 1.0, 1e-12);
  EXPECT_EQ(hit->primitive, 2u);
  const auto past_box = trace_first_hit(scene, ray_from(Vec3(0.3, 0.0, 0.0), Vec3::UnitZ()), 0.0);
  ASSERT_TRUE(past_box.has_value());
  EXPECT_NEAR(past_box->depth, 3.0 - std::sqrt(0.25 - 0.09), 1e-12);
  // Inside a box the far wall is visible.
  AnalyticScene room;
  Primitive r;
  r.kind = PrimitiveKind::kBox;
  r.box_min = Vec3::Constant(-2.0);
  r.box_max = Vec3::Constant(2.0);
  room.primitives.push_back(r);
  const auto wall = trace_first_hit(room, ray_from(Vec3::Zero(), Vec3::UnitX()), 0.0);
  ASSERT_TRUE(wall.has_value());
  EXPECT_NEAR(wall->depth, 2.0, 1e-12);
  EXPECT_NEAR(wall->normal.dot(Vec3::UnitX()), -1.0, 1e-12);
}

TEST(TraceFirstHit, MotionFollowsKeys) {
  AnalyticScene scene;
  Primitive s = sphere(Vec3(0.0, 0.0, 3.0), 0.5);
  s.motion = {{0.0, Vec3::Zero()}, {1.0, Vec3(0.0, 0.0, 1.0)}};
  scene.primitives.push_back(s);
  for (double tau : {0.0, 0.25, 0.5, 1.0}) {
    const auto hit = trace_first_hit(scene, ray_from(Vec3::Zero(), Vec3::UnitZ()), tau);
    ASSERT_TRUE(hit.has_value());
    EXPECT_NEAR(hit->depth, 2.5 + tau, 1e-12);
  }
  EXPECT_EQ(s.offset_at(-1.0), Vec3::Zero());
  EXPECT_EQ(s.offset_at(3.0), Vec3(0.0, 0.0, 1.0));
}

TEST(Capture, WrapAroundBeyondRange) {
  AnalyticScene scene;
  scene.primitives.push_back(plane_at_z(6.5));
  CaptureConfig cfg = small_capture(5, 5, {kFacingZ});
  cfg.rig.tof_in_rgb = Pose{};
  const Frame f = capture_frame(scene, cfg, 0);
  const PhasorImage p = combine_quad(f.quad);
  const double d = phasor_to_depth(p(2, 2), cfg.rig.model).depth;
  EXPECT_NEAR(d, 1.5, 1e-6);
  EXPECT_NEAR(f.depth_gt(2, 2), 6.5, 1e-12);
}

TEST(Capture, ZeroNoiseDepthRoundTrip) {
  AnalyticScene scene;
  Primitive floor = plane_at_z(4.0);
  floor.normal = Vec3(0.0, -0.3, -1.0).normalized();
  scene.primitives.push_back(floor);
  scene.primitives.push_back(sphere(Vec3(0.3, 0.0, 2.2), 0.6));
  CaptureConfig cfg = small_capture(16, 12, {kFacingZ});
  const Frame f = capture_frame(scene, cfg, 0);
  const PhasorImage p = combine_quad(f.quad);
  const double range = cfg.rig.model.unambiguous_range();
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x) {
      const double gt = f.depth_gt(x, y);
      if (gt <= 0.0) continue;
      const double d = phasor_to_depth(p(x, y), cfg.rig.model).depth;
      const double err = std::abs(d - std::fmod(gt, range));
      EXPECT_LT(std::min(err, range - err), 1e-6);
    }
}

TEST(Capture, ZeroReflectivityMatchesPlainScene) {
  AnalyticScene scene;
  scene.primitives.push_back(plane_at_z(3.0));
  Primitive side = plane_at_z(0.0);
  side.point = Vec3(1.0, 0.0, 0.0);
  side.normal = Vec3(-1.0, 0.0, 0.0);
  scene.primitives.push_back(side);
  AnalyticScene mirror = scene;
  mirror.primitives[1].reflectivity = 0.0;
  const CaptureConfig cfg = small_capture(8, 6, {kFacingZ});
  const Frame a = capture_frame(scene, cfg, 0);
  const Frame b = capture_frame(mirror, cfg, 0);
  EXPECT_TRUE(std::equal(a.quad.exposures().data().begin(), a.quad.exposures().data().end(),
                         b.quad.exposures().data().begin()));
}

TEST(Capture, MirrorMixtureIsComplexSum) {
  AnalyticScene scene;
  Primitive mirror = plane_at_z(1.0, 0.2);
  mirror.normal = Vec3(0.0, 0.0, -1.0);
  mirror.reflectivity = 0.3;
  scene.primitives.push_back(mirror);
  // Wall behind the camera seen in the mirror.
  Primitive back = plane_at_z(-0.5, 0.9);
  back.normal = Vec3(0.0, 0.0, 1.0);
  scene.primitives.push_back(back);
  CaptureConfig cfg = small_capture(3, 3, {kFacingZ});
  cfg.rig.tof_in_rgb = Pose{};
  const Frame f = capture_frame(scene, cfg, 0);
  const Phasor p = combine_quad(f.quad)(1, 1);
  const ToFModel& m = cfg.rig.model;
  const double scale = cfg.rig.phasor_scale();
  // Oracle along the optical axis: direct at 1 m, virtual image at 1 + 1.5 m.
  const Phasor direct = 0.2 / 1.0 * std::polar(1.0, m.phase_per_meter() * 1.0);
  const Phasor virt = 0.9 / 6.25 * std::polar(1.0, m.phase_per_meter() * 2.5);
  const Phasor oracle = scale * (direct + 0.3 * virt);
  EXPECT_LT(std::abs(p - oracle) / std::abs(oracle), 1e-6);
  EXPECT_GT(phasor_to_depth(p, m).depth, 1.0);
}

TEST(Capture, FlyingPixelAtDepthEdge) {
  // Near plane covers x < 0, far plane behind it.
  AnalyticScene scene;
  Primitive nearp;
  nearp.kind = PrimitiveKind::kBox;
  nearp.box_min = Vec3(-5.0, -5.0, 1.5);
  nearp.box_max = Vec3(0.0, 5.0, 1.6);
  nearp.material.ir = 1.0;
  scene.primitives.push_back(nearp);
  scene.primitives.push_back(plane_at_z(3.0));
  // Identity pose so image x follows world x.
  CaptureConfig cfg = small_capture(4, 1, {Pose{}});
  cfg.rig.tof = Intrinsics{4.0, 4.0, 2.0, 0.5, 4, 1};
  cfg.rig.tof_in_rgb = Pose{};
  cfg.supersample = 4;
  // Pixel 2 spans camera-space slopes [0, 0.25); moving the camera 0.1 m to
  // -x puts the edge at slope 0.1 / 1.5, so one of four sub-rays per row hits
  // the near face.
  cfg.trajectory[0].translation = Vec3(-0.1, 0.0, 0.0);
  const Frame f = capture_frame(scene, cfg, 0);
  const PhasorImage p = combine_quad(f.quad);
  const ToFModel& m = cfg.rig.model;
  EXPECT_NEAR(phasor_to_depth(p(0, 0), m).depth, 1.5 * std::hypot(1.0, 0.25), 0.15);
  EXPECT_NEAR(phasor_to_depth(p(3, 0), m).depth, 3.0 * std::hypot(1.0, 0.3), 0.2);
  const double edge = phasor_to_depth(p(2, 0), m).depth;
  EXPECT_GT(edge, 1.6);
  EXPECT_LT(edge, 2.9);
  EXPECT_NEAR(f.depth_gt(2, 0), 3.0 * std::hypot(1.0, 0.125), 1e-9);
}

TEST(Capture, NoiseHurtsDimPixelsMore) {
  AnalyticScene scene;
  Primitive p = plane_at_z(2.5);
  p.material.ir = 1.0;
  p.material.checker_size = 0.15;
  p.material.ir_alt = 0.05;
  scene.primitives.push_back(p);
  CaptureConfig cfg = small_capture(24, 24, {kFacingZ});
  cfg.rig.tof_in_rgb = Pose{};
  cfg.noise_std = 0.02 * cfg.rig.phasor_scale() / 6.25;
  cfg.seed = 3;
  const Frame f = capture_frame(scene, cfg, 0);
  const PhasorImage ph = combine_quad(f.quad);
  std::vector<double> amp, err;
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) {
      amp.push_back(std::abs(ph(x, y)));
      const double d = phasor_to_depth(ph(x, y), cfg.rig.model).depth;
      err.push_back(std::abs(d - f.depth_gt(x, y)));
    }
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const std::vector<double> ra = ranks(amp), re = ranks(err);
  const double mean = (ra.size() - 1) / 2.0;
  double num = 0.0, da = 0.0, de = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - mean) * (re[i] - mean);
    da += (ra[i] - mean) * (ra[i] - mean);
    de += (re[i] - mean) * (re[i] - mean);
  }
  EXPECT_LT(num / std::sqrt(da * de), -0.2);
}

TEST(CaptureDataset, SingleFrameAndDeterminism) {
  AnalyticScene scene;
  scene.primitives.push_back(plane_at_z(3.0));
  scene.primitives.push_back(sphere(Vec3(0.0, 0.0, 2.0), 0.4));
  CaptureConfig cfg = small_capture(10, 8, {kFacingZ});
  cfg.noise_std = 1e-6;
  cfg.seed = 12;
  const Dataset a = capture_dataset(scene, cfg);
  const Dataset b = capture_dataset(scene, cfg);
  ASSERT_EQ(a.frames.size(), 1u);
  const auto& qa = a.frames[0].quad.exposures().data();
  const auto& qb = b.frames[0].quad.exposures().data();
  EXPECT_TRUE(std::equal(qa.begin(), qa.end(), qb.begin()));
  const Camera tof{cfg.rig.tof, cfg.rig.sensor_pose(kFacingZ, Sensor::kTof)};
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x) {
      const auto hit = trace_first_hit(scene, generate_ray(tof, x, y, 0.1, 10.0), 0.0);
      EXPECT_EQ(a.frames[0].depth_gt(x, y), hit ? hit->depth : 0.0);
    }
  cfg.seed = 13;
  const Dataset c = capture_dataset(scene, cfg);
  EXPECT_NE(c.frames[0].quad.at(0, 0, 0), a.frames[0].quad.at(0, 0, 0));
}

TEST(CaptureDataset, MovingSphereDepthFollowsPath) {
  AnalyticScene scene;
  Primitive s = sphere(Vec3(-0.4, 0.0, 2.0), 0.3);
  s.motion = {{0.0, Vec3::Zero()}, {1.0, Vec3(0.8, 0.0, 0.0)}};
  scene.primitives.push_back(s);
  CaptureConfig cfg = small_capture(9, 9, std::vector<Pose>(8, kFacingZ));
  cfg.rig.tof_in_rgb = Pose{};
  const Dataset d = capture_dataset(scene, cfg);
  ASSERT_EQ(d.frames.size(), 8u);
  const Camera tof{cfg.rig.tof, kFacingZ};
  for (std::size_t f = 0; f < 8; ++f) {
    EXPECT_DOUBLE_EQ(d.frames[f].tau, f / 7.0);
    const Vec3 c = Vec3(-0.4 + 0.8 * f / 7.0, 0.0, 2.0);
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x) {
        const Ray r = generate_ray(tof, x, y, 0.1, 10.0);
        const Vec3 oc = r.origin - c;
        const double b = oc.dot(r.direction);
        const double disc = b * b - (oc.squaredNorm() - 0.09);
        const double expected = disc >= 0.0 ? -b - std::sqrt(disc) : 0.0;
        EXPECT_NEAR(d.frames[f].depth_gt(x, y), expected, 1e-9);
      }
  }
}

TEST(CaptureDataset, DiskRoundTrip) {
  AnalyticScene scene;
  scene.primitives.push_back(plane_at_z(2.0));
  const CaptureConfig cfg = small_capture(6, 4, {kFacingZ, look_at(Vec3(0.2, 0, 0), Vec3(0, 0, 2))});
  const auto dir = std::filesystem::temp_directory_path() / "torf_sim_roundtrip";
  std::filesystem::remove_all(dir);
  const Dataset a = capture_dataset(scene, cfg, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "meta.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "frames" / "0001" / "tof_quad.pfm"));
  EXPECT_TRUE(std::filesystem::exists(dir / "frames" / "0001" / "poses.json"));
  const Dataset b = load_dataset(dir);
  ASSERT_EQ(b.frames.size(), 2u);
  for (std::size_t f = 0; f < 2; ++f) {
    EXPECT_EQ(a.frames[f].tau, b.frames[f].tau);
    // Stored as float32.
    for (std::size_t i = 0; i < a.frames[f].rgb.data().size(); ++i)
      EXPECT_EQ(static_cast<float>(a.frames[f].rgb.data()[i]), b.frames[f].rgb.data()[i]);
    EXPECT_NEAR((a.frames[f].rig_pose.rotation - b.frames[f].rig_pose.rotation).norm(), 0.0, 1e-12);
  }
  EXPECT_EQ(b.rig.model.mod_frequency, 30e6);
  EXPECT_NEAR(b.rig.tof_in_rgb.translation.x(), 0.041, 1e-15);
  std::filesystem::remove_all(dir);
}

TEST(SceneJson, RoundTripAndErrors) {
  const nlohmann::json j = nlohmann::json::parse(R"({
    "ambient": 0.8, "background": [0.1, 0.1, 0.2],
    "primitives": [
      {"type": "plane", "point": [0, 0, 3], "normal": [0, 0, -1],
       "material": {"rgb": [0.5, 0.5, 0.5], "ir": 0.7, "checker": {"size": 0.2, "rgb": [0, 0, 0], "ir": 0.1}}},
      {"type": "sphere", "center": [0, 0, 2], "radius": 0.3, "reflectivity": 0.2,
       "motion": [{"tau": 0, "offset": [0, 0, 0]}, {"tau": 1, "offset": [1, 0, 0]}]},
      {"type": "box", "min": [-1, -1, 1], "max": [1, 1, 4]}
    ]})");
  const AnalyticScene s = scene_from_json(j);
  ASSERT_EQ(s.primitives.size(), 3u);
  EXPECT_EQ(s.primitives[1].kind, PrimitiveKind::kSphere);
  EXPECT_EQ(s.primitives[1].reflectivity, 0.2);
  EXPECT_EQ(s.primitives[0].material.checker_size, 0.2);
  const AnalyticScene back = scene_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));

  EXPECT_THROW(scene_from_json(nlohmann::json::parse(R"({"primitives": []})")), FormatError);
  EXPECT_ANY_THROW(scene_from_json(nlohmann::json::parse(R"({"primitives": [{"type": "cone"}]})")));
  EXPECT_ANY_THROW(scene_from_json(
      nlohmann::json::parse(R"({"primitives": [{"type": "sphere", "center": [0,0,0], "radius": 1, "reflectivity": 2}]})")));
}

TEST(CaptureJson, LookAtTrajectoryAndRigOverrides) {
  const nlohmann::json j = nlohmann::json::parse(R"({
    "rig": {"intrinsics": {"tof": {"width": 8, "height": 6, "fx": 7, "fy": 7, "cx": 4, "cy": 3}}},
    "trajectory": [{"eye": [0, 0, -3], "target": [0, 0, 0]}],
    "noise_std": 0.5, "seed": 4, "supersample": 2})");
  const CaptureConfig cfg = capture_config_from_json(j);
  EXPECT_EQ(cfg.rig.tof.width, 8);
  EXPECT_EQ(cfg.rig.rgb.width, 320);
  EXPECT_EQ(cfg.noise_std, 0.5);
  EXPECT_EQ(cfg.supersample, 2);
  ASSERT_EQ(cfg.trajectory.size(), 1u);
  EXPECT_NEAR((cfg.trajectory[0].rotation.col(2) - Vec3::UnitZ()).norm(), 0.0, 1e-12);
  const CaptureConfig back = capture_config_from_json(to_json(cfg));
  EXPECT_EQ(back.rig.tof.width, 8);
  EXPECT_EQ(back.seed, 4u);
  EXPECT_ANY_THROW(capture_config_from_json(nlohmann::json::parse(R"({"trajectory": []})")));
}

TEST(DefaultRig, MatchesHardware) {
  const SensorRig r = default_rig();
  EXPECT_EQ(r.tof.width, 320);
  EXPECT_EQ(r.tof.height, 240);
  EXPECT_EQ(r.model.mod_frequency, 30e6);
  EXPECT_NEAR(r.tof_in_rgb.translation.norm(), 0.041, 1e-15);
}

TEST(LookAt, Orientation) {
  const Pose p = look_at(Vec3(1.0, 2.0, 3.0), Vec3(1.0, 2.0, 5.0));
  EXPECT_NO_THROW(p.validate());
  EXPECT_NEAR((p.rotation.col(2) - Vec3::UnitZ()).norm(), 0.0, 1e-12);
  EXPECT_NEAR((p.rotation.col(1) + Vec3::UnitY()).norm(), 0.0, 1e-12);
  EXPECT_EQ(p.translation, Vec3(1.0, 2.0, 3.0));
}

}  // namespace
}  // namespace torf
