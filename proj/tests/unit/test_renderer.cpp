// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"
#include "torf/renderer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace torf {
namespace {

using testing::axis_ray;
using testing::Slab;
using testing::SlabSource;

constexpr double kOpaque = 1e4;

ToFModel mhz30(double offset = 0.0) { return ToFModel{30e6, 3e8, offset, 1.0}; }

RenderOptions midpoint(int n) {
  RenderOptions opt;
  opt.n_samples = n;
  opt.stratified = false;
  return opt;
}

TEST(Sampling, StratifiedBinsAndDeterminism) {
  const Ray r = axis_ray(1.0, 3.0);
  const std::vector<double> t = stratified_samples(r, 2, 42);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_GE(t[0], 1.0);
  EXPECT_LT(t[0], 2.0);
  EXPECT_GE(t[1], 2.0);
  EXPECT_LT(t[1], 3.0);
  EXPECT_EQ(stratified_samples(r, 64, 7), stratified_samples(r, 64, 7));
  EXPECT_NE(stratified_samples(r, 64, 7), stratified_samples(r, 64, 8));
  const std::vector<double> many = stratified_samples(r, 200, 3);
  for (std::size_t k = 1; k < many.size(); ++k) EXPECT_GT(many[k], many[k - 1]);
  EXPECT_THROW(stratified_samples(r, 1, 0), std::invalid_argument);
}

TEST(Sampling, MidpointNodes) {
  const std::vector<double> t = midpoint_samples(axis_ray(1.0, 3.0), 4);
  EXPECT_EQ(t, (std::vector<double>{1.25, 1.75, 2.25, 2.75}));
}

TEST(RenderRgb, EmptyVolumeGivesBackground) {
  const SlabSource empty;
  RenderOptions opt = midpoint(32);
  EXPECT_EQ(render_rgb(axis_ray(0.1, 5.0), empty, 0.0, opt), Vec3::Zero());
  opt.background = Vec3(0.2, 0.3, 0.4);
  EXPECT_EQ(render_rgb(axis_ray(0.1, 5.0), empty, 0.0, opt), Vec3(0.2, 0.3, 0.4));
  EXPECT_EQ(render_tof(axis_ray(0.1, 5.0), empty, 0.0, mhz30(), opt), Phasor{});
  EXPECT_EQ(expected_depth(axis_ray(0.1, 5.0), empty, 0.0, opt), 0.0);
}

TEST(RenderRgb, OpaqueSampleGivesItsRadiance) {
  const SlabSource s{{Slab{2.0, 100.0, kOpaque, Vec3(0.3, 0.6, 0.9), 0.0}}};
  const Vec3 c = render_rgb(axis_ray(0.5, 4.0), s, 0.0, midpoint(64));
  EXPECT_NEAR((c - Vec3(0.3, 0.6, 0.9)).norm(), 0.0, 1e-12);
}

TEST(RenderRgb, TwoLayerCompositing) {
  const Vec3 a(1.0, 0.0, 0.5), b(0.0, 1.0, 0.25);
  // Samples at t = 1 and 2 with unit spacing: alpha_1 = 0.5, alpha_2 ~ 1.
  const SlabSource s{{Slab{0.5, 1.5, std::log(2.0), a, 0.0}, Slab{1.5, 10.0, 50.0, b, 0.0}}};
  const Ray ray = axis_ray(0.5, 3.0);
  const std::vector<double> t{1.0, 2.0};
  const RaySamples rs = march(ray, s, 0.0, t);
  EXPECT_NEAR(rs.blended[0].alpha, 0.5, 1e-15);
  EXPECT_NEAR(rs.transmittance[1], 0.5, 1e-15);
  const RenderOutput out = composite(rs, mhz30(), RenderOptions{});
  EXPECT_NEAR((out.rgb - (0.5 * a + 0.5 * b)).norm(), 0.0, 1e-12);
}

TEST(RenderTof, SingleOpaqueSurface) {
  const double r = 2.2;
  const SlabSource s{{Slab{r, 100.0, kOpaque, Vec3::Zero(), 1.0}}};
  const Ray ray = axis_ray(1.0, 4.0);
  const std::vector<double> t{r - 0.3, r, r + 0.3};
  const ToFModel m = mhz30(0.4);
  const Phasor p = composite(march(ray, s, 0.0, t), m, RenderOptions{}).tof;
  const Phasor oracle = std::polar(1.0 / (r * r), m.phase_per_meter() * r + 0.4);
  EXPECT_NEAR(std::abs(p - oracle) / std::abs(oracle), 0.0, 1e-12);
}

TEST(RenderTof, SplitPixelIsComplexSum) {
  // Half of a pixel's rays see a surface at 1.2 m, half at 3.1 m.
  const ToFModel m = mhz30();
  const SlabSource near{{Slab{1.2, 100.0, kOpaque, Vec3::Zero(), 1.0}}};
  const SlabSource far{{Slab{3.1, 100.0, kOpaque, Vec3::Zero(), 1.0}}};
  const Ray ray = axis_ray(0.5, 4.0);
  const RenderOptions opt = midpoint(700);
  const Phasor pn = render_tof(ray, near, 0.0, m, opt);
  const Phasor pf = render_tof(ray, far, 0.0, m, opt);
  const Phasor mixed = 0.5 * (pn + pf);
  const Phasor oracle =
      0.5 * (std::polar(1.0 / (1.2 * 1.2), m.phase_per_meter() * 1.2) +
             std::polar(1.0 / (3.1 * 3.1), m.phase_per_meter() * 3.1));
  EXPECT_LT(std::abs(mixed - oracle) / std::abs(oracle), 0.01);
  const double d = phasor_to_depth(mixed, m).depth;
  EXPECT_GT(std::abs(d - 1.2), 0.05);
  EXPECT_GT(std::abs(d - 3.1), 0.05);
}

TEST(ExpectedDepth, Examples) {
  const SlabSource opaque{{Slab{2.0, 100.0, kOpaque, Vec3::Ones(), 0.0}}};
  const RenderOptions opt = midpoint(64);
  const Ray ray = axis_ray(0.5, 4.0);
  const double spacing = (4.0 - 0.5) / 64;
  EXPECT_NEAR(expected_depth(ray, opaque, 0.0, opt), 2.0, spacing);

  // Two half-opaque surfaces at 1 and 3: weights 0.5 and 0.25.
  const SlabSource two{{Slab{0.9, 1.1, std::log(2.0) / 0.2, Vec3::Ones(), 0.0},
                        Slab{2.9, 3.1, std::log(2.0) / 0.2, Vec3::Ones(), 0.0}}};
  const std::vector<double> t{0.5, 0.9, 1.1, 2.9, 3.1};
  const RenderOutput out = composite(march(axis_ray(0.5, 3.5), two, 0.0, t), mhz30(), RenderOptions{});
  EXPECT_NEAR(out.expected_depth, (0.5 * 0.9 + 0.25 * 2.9) / 0.75, 1e-12);
  EXPECT_NEAR(out.accumulated_opacity, 0.75, 1e-12);
}

TEST(Renderer, TransmittanceMonotone) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  SlabSource s;
  for (int i = 0; i < 6; ++i) {
    const double z = u(rng);
    s.slabs.push_back(Slab{z, z + 0.3, u(rng), Vec3::Ones(), 1.0});
  }
  const Ray ray = axis_ray(0.1, 4.0);
  const RaySamples rs = march(ray, s, 0.0, stratified_samples(ray, 128, 5));
  EXPECT_EQ(rs.transmittance.front(), 1.0);
  for (std::size_t k = 1; k < rs.transmittance.size(); ++k) {
    EXPECT_LE(rs.transmittance[k], rs.transmittance[k - 1]);
    EXPECT_GE(rs.transmittance[k], 0.0);
  }
}

TEST(Renderer, SlabAttenuatesColorOnceAndToFTwice) {
  // Slab over [1, 2) with optical depth ln 2 in front of an opaque surface at 3.
  const Slab slab{1.0, 2.0, std::log(2.0), Vec3::Zero(), 0.0};
  const Slab wall{3.0, 100.0, kOpaque, Vec3(0.8, 0.8, 0.8), 1.0};
  const SlabSource with{{slab, wall}};
  const SlabSource without{{wall}};
  const Ray ray = axis_ray(0.5, 4.0);
  const RenderOptions opt = midpoint(350);
  const ToFModel m = mhz30();
  const double rgb_ratio = render_rgb(ray, with, 0.0, opt).x() / render_rgb(ray, without, 0.0, opt).x();
  const double tof_ratio =
      std::abs(render_tof(ray, with, 0.0, m, opt)) / std::abs(render_tof(ray, without, 0.0, m, opt));
  EXPECT_NEAR(rgb_ratio, 0.5, 0.01);
  EXPECT_NEAR(tof_ratio, 0.25, 0.005);
}

TEST(Renderer, InverseSquareFalloff) {
  const Ray ray = axis_ray(0.5, 8.0);
  const RenderOptions opt = midpoint(600);
  const ToFModel m = mhz30();
  const SlabSource near{{Slab{1.5, 100.0, kOpaque, Vec3::Zero(), 1.0}}};
  const SlabSource far{{Slab{3.0, 100.0, kOpaque, Vec3::Zero(), 1.0}}};
  const double ratio = std::abs(render_tof(ray, near, 0.0, m, opt)) / std::abs(render_tof(ray, far, 0.0, m, opt));
  EXPECT_NEAR(ratio, 4.0, 0.04);
}

TEST(Renderer, PhaseMatchesImportanceWeightAt512) {
  const ToFModel m = mhz30(0.25);
  for (double d : {0.7, 1.9, 3.3, 4.6}) {
    const SlabSource s{{Slab{d, 100.0, kOpaque, Vec3::Zero(), 1.0}}};
    const Ray ray = axis_ray(d - 0.2, d + 0.2);
    const Phasor p = render_tof(ray, s, 0.0, m, midpoint(512));
    const double diff = std::arg(p / importance_weight(2.0 * d, m));
    EXPECT_LT(std::abs(diff), 1e-3) << "depth " << d;
  }
}

TEST(Renderer, QuadratureConvergesAtFirstOrder) {
  // Smooth gaussian density bump; color is constant so rgb = 1 - exp(-tau).
  struct Bump {
    SamplePair sample_pair(const Vec3& x, double) const {
      SamplePair out;
      out.stat.sigma = 2.0 * std::exp(-std::pow((x.z() - 2.0) / 0.4, 2));
      out.stat.rgb = Vec3::Ones();
      return out;
    }
  };
  const Ray ray = axis_ray(0.5, 3.5);
  const double ref = render_rgb(ray, Bump{}, 0.0, midpoint(4096)).x();
  double prev = 0.0;
  for (int n : {64, 128, 256, 512}) {
    const double err = std::abs(render_rgb(ray, Bump{}, 0.0, midpoint(n)).x() - ref);
    if (n > 64) {
      EXPECT_GT(err / prev, 0.35) << n;
      EXPECT_LT(err / prev, 0.65) << n;
    }
    prev = err;
  }
}

RadianceFieldSet random_dynamic_fields(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  RadianceFieldSet f{StaticField({6, 6, 6}, Vec3::Constant(-1.0), Vec3::Constant(1.0)),
                     DynamicField({6, 6, 6}, 4, Vec3::Constant(-1.0), Vec3::Constant(1.0)), true};
  for (double& v : f.stat.grid().params()) v = n(rng);
  for (double& v : f.dyn->grid().params()) v = n(rng);
  for (double& v : f.dyn->grid().channel(kBlend)) v = -1000.0;
  return f;
}

TEST(Renderer, ZeroBlendIsBitIdenticalToStatic) {
  RadianceFieldSet fields = random_dynamic_fields(3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const ToFModel m = mhz30(0.2);
  RenderOptions opt;
  opt.n_samples = 48;
  opt.background = Vec3(0.1, 0.1, 0.1);
  for (int i = 0; i < 100; ++i) {
    Ray ray;
    ray.direction = Vec3(n(rng), n(rng), n(rng)).normalized();
    ray.origin = -2.5 * ray.direction + 0.3 * Vec3(n(rng), n(rng), n(rng));
    ray.t_near = 0.5;
    ray.t_far = 4.5;
    const double tau = std::abs(n(rng)) / 3.0;
    fields.use_dynamic = true;
    const RenderOutput a = render_ray(ray, fields, tau, m, opt, i);
    fields.use_dynamic = false;
    const RenderOutput b = render_ray(ray, fields, tau, m, opt, i);
    EXPECT_EQ(a.rgb, b.rgb);
    EXPECT_EQ(a.tof, b.tof);
    EXPECT_EQ(a.expected_depth, b.expected_depth);
  }
}

TEST(RenderImage, SinglePixelAndDeterminism) {
  const RadianceFieldSet fields = random_dynamic_fields(9);
  const Camera cam{Intrinsics{4.0, 4.0, 2.0, 1.5, 4, 3}, Pose{Mat3::Identity(), Vec3(0.0, 0.0, -2.5)}};
  const ToFModel m = mhz30();
  RenderOptions opt;
  opt.n_samples = 32;
  opt.seed = 17;
  const ViewBounds vb{0.5, 4.5};
  const Image a = render_image(cam, fields, 0.3, m, RenderMode::kTof, opt, vb, 2);
  const Image b = render_image(cam, fields, 0.3, m, RenderMode::kTof, opt, vb, 2);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  EXPECT_EQ(a.channels(), 2);

  const Ray ray = generate_ray(cam, 3, 1, vb.t_near, vb.t_far);
  const RenderOutput r = render_ray(ray, fields, 0.3, m, opt, mix_seed(17, 2, 1 * 4 + 3));
  EXPECT_EQ(a(3, 1, 0), r.tof.real());
  EXPECT_EQ(a(3, 1, 1), r.tof.imag());

  const Camera one{Intrinsics{4.0, 4.0, 0.5, 0.5, 1, 1}, cam.pose};
  const Image d = render_image(one, fields, 0.3, m, RenderMode::kDepth, opt, vb, 0);
  const Ray center = generate_ray(one, 0, 0, vb.t_near, vb.t_far);
  EXPECT_EQ(d(0, 0), render_ray(center, fields, 0.3, m, opt, mix_seed(17, 0, 0)).expected_depth);
}

TEST(RenderImage, EmptyVolumeIsZero) {
  RadianceFieldSet fields{StaticField({2, 2, 2}, Vec3::Constant(-1.0), Vec3::Constant(1.0)), std::nullopt, true};
  for (double& v : fields.stat.grid().channel(kDensity)) v = -1000.0;
  const Camera cam{Intrinsics{3.0, 3.0, 1.5, 1.5, 3, 3}, Pose{Mat3::Identity(), Vec3(0.0, 0.0, -2.0)}};
  for (RenderMode mode : {RenderMode::kRgb, RenderMode::kTof, RenderMode::kDepth}) {
    const Image img = render_image(cam, fields, 0.0, mhz30(), mode, RenderOptions{}, ViewBounds{0.5, 4.0});
    for (double v : img.data()) EXPECT_EQ(v, 0.0);
  }
  EXPECT_THROW(parse_render_mode("normals"), std::invalid_argument);
}

}  // namespace
}  // namespace torf
