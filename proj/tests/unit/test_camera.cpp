// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/camera.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace torf {
namespace {

Intrinsics small_intrinsics() { return Intrinsics{100.0, 100.0, 32.0, 24.0, 64, 48}; }

TEST(GenerateRay, PrincipalPointIsOpticalAxis) {
  const Camera cam{small_intrinsics(), Pose{}};
  // Pixel centers sit at +0.5, so pixel (31.5, 23.5) maps onto the principal point.
  const Ray r = generate_ray(cam, 31.5, 23.5, 0.1, 5.0);
  EXPECT_NEAR((r.direction - Vec3::UnitZ()).norm(), 0.0, 1e-15);
  EXPECT_EQ(r.origin, Vec3::Zero());
}

TEST(GenerateRay, OneFocalLengthOffCenterIs45Degrees) {
  Intrinsics in = small_intrinsics();
  in.fx = 20.0;
  const Camera cam{in, Pose{}};
  const Ray r = generate_ray(cam, 31.5 + 20.0, 23.5, 0.1, 5.0);
  EXPECT_NEAR(std::atan2(r.direction.x(), r.direction.z()), kPi / 4.0, 1e-12);
  EXPECT_NEAR(r.direction.y(), 0.0, 1e-15);
  EXPECT_NEAR(r.direction.norm(), 1.0, 1e-12);
}

TEST(GenerateRay, TranslationShiftsOriginOnly) {
  const Camera a{small_intrinsics(), Pose{}};
  const Camera b{small_intrinsics(), Pose{Mat3::Identity(), Vec3(1.0, -2.0, 0.5)}};
  const Ray ra = generate_ray(a, 10.0, 7.0, 0.1, 5.0);
  const Ray rb = generate_ray(b, 10.0, 7.0, 0.1, 5.0);
  EXPECT_EQ(ra.direction, rb.direction);
  EXPECT_EQ(rb.origin, Vec3(1.0, -2.0, 0.5));
}

TEST(GenerateRay, Errors) {
  const Camera cam{small_intrinsics(), Pose{}};
  EXPECT_THROW(generate_ray(cam, 64.0, 0.0, 0.1, 5.0), std::out_of_range);
  EXPECT_THROW(generate_ray(cam, -0.5, 0.0, 0.1, 5.0), std::out_of_range);
  EXPECT_THROW(generate_ray(cam, 1.0, 1.0, 5.0, 1.0), std::invalid_argument);
  Intrinsics bad = small_intrinsics();
  bad.fx = 0.0;
  EXPECT_THROW(generate_ray(Camera{bad, Pose{}}, 1.0, 1.0, 0.1, 5.0), std::invalid_argument);
}

TEST(Pose, ComposeInverseAndValidate) {
  const Pose p{so3_exp(Vec3(0.3, -0.2, 0.9)), Vec3(1.0, 2.0, 3.0)};
  const Pose id = p.compose(p.inverse());
  EXPECT_NEAR((id.rotation - Mat3::Identity()).norm(), 0.0, 1e-12);
  EXPECT_NEAR(id.translation.norm(), 0.0, 1e-12);
  EXPECT_NO_THROW(p.validate());
  Pose bad = p;
  bad.rotation(0, 0) += 1e-3;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  Pose mirrored;
  mirrored.rotation = -Mat3::Identity();
  EXPECT_THROW(mirrored.validate(), std::invalid_argument);
}

TEST(SO3, ExpLogRoundTrip) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Vec3 w(n(rng), n(rng), n(rng));
    w = renormalize_axis_angle(w);
    ASSERT_LT(w.norm(), kPi);
    const Vec3 back = so3_log(so3_exp(w));
    EXPECT_NEAR((back - w).norm(), 0.0, 1e-9);
  }
  EXPECT_NEAR((so3_log(Mat3::Identity())).norm(), 0.0, 1e-15);
}

TEST(SO3, RenormalizeKeepsRotation) {
  const Vec3 big = Vec3(0.0, 0.0, 1.0) * (kPi + 0.4);
  const Vec3 small = renormalize_axis_angle(big);
  EXPECT_LT(small.norm(), kPi);
  EXPECT_NEAR((so3_exp(big) - so3_exp(small)).norm(), 0.0, 1e-12);
  const Vec3 huge = Vec3(1.0, 2.0, -1.0).normalized() * 11.0;
  EXPECT_LT(renormalize_axis_angle(huge).norm(), kPi);
  EXPECT_NEAR((so3_exp(huge) - so3_exp(renormalize_axis_angle(huge))).norm(), 0.0, 1e-12);
}

TEST(SO3, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Vec3 w = Vec3(n(rng), n(rng), n(rng));
    if (trial == 0) w = Vec3::Zero();
    if (trial == 1) w = Vec3(1e-9, -2e-9, 0.0);
    const auto jac = so3_exp_jacobian(w);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
      Vec3 e = Vec3::Zero();
      e[i] = h;
      const Mat3 numeric = (so3_exp(w + e) - so3_exp(w - e)) / (2.0 * h);
      EXPECT_NEAR((jac[i] - numeric).norm(), 0.0, 1e-7) << "trial " << trial;
    }
  }
}

TEST(SO3, RotationAngleBetween) {
  const Mat3 a = so3_exp(Vec3(0.1, 0.2, 0.3));
  const Mat3 b = a * so3_exp(Vec3(0.0, 0.05, 0.0));
  EXPECT_NEAR(rotation_angle_between(a, b), 0.05, 1e-10);
  EXPECT_NEAR(rotation_angle_between(a, a), 0.0, 1e-7);
}

}  // namespace
}  // namespace torf
