// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "torf/types.hpp"

#include <array>

namespace torf {

// Pinhole intrinsics in pixels. Camera space is x right, y down, z forward.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  int width = 1;
  int height = 1;

  void validate() const;
};

// Rigid camera-to-world transform.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Pose compose(const Pose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  Pose inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
  void validate() const;
};

struct Camera {
  Intrinsics intrinsics;
  Pose pose;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit length
  double t_near = 0.1;
  double t_far = 10.0;

  Vec3 at(double t) const { return origin + t * direction; }
  void validate() const;
};

// Unit camera-space direction through pixel (px + 0.5, py + 0.5).
Vec3 camera_direction(const Intrinsics& in, double px, double py);

// Backprojects pixel (px, py) through its center. Throws std::out_of_range
// for pixels outside the image and std::invalid_argument for bad intrinsics.
Ray generate_ray(const Camera& cam, double px, double py, double t_near, double t_far);

// Rotation helpers on axis-angle vectors.
Mat3 skew(const Vec3& v);
Mat3 so3_exp(const Vec3& axis_angle);
Vec3 so3_log(const Mat3& rotation);
// d exp(w) / d w_i for i = 0, 1, 2.
std::array<Mat3, 3> so3_exp_jacobian(const Vec3& axis_angle);
// Maps an axis-angle vector with norm >= pi onto the equivalent one with norm < pi.
Vec3 renormalize_axis_angle(const Vec3& axis_angle);

// Angle of the relative rotation in radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);

}  // namespace torf
