// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/camera.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace torf {

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
    throw std::invalid_argument("Intrinsics: focal lengths must be positive");
  if (width < 1 || height < 1) throw std::invalid_argument("Intrinsics: empty image");
  if (!std::isfinite(cx) || !std::isfinite(cy))
    throw std::invalid_argument("Intrinsics: principal point must be finite");
}

void Pose::validate() const {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho < 1e-8) || !(std::abs(rotation.determinant() - 1.0) < 1e-8))
    throw std::invalid_argument("Pose: rotation is not a proper orthonormal matrix");
  if (!translation.allFinite()) throw std::invalid_argument("Pose: translation must be finite");
}

void Ray::validate() const {
  if (!(std::abs(direction.norm() - 1.0) < 1e-8))
    throw std::invalid_argument("Ray: direction must be unit length");
  if (!(t_near > 0.0 && t_near < t_far)) throw std::invalid_argument("Ray: need 0 < t_near < t_far");
}

Vec3 camera_direction(const Intrinsics& in, double px, double py) {
  return Vec3((px + 0.5 - in.cx) / in.fx, (py + 0.5 - in.cy) / in.fy, 1.0).normalized();
}

Ray generate_ray(const Camera& cam, double px, double py, double t_near, double t_far) {
  cam.intrinsics.validate();
  if (!(px >= 0.0 && px < cam.intrinsics.width && py >= 0.0 && py < cam.intrinsics.height))
    throw std::out_of_range("generate_ray: pixel outside the image");
  Ray ray;
  ray.origin = cam.pose.translation;
  // Same arithmetic as the optimizer so renders and loss evaluation agree bitwise.
  ray.direction = cam.pose.rotation * camera_direction(cam.intrinsics, px, py);
  ray.t_near = t_near;
  ray.t_far = t_far;
  ray.validate();
  return ray;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(w);
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

Vec3 so3_log(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

std::array<Mat3, 3> so3_exp_jacobian(const Vec3& w) {
  std::array<Mat3, 3> out;
  const double theta2 = w.squaredNorm();
  if (theta2 < 1e-16) {
    for (int i = 0; i < 3; ++i) out[i] = skew(Vec3::Unit(i));
    return out;
  }
  // Closed form for dR/dw_i of R = exp([w]x):
  //   (w_i [w]x + [w x ((I - R) e_i)]x) R / |w|^2
  const Mat3 r = so3_exp(w);
  const Mat3 wx = skew(w);
  for (int i = 0; i < 3; ++i) {
    const Vec3 ei = Vec3::Unit(i);
    out[i] = (w[i] * wx + skew(w.cross((Mat3::Identity() - r) * ei))) * r / theta2;
  }
  return out;
}

Vec3 renormalize_axis_angle(const Vec3& w) {
  const double theta = w.norm();
  if (theta < kPi) return w;
  // Same rotation, angle folded into (-pi, pi].
  const double folded = std::remainder(theta, kTwoPi);
  Vec3 out = w * (folded / theta);
  if (out.norm() >= kPi) out *= (kPi - 1e-9) / out.norm();
  return out;
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a.transpose() * b;
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace torf
