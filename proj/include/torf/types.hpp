// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace torf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Complex C-ToF radiance. Real and imaginary parts carry radiance units.
using Phasor = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Dense multi-channel image, row-major, channels interleaved.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels <= 0)
      throw std::invalid_argument("Image: invalid dimensions");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  double& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  double operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

class PhasorImage {
 public:
  PhasorImage() = default;
  PhasorImage(int width, int height) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw std::invalid_argument("PhasorImage: invalid dimensions");
    data_.assign(static_cast<std::size_t>(width) * height, Phasor{});
  }

  int width() const { return width_; }
  int height() const { return height_; }

  Phasor& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  Phasor operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<Phasor> data() { return data_; }
  std::span<const Phasor> data() const { return data_; }

  // Two channels (re, im).
  Image to_image() const;
  static PhasorImage from_image(const Image& image);

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Phasor> data_;
};

}  // namespace torf
