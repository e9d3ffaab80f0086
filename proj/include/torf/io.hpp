// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

// File codecs: PFM float images, PNG previews, and JSON helpers for camera
// types.

#pragma once

#include "torf/camera.hpp"
#include "torf/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace torf {

// Thrown for malformed or unreadable files; the message names the file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// PFM with little-endian float32 samples, rows stored bottom to top. Headers:
// "Pf" (1 channel), "PF" (3 channels), "PF<n>" for other channel counts
// (2: phasor re/im, 4: quad exposures).
void write_pfm(const std::filesystem::path& path, const Image& image);
Image read_pfm(const std::filesystem::path& path);

// 8-bit previews. Signed images map positive values to red and negative
// values to blue; channels are laid out side by side.
void write_png_rgb(const std::filesystem::path& path, const Image& rgb);
void write_png_signed(const std::filesystem::path& path, const Image& image);
void write_png_gray(const std::filesystem::path& path, const Image& image, double max_value);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

nlohmann::json to_json(const Intrinsics& in);
Intrinsics intrinsics_from_json(const nlohmann::json& j);
// {"convention": "camera-to-world", "rotation": [[3x3]], "translation": [3]}
nlohmann::json to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Vec3& v);
Vec3 vec3_from_json(const nlohmann::json& j);

}  // namespace torf
