// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

// Fitted model files.
//
// Layout: the line "TORFCKPT 1", a little-endian uint64 header size, a JSON
// header (grid shapes, activations, rig, poses, times), then the static and
// (optional) dynamic grid parameters as little-endian float32 in the
// params() layout.

#pragma once

#include "torf/dataset.hpp"
#include "torf/fields.hpp"
#include "torf/optimizer.hpp"

#include <filesystem>
#include <vector>

namespace torf {

struct Checkpoint {
  RadianceFieldSet fields;
  SensorRig rig;
  PoseParams poses;  // fitted training poses; may be empty
  std::vector<double> times;
  int n_samples = 64;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws FormatError naming the file and the malformed field.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace torf
