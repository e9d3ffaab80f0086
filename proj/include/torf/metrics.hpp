// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "torf/dataset.hpp"
#include "torf/fields.hpp"
#include "torf/renderer.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace torf {

inline constexpr double kPsnrCap = 99.0;
inline constexpr int kMetricsSchemaVersion = 1;

// -10 log10(MSE) for images with peak 1; kPsnrCap when MSE < 1e-10. Throws
// std::invalid_argument on shape mismatch.
double psnr(const Image& a, const Image& b);

// Mean squared difference over pixels where mask != 0. Throws
// std::invalid_argument on shape mismatch or an empty mask.
double depth_mse(const Image& pred, const Image& gt, const Image& mask);

struct FrameMetrics {
  double psnr = 0.0;
  double depth_mse = 0.0;  // NaN when the frame has no valid depth
};

struct Metrics {
  double psnr = 0.0;       // mean over frames
  double depth_mse = 0.0;  // pooled over every valid pixel
  std::vector<FrameMetrics> frames;
};

// Renders every hold-out frame from its recorded poses and compares RGB (color
// camera) and expected depth (ToF camera, pixels with depth_gt > 0).
Metrics evaluate(const RadianceFieldSet& fields, const Dataset& holdout, const RenderOptions& opt);

nlohmann::json to_json(const Metrics& m);

}  // namespace torf
