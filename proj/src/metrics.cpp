// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace torf {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: image shapes differ");
  const auto da = a.data();
  const auto db = b.data();
  if (da.empty()) throw std::invalid_argument("psnr: empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) sum += (da[i] - db[i]) * (da[i] - db[i]);
  const double mse = sum / static_cast<double>(da.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double depth_mse(const Image& pred, const Image& gt, const Image& mask) {
  if (!pred.same_shape(gt) || !pred.same_shape(mask) || pred.channels() != 1)
    throw std::invalid_argument("depth_mse: expected equally sized single-channel images");
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x)
      if (mask(x, y, 0) != 0.0) {
        const double e = pred(x, y, 0) - gt(x, y, 0);
        sum += e * e;
        ++count;
      }
  if (count == 0) throw std::invalid_argument("depth_mse: mask selects no pixels");
  return sum / static_cast<double>(count);
}

Metrics evaluate(const RadianceFieldSet& fields, const Dataset& holdout, const RenderOptions& opt) {
  if (holdout.frames.empty()) throw std::invalid_argument("evaluate: hold-out dataset has no frames");
  const SensorRig& rig = holdout.rig;
  const ViewBounds bounds{rig.t_near, rig.t_far};
  Metrics m;
  double psnr_sum = 0.0;
  double depth_sum = 0.0;
  std::size_t depth_count = 0;
  for (std::size_t f = 0; f < holdout.frames.size(); ++f) {
    const Frame& frame = holdout.frames[f];
    const Camera rgb_cam{rig.rgb, frame.rig_pose};
    const Camera tof_cam{rig.tof, rig.sensor_pose(frame.rig_pose, Sensor::kTof)};
    Image rgb = render_image(rgb_cam, fields, frame.tau, rig.model, RenderMode::kRgb, opt, bounds, 2 * f);
    for (double& v : rgb.data()) v = std::clamp(v, 0.0, 1.0);
    FrameMetrics fm;
    fm.psnr = psnr(rgb, frame.rgb);
    psnr_sum += fm.psnr;

    const Image depth = render_image(tof_cam, fields, frame.tau, rig.model, RenderMode::kDepth, opt, bounds, 2 * f + 1);
    Image mask(depth.width(), depth.height(), 1);
    std::size_t valid = 0;
    for (int y = 0; y < depth.height(); ++y)
      for (int x = 0; x < depth.width(); ++x)
        if (frame.depth_gt(x, y, 0) > 0.0) {
          mask(x, y, 0) = 1.0;
          ++valid;
        }
    if (valid > 0) {
      fm.depth_mse = depth_mse(depth, frame.depth_gt, mask);
      depth_sum += fm.depth_mse * static_cast<double>(valid);
      depth_count += valid;
    } else {
      fm.depth_mse = std::numeric_limits<double>::quiet_NaN();
    }
    m.frames.push_back(fm);
  }
  if (depth_count == 0) throw std::invalid_argument("evaluate: no hold-out pixel has valid depth");
  m.psnr = psnr_sum / static_cast<double>(holdout.frames.size());
  m.depth_mse = depth_sum / static_cast<double>(depth_count);
  return m;
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const FrameMetrics& f = m.frames[i];
    frames.push_back({{"frame", i},
                      {"psnr", f.psnr},
                      {"depth_mse", std::isfinite(f.depth_mse) ? nlohmann::json(f.depth_mse) : nlohmann::json()}});
  }
  return {{"schema_version", kMetricsSchemaVersion},
          {"psnr", m.psnr},
          {"depth_mse", m.depth_mse},
          {"frames", frames}};
}

}  // namespace torf
