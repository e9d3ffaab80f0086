// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/tof_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace torf {

Image PhasorImage::to_image() const {
  Image image(width_, height_, 2);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      image(x, y, 0) = (*this)(x, y).real();
      image(x, y, 1) = (*this)(x, y).imag();
    }
  }
  return image;
}

PhasorImage PhasorImage::from_image(const Image& image) {
  if (image.channels() != 2)
    throw std::invalid_argument("phasor image needs 2 channels, got " +
                                std::to_string(image.channels()));
  PhasorImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) out(x, y) = {image(x, y, 0), image(x, y, 1)};
  return out;
}

void ToFModel::validate() const {
  if (!(mod_frequency > 0.0) || !std::isfinite(mod_frequency))
    throw std::invalid_argument("ToFModel: mod_frequency must be positive");
  if (!(light_speed > 0.0) || !std::isfinite(light_speed))
    throw std::invalid_argument("ToFModel: light_speed must be positive");
  if (!std::isfinite(zero_phase_offset))
    throw std::invalid_argument("ToFModel: zero_phase_offset must be finite");
  if (!(source_intensity >= 0.0))
    throw std::invalid_argument("ToFModel: source_intensity must be non-negative");
}

double amplitude(Phasor p) { return std::abs(p); }

double wrap_phase(double radians) {
  double r = std::fmod(radians, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a value just below a multiple of 2*pi can round up to 2*pi.
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double principal_phase(Phasor p) { return wrap_phase(std::atan2(p.imag(), p.real())); }

Phasor importance_weight(double path_length, const ToFModel& model) {
  if (!(path_length >= 0.0)) throw std::domain_error("importance_weight: negative path length");
  const double phase =
      kTwoPi * path_length * model.mod_frequency / model.light_speed + model.zero_phase_offset;
  return std::polar(1.0, phase);
}

QuadImage::QuadImage(Image exposures) : exposures_(std::move(exposures)) {
  if (exposures_.channels() != 4)
    throw std::invalid_argument("QuadImage needs exactly 4 channels, got " +
                                std::to_string(exposures_.channels()));
}

QuadImage QuadImage::from_phasors(const PhasorImage& phasors) {
  QuadImage quad(phasors.width(), phasors.height());
  for (int y = 0; y < phasors.height(); ++y) {
    for (int x = 0; x < phasors.width(); ++x) {
      const Phasor p = phasors(x, y);
      quad.at(x, y, 0) = 0.5 * p.real();
      quad.at(x, y, 1) = -0.5 * p.imag();
      quad.at(x, y, 2) = -0.5 * p.real();
      quad.at(x, y, 3) = 0.5 * p.imag();
    }
  }
  return quad;
}

TemporalResponse::TemporalResponse(std::vector<Impulse> impulses) : impulses_(std::move(impulses)) {
  for (std::size_t k = 0; k < impulses_.size(); ++k) {
    const Impulse& imp = impulses_[k];
    if (!(imp.delay >= 0.0)) throw std::invalid_argument("TemporalResponse: negative delay");
    if (!(imp.energy >= 0.0)) throw std::invalid_argument("TemporalResponse: negative energy");
    if (k > 0 && !(imp.delay > impulses_[k - 1].delay))
      throw std::invalid_argument("TemporalResponse: delays must be strictly increasing");
  }
}

TemporalResponse TemporalResponse::from_unsorted(std::vector<Impulse> impulses) {
  std::sort(impulses.begin(), impulses.end(),
            [](const Impulse& a, const Impulse& b) { return a.delay < b.delay; });
  std::vector<Impulse> merged;
  merged.reserve(impulses.size());
  for (const Impulse& imp : impulses) {
    if (!merged.empty() && merged.back().delay == imp.delay)
      merged.back().energy += imp.energy;
    else
      merged.push_back(imp);
  }
  return TemporalResponse(std::move(merged));
}

QuadImage simulate_quad_exposures(const TemporalResponse& response, const ToFModel& model,
                                  long n_periods) {
  if (n_periods < 1) throw std::invalid_argument("simulate_quad_exposures: n_periods must be >= 1");
  const double period = model.period();
  QuadImage quad(1, 1);
  for (int p = 0; p < 4; ++p) {
    const double phi = QuadImage::kPhaseOffsets[p];
    double sum = 0.0;
    for (const Impulse& imp : response.impulses()) {
      sum += imp.energy * (period / 4.0) *
             std::cos(kTwoPi * model.mod_frequency * imp.delay + model.zero_phase_offset + phi);
    }
    quad.at(0, 0, p) = static_cast<double>(n_periods) * sum;
  }
  return quad;
}

Phasor combine_quad(double l0, double l_half_pi, double l_pi, double l_three_half_pi) {
  return {l0 - l_pi, -(l_half_pi - l_three_half_pi)};
}

PhasorImage combine_quad(const QuadImage& quad) {
  PhasorImage out(quad.width(), quad.height());
  for (int y = 0; y < quad.height(); ++y)
    for (int x = 0; x < quad.width(); ++x)
      out(x, y) = combine_quad(quad.at(x, y, 0), quad.at(x, y, 1), quad.at(x, y, 2), quad.at(x, y, 3));
  return out;
}

double quad_phasor_scale(const ToFModel& model, long n_periods) {
  return static_cast<double>(n_periods) * model.period() / 2.0;
}

DepthEstimate phasor_to_depth(Phasor p, const ToFModel& model, double amplitude_floor) {
  const double a = amplitude(p);
  const double phase = wrap_phase(principal_phase(p) - model.zero_phase_offset);
  double depth = phase / model.phase_per_meter();
  // Guard the half-open range against rounding at the wrap boundary.
  if (depth >= model.unambiguous_range()) depth = 0.0;
  return {a, depth, a > amplitude_floor};
}

double unwrap_depth(double depth, const ToFModel& model, double threshold) {
  return depth < threshold ? depth + model.unambiguous_range() : depth;
}

double estimate_zero_phase_offset(std::span<const double> measured_phases,
                                  std::span<const double> true_depths, const ToFModel& model) {
  if (measured_phases.empty())
    throw std::invalid_argument("estimate_zero_phase_offset: no samples");
  if (measured_phases.size() != true_depths.size())
    throw std::invalid_argument("estimate_zero_phase_offset: phase/depth count mismatch");
  double s = 0.0;
  double c = 0.0;
  for (std::size_t i = 0; i < measured_phases.size(); ++i) {
    const double residual = measured_phases[i] - model.phase_per_meter() * true_depths[i];
    s += std::sin(residual);
    c += std::cos(residual);
  }
  return wrap_phase(std::atan2(s, c));
}

}  // namespace torf
