// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

// Continuous-wave time-of-flight sensor model: phasor arithmetic, quad-exposure
// simulation and recombination, phase-to-depth conversion and calibration.

#pragma once

#include "torf/types.hpp"

#include <array>
#include <span>
#include <vector>

namespace torf {

struct ToFModel {
  double mod_frequency = 30e6;   // Hz
  double light_speed = 3e8;      // m/s
  double zero_phase_offset = 0;  // radians
  double source_intensity = 1;

  // Throws std::invalid_argument on a non-physical configuration.
  void validate() const;

  double unambiguous_range() const { return light_speed / (2.0 * mod_frequency); }
  double period() const { return 1.0 / mod_frequency; }
  // Phase accumulated per meter of camera-to-point range (round trip).
  double phase_per_meter() const { return 4.0 * kPi * mod_frequency / light_speed; }
};

inline constexpr double kDefaultAmplitudeFloor = 1e-6;

double amplitude(Phasor p);
// Principal phase value in [0, 2*pi).
double principal_phase(Phasor p);
// Wraps any angle into [0, 2*pi).
double wrap_phase(double radians);

// W(d) = exp(i(2*pi*d*f/c + offset)) for a light path of length d. Throws
// std::domain_error for d < 0.
Phasor importance_weight(double path_length, const ToFModel& model);

// Four phase-shifted exposures L_phi, phi in {0, pi/2, pi, 3pi/2}, stored as
// channels 0..3 in that order.
class QuadImage {
 public:
  static constexpr std::array<double, 4> kPhaseOffsets = {0.0, 0.5 * kPi, kPi, 1.5 * kPi};

  QuadImage() = default;
  QuadImage(int width, int height) : exposures_(width, height, 4) {}
  explicit QuadImage(Image exposures);

  int width() const { return exposures_.width(); }
  int height() const { return exposures_.height(); }

  double& at(int x, int y, int phase_index) { return exposures_(x, y, phase_index); }
  double at(int x, int y, int phase_index) const { return exposures_(x, y, phase_index); }

  const Image& exposures() const { return exposures_; }
  Image& exposures() { return exposures_; }

  // Exposures whose recombination is exactly `phasors` (zero common mode).
  static QuadImage from_phasors(const PhasorImage& phasors);

 private:
  Image exposures_;
};

struct Impulse {
  double delay;   // seconds
  double energy;  // >= 0
};

// Scene temporal response observed at one pixel: a sparse impulse train.
class TemporalResponse {
 public:
  TemporalResponse() = default;
  // Throws std::invalid_argument unless delays are non-negative and strictly
  // increasing and energies non-negative.
  explicit TemporalResponse(std::vector<Impulse> impulses);

  // Builds a valid response from unsorted impulses, merging equal delays.
  static TemporalResponse from_unsorted(std::vector<Impulse> impulses);

  std::span<const Impulse> impulses() const { return impulses_; }
  bool empty() const { return impulses_.empty(); }

 private:
  std::vector<Impulse> impulses_;
};

// L_phi = N * sum_k energy_k * (T/4) * cos(2*pi*f*delay_k + offset + phi).
QuadImage simulate_quad_exposures(const TemporalResponse& response, const ToFModel& model,
                                  long n_periods);

// (L_0 - L_pi) - i (L_pi/2 - L_3pi/2), per pixel.
Phasor combine_quad(double l0, double l_half_pi, double l_pi, double l_three_half_pi);
PhasorImage combine_quad(const QuadImage& quad);

// Scale of the recombined phasor for a unit impulse: N*T/2.
double quad_phasor_scale(const ToFModel& model, long n_periods);

struct DepthEstimate {
  double amplitude;
  double depth;   // meters, in [0, c/2f)
  bool reliable;  // amplitude above the floor
};

DepthEstimate phasor_to_depth(Phasor p, const ToFModel& model,
                              double amplitude_floor = kDefaultAmplitudeFloor);

// Adds one unambiguous range to depths strictly below `threshold`.
double unwrap_depth(double depth, const ToFModel& model, double threshold);

// Circular mean of measured phase minus the phase predicted by the true range,
// in [0, 2*pi).
// Throws std::invalid_argument for empty or mismatched inputs.
double estimate_zero_phase_offset(std::span<const double> measured_phases,
                                  std::span<const double> true_depths, const ToFModel& model);

}  // namespace torf
