// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/optimizer.hpp"

#include "torf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace torf {

// ---------------------------------------------------------------- poses

PoseParams PoseParams::from_poses(std::span<const Pose> rig_poses, const Pose& tof_in_rgb) {
  PoseParams p;
  for (const Pose& pose : rig_poses) {
    p.rotation.push_back(so3_log(pose.rotation));
    p.translation.push_back(pose.translation);
  }
  p.rel_rotation = so3_log(tof_in_rgb.rotation);
  p.rel_translation = tof_in_rgb.translation;
  return p;
}

Pose PoseParams::rig_pose(std::size_t f) const {
  return {so3_exp(rotation.at(f)), translation.at(f)};
}

Pose PoseParams::tof_in_rgb() const { return {so3_exp(rel_rotation), rel_translation}; }

Pose PoseParams::sensor_pose(std::size_t f, Sensor s) const {
  const Pose rig = rig_pose(f);
  return s == Sensor::kRgb ? rig : rig.compose(tof_in_rgb());
}

void PoseParams::renormalize() {
  for (Vec3& w : rotation) w = renormalize_axis_angle(w);
  rel_rotation = renormalize_axis_angle(rel_rotation);
}

// ---------------------------------------------------------------- gradient set

GradientSet GradientSet::zeros_like(const RadianceFieldSet& fields, const PoseParams& poses) {
  GradientSet g;
  g.stat.assign(fields.stat.grid().params().size(), 0.0);
  if (fields.dyn) g.dyn.assign(fields.dyn->grid().params().size(), 0.0);
  g.pose_rotation.assign(poses.frame_count(), Vec3::Zero());
  g.pose_translation.assign(poses.frame_count(), Vec3::Zero());
  return g;
}

void GradientSet::set_zero() {
  std::fill(stat.begin(), stat.end(), 0.0);
  std::fill(dyn.begin(), dyn.end(), 0.0);
  for (Vec3& v : pose_rotation) v.setZero();
  for (Vec3& v : pose_translation) v.setZero();
  rel_rotation.setZero();
  rel_translation.setZero();
}

void GradientSet::add(const GradientSet& o) {
  for (std::size_t i = 0; i < stat.size(); ++i) stat[i] += o.stat[i];
  for (std::size_t i = 0; i < dyn.size(); ++i) dyn[i] += o.dyn[i];
  for (std::size_t i = 0; i < pose_rotation.size(); ++i) pose_rotation[i] += o.pose_rotation[i];
  for (std::size_t i = 0; i < pose_translation.size(); ++i) pose_translation[i] += o.pose_translation[i];
  rel_rotation += o.rel_rotation;
  rel_translation += o.rel_translation;
}

std::string GradientSet::first_non_finite_block() const {
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  auto finite3 = [](const std::vector<Vec3>& v) {
    return std::all_of(v.begin(), v.end(), [](const Vec3& x) { return x.allFinite(); });
  };
  if (!finite(stat)) return "static";
  if (!dyn.empty()) {
    const std::size_t nv = dyn.size() / kDynamicChannels;
    if (!finite(std::span<const double>(dyn).first(nv * kBlend))) return "dynamic";
    if (!finite(std::span<const double>(dyn).subspan(nv * kBlend))) return "blend";
  }
  if (!finite3(pose_rotation)) return "pose_rotation";
  if (!finite3(pose_translation)) return "pose_translation";
  if (!rel_rotation.allFinite() || !rel_translation.allFinite()) return "relative_transform";
  return {};
}

// ---------------------------------------------------------------- per-ray backward

namespace {

struct SampleRecord {
  PreSample stat_pre;
  ActivatedSample stat_act;
  PreSample dyn_pre;
  ActivatedSample dyn_act;
  double alpha_s = 0.0;
  double alpha_d = 0.0;
};

struct RayScratch {
  std::vector<SampleRecord> rec;
  std::vector<double> r_rgb;  // R_k . g_rgb
  std::vector<Phasor> q;
  std::vector<Phasor> u;
  std::vector<double> ra;
  std::vector<double> rb;
};

// d(loss)/d(pre) for one grid sample, scattered into `out` and folded into the
// position gradient `gx`.
void scatter_sample(const VoxelGrid& grid, const PreSample& pre, const double* gpre, int channels,
                    std::vector<double>& out, Vec3& gx) {
  const std::size_t nv = grid.voxel_count();
  const auto params = grid.params();
  for (int c = 0; c < channels; ++c) {
    const double g = gpre[c];
    if (g == 0.0) continue;
    const std::size_t base = static_cast<std::size_t>(c) * nv;
    for (int j = 0; j < pre.stencil.count; ++j) {
      const std::size_t idx = base + pre.stencil.voxel[j];
      out[idx] += pre.stencil.weight[j] * g;
      gx += (g * params[idx]) * pre.stencil.dweight_dx[j];
    }
  }
}

double frobenius(const Mat3& a, const Mat3& b) { return (a.array() * b.array()).sum(); }

Vec3 rotation_gradient(const Vec3& w, const Mat3& g_r) {
  const std::array<Mat3, 3> jac = so3_exp_jacobian(w);
  return {frobenius(jac[0], g_r), frobenius(jac[1], g_r), frobenius(jac[2], g_r)};
}

LossBreakdown process_ray(const RayQuery& q, const RadianceFieldSet& fields,
                          const PoseParams& poses, const SensorRig& rig, const LossWeights& w,
                          const RenderOptions& opt, GradientSet* grad, RayScratch& s) {
  const Pose rig_pose = poses.rig_pose(q.frame);
  const Pose rel = poses.tof_in_rgb();
  const Pose pose = q.sensor == Sensor::kRgb ? rig_pose : rig_pose.compose(rel);
  const Vec3 dc = camera_direction(rig.intrinsics(q.sensor), q.px, q.py);
  Ray ray{pose.translation, pose.rotation * dc, rig.t_near, rig.t_far};

  const std::vector<double> t = sample_distances(ray, opt, q.seed);
  const std::size_t n = t.size();
  const bool dyn = fields.dynamic_active();

  RaySamples rs;
  rs.t = t;
  rs.delta = sample_spacings(ray, t);
  rs.blended.resize(n);
  rs.transmittance.resize(n + 1);
  rs.transmittance[0] = 1.0;
  s.rec.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    SampleRecord& r = s.rec[k];
    const Vec3 x = ray.at(t[k]);
    r.stat_pre = fields.stat.grid().interpolate(x, 0.0);
    r.stat_act = activate(r.stat_pre, fields.stat.activations(), false);
    if (dyn) {
      r.dyn_pre = fields.dyn->grid().interpolate(x, q.tau);
      r.dyn_act = activate(r.dyn_pre, fields.dyn->activations(), true);
      rs.blended[k] = blend_samples(r.stat_act.value, r.dyn_act.value, rs.delta[k]);
      r.alpha_d = opacity_from_density(r.dyn_act.value.sigma, rs.delta[k]);
    } else {
      rs.blended[k] = static_sample(r.stat_act.value, rs.delta[k]);
    }
    r.alpha_s = opacity_from_density(r.stat_act.value.sigma, rs.delta[k]);
    rs.transmittance[k + 1] = rs.transmittance[k] * (1.0 - rs.blended[k].alpha);
  }
  const RenderOutput out = composite(rs, rig.model, opt);

  // Residuals and output gradients.
  LossBreakdown lb;
  Vec3 g_rgb = Vec3::Zero();
  Phasor g_tof{};
  double g_depth = 0.0;
  switch (q.kind) {
    case Supervision::kRgb: {
      const Vec3 r = out.rgb - q.rgb;
      lb.rgb = r.squaredNorm();
      lb.total = w.rgb * lb.rgb;
      g_rgb = 2.0 * w.rgb * r;
      break;
    }
    case Supervision::kTof: {
      const Phasor e = out.tof - q.phasor;
      lb.tof = std::norm(e);
      lb.total = w.lambda * w.tof * lb.tof;
      g_tof = 2.0 * w.lambda * w.tof * e;
      break;
    }
    case Supervision::kDepth: {
      const double e = out.expected_depth - q.depth;
      lb.depth = e * e;
      lb.total = w.lambda * w.depth * lb.depth;
      g_depth = 2.0 * w.lambda * w.depth * e;
      break;
    }
  }
  if (!grad || lb.total == 0.0) return lb;

  const auto& T = rs.transmittance;
  auto alpha = [&](std::size_t k) { return rs.blended[k].alpha; };
  const double eps2 = opt.min_range * opt.min_range;
  const double intensity = rig.model.source_intensity;

  // Reverse suffix sums of the compositing recurrences.
  s.r_rgb.assign(n, 0.0);
  s.q.assign(n, Phasor{});
  s.u.assign(n, Phasor{});
  s.ra.assign(n, 0.0);
  s.rb.assign(n, 0.0);
  std::vector<double> falloff(n);
  std::vector<Phasor> wgt(n);
  for (std::size_t k = 0; k < n; ++k) {
    falloff[k] = 1.0 / std::max(t[k] * t[k], eps2);
    wgt[k] = importance_weight(2.0 * t[k], rig.model);
    s.q[k] = (rs.blended[k].ir * falloff[k]) * wgt[k];
  }
  if (n > 0) s.r_rgb[n - 1] = opt.background.dot(g_rgb);
  for (std::size_t k = n - 1; k-- > 0;) {
    const double om = 1.0 - alpha(k + 1);
    s.r_rgb[k] = rs.blended[k + 1].rgb.dot(g_rgb) + om * s.r_rgb[k + 1];
    s.u[k] = s.q[k + 1] + (om * om) * s.u[k + 1];
    s.ra[k] = alpha(k + 1) * t[k + 1] + om * s.ra[k + 1];
    s.rb[k] = alpha(k + 1) + om * s.rb[k + 1];
  }
  double depth_a = 0.0;
  double depth_b = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    depth_a += T[k] * alpha(k) * t[k];
    depth_b += T[k] * alpha(k);
  }
  const bool depth_live = q.kind == Supervision::kDepth && depth_b >= opt.opacity_floor;

  Vec3 g_origin = Vec3::Zero();
  Vec3 g_dir = Vec3::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    const SampleRecord& r = s.rec[k];
    if (!r.stat_pre.inside() && !(dyn && r.dyn_pre.inside())) continue;
    const double tk = T[k];
    const double ak = alpha(k);

    // d loss / d (alpha_k, C_k, J_k)
    double g_alpha = -tk * s.r_rgb[k];
    const Vec3 g_c = tk * g_rgb;
    double g_j = 0.0;
    if (q.kind == Supervision::kTof) {
      const Phasor dp_da = -2.0 * intensity * (1.0 - ak) * tk * tk * s.u[k];
      const Phasor dp_dj = (intensity * tk * tk * falloff[k]) * wgt[k];
      g_alpha += g_tof.real() * dp_da.real() + g_tof.imag() * dp_da.imag();
      g_j = g_tof.real() * dp_dj.real() + g_tof.imag() * dp_dj.imag();
    }
    if (depth_live) {
      const double da = tk * (t[k] - s.ra[k]);
      const double db = tk * (1.0 - s.rb[k]);
      g_alpha += g_depth * (da * depth_b - depth_a * db) / (depth_b * depth_b);
    }

    const FieldSample& vs = r.stat_act.value;
    double g_alpha_s = 0.0;
    Vec3 g_rgb_s = Vec3::Zero();
    double g_ir_s = 0.0;
    Vec3 g_x = Vec3::Zero();
    if (dyn) {
      const FieldSample& vd = r.dyn_act.value;
      const double b = vd.blend;
      const double ws = (1.0 - b) * r.alpha_s;
      const double wd = b * r.alpha_d;
      const double g_ws = g_alpha + g_c.dot(vs.rgb) + g_j * vs.ir;
      const double g_wd = g_alpha + g_c.dot(vd.rgb) + g_j * vd.ir;
      g_alpha_s = (1.0 - b) * g_ws;
      g_rgb_s = ws * g_c;
      g_ir_s = ws * g_j;
      const double g_alpha_d = b * g_wd;
      const double g_b = -r.alpha_s * g_ws + r.alpha_d * g_wd;
      if (r.dyn_pre.inside()) {
        std::array<double, kDynamicChannels> gp{};
        gp[kDensity] = g_alpha_d * rs.delta[k] * (1.0 - r.alpha_d) * r.dyn_act.dvalue_dpre[kDensity];
        for (int c = kRed; c <= kBlue; ++c) gp[c] = wd * g_c[c - kRed] * r.dyn_act.dvalue_dpre[c];
        gp[kIr] = wd * g_j * r.dyn_act.dvalue_dpre[kIr];
        gp[kBlend] = g_b * r.dyn_act.dvalue_dpre[kBlend];
        scatter_sample(fields.dyn->grid(), r.dyn_pre, gp.data(), kDynamicChannels, grad->dyn, g_x);
      }
    } else {
      g_alpha_s = g_alpha + g_c.dot(vs.rgb) + g_j * vs.ir;
      g_rgb_s = r.alpha_s * g_c;
      g_ir_s = r.alpha_s * g_j;
    }
    if (r.stat_pre.inside()) {
      std::array<double, kStaticChannels> gp{};
      gp[kDensity] = g_alpha_s * rs.delta[k] * (1.0 - r.alpha_s) * r.stat_act.dvalue_dpre[kDensity];
      for (int c = kRed; c <= kBlue; ++c) gp[c] = g_rgb_s[c - kRed] * r.stat_act.dvalue_dpre[c];
      gp[kIr] = g_ir_s * r.stat_act.dvalue_dpre[kIr];
      scatter_sample(fields.stat.grid(), r.stat_pre, gp.data(), kStaticChannels, grad->stat, g_x);
    }
    g_origin += g_x;
    g_dir += t[k] * g_x;
  }

  // Pose chain rule; sample distances do not depend on the pose.
  const std::size_t f = q.frame;
  if (q.sensor == Sensor::kRgb) {
    grad->pose_translation[f] += g_origin;
    grad->pose_rotation[f] += rotation_gradient(poses.rotation[f], g_dir * dc.transpose());
  } else {
    const Mat3& rb = rig_pose.rotation;
    const Vec3 rel_dir = rel.rotation * dc;
    grad->pose_translation[f] += g_origin;
    grad->pose_rotation[f] += rotation_gradient(
        poses.rotation[f], g_origin * rel.translation.transpose() + g_dir * rel_dir.transpose());
    grad->rel_translation += rb.transpose() * g_origin;
    grad->rel_rotation +=
        rotation_gradient(poses.rel_rotation, rb.transpose() * g_dir * dc.transpose());
  }
  return lb;
}

void accumulate(LossBreakdown& a, const LossBreakdown& b) {
  a.total += b.total;
  a.rgb += b.rgb;
  a.tof += b.tof;
  a.depth += b.depth;
}

}  // namespace

LossBreakdown evaluate_batch(std::span<const RayQuery> batch, const RadianceFieldSet& fields,
                             const PoseParams& poses, const SensorRig& rig,
                             const LossWeights& weights, const RenderOptions& opt,
                             GradientSet* grad) {
  for (const RayQuery& q : batch)
    if (q.frame >= poses.frame_count())
      throw std::out_of_range("ray query references frame " + std::to_string(q.frame) +
                              " but only " + std::to_string(poses.frame_count()) + " poses exist");
  if (grad) {
    const GradientSet shape = GradientSet::zeros_like(fields, poses);
    if (grad->stat.size() != shape.stat.size() || grad->dyn.size() != shape.dyn.size() ||
        grad->pose_rotation.size() != shape.pose_rotation.size())
      *grad = shape;
  }

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), batch.size());
  if (workers <= 1) {
    LossBreakdown total;
    RayScratch scratch;
    for (const RayQuery& q : batch)
      accumulate(total, process_ray(q, fields, poses, rig, weights, opt, grad, scratch));
    return total;
  }

  // Contiguous chunks, one per worker, reduced in chunk order.
  std::vector<LossBreakdown> part(workers);
  std::vector<GradientSet> part_grad(grad ? workers : 0);
  const std::size_t block = (batch.size() + workers - 1) / workers;
  parallel_for(workers, [&](std::size_t w) {
    RayScratch scratch;
    GradientSet* g = nullptr;
    if (grad) {
      part_grad[w] = GradientSet::zeros_like(fields, poses);
      g = &part_grad[w];
    }
    const std::size_t end = std::min(batch.size(), (w + 1) * block);
    for (std::size_t i = w * block; i < end; ++i)
      accumulate(part[w], process_ray(batch[i], fields, poses, rig, weights, opt, g, scratch));
  });
  LossBreakdown total;
  for (std::size_t w = 0; w < workers; ++w) {
    accumulate(total, part[w]);
    if (grad) grad->add(part_grad[w]);
  }
  return total;
}

double loss(std::span<const RayQuery> batch, const RadianceFieldSet& fields,
            const PoseParams& poses, const SensorRig& rig, const LossWeights& weights,
            const RenderOptions& opt) {
  return evaluate_batch(batch, fields, poses, rig, weights, opt, nullptr).total;
}

GradientSet gradients(std::span<const RayQuery> batch, const RadianceFieldSet& fields,
                      const PoseParams& poses, const SensorRig& rig, const LossWeights& weights,
                      const RenderOptions& opt) {
  GradientSet g = GradientSet::zeros_like(fields, poses);
  const LossBreakdown lb = evaluate_batch(batch, fields, poses, rig, weights, opt, &g);
  const std::string bad = g.first_non_finite_block();
  if (!bad.empty()) throw std::runtime_error("gradients: non-finite entries in block '" + bad + "'");
  if (!std::isfinite(lb.total)) throw std::runtime_error("gradients: loss is not finite");
  return g;
}

// ---------------------------------------------------------------- gradient check

namespace {

double relative_error(double a, double n, double scale) {
  const double denom = std::max({std::abs(a), std::abs(n), 1e-3 * scale, 1e-12});
  return std::abs(a - n) / denom;
}

void finish_entry(GradientCheckEntry& e) {
  double scale = 0.0;
  for (double v : e.numeric) scale = std::max(scale, std::abs(v));
  e.max_rel_error = 0.0;
  for (std::size_t i = 0; i < e.analytic.size(); ++i)
    e.max_rel_error = std::max(e.max_rel_error, relative_error(e.analytic[i], e.numeric[i], scale));
}

}  // namespace

GradientReport check_gradients(std::span<const RayQuery> batch, const RadianceFieldSet& fields,
                               const PoseParams& poses, const SensorRig& rig,
                               const LossWeights& weights, const RenderOptions& opt,
                               const GradientCheckOptions& check) {
  const GradientSet g = gradients(batch, fields, poses, rig, weights, opt);
  RadianceFieldSet f = fields;
  PoseParams p = poses;
  std::mt19937_64 rng(check.seed);
  GradientReport report;
  auto eval = [&] { return loss(batch, f, p, rig, weights, opt); };

  // Every entry with a nonzero analytic gradient plus a few random zero ones.
  auto probe_field = [&](const std::string& name, std::span<double> params,
                         const std::vector<double>& analytic, std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx;
    std::vector<std::size_t> zero;
    for (std::size_t i = begin; i < end; ++i) (analytic[i] != 0.0 ? idx : zero).push_back(i);
    std::shuffle(zero.begin(), zero.end(), rng);
    zero.resize(std::min<std::size_t>(zero.size(), static_cast<std::size_t>(check.zero_probes)));
    idx.insert(idx.end(), zero.begin(), zero.end());
    GradientCheckEntry& e = report[name];
    for (std::size_t i : idx) {
      const double orig = params[i];
      params[i] = orig + check.field_step;
      const double lp = eval();
      params[i] = orig - check.field_step;
      const double lm = eval();
      params[i] = orig;
      e.analytic.push_back(analytic[i]);
      e.numeric.push_back((lp - lm) / (2.0 * check.field_step));
    }
    finish_entry(e);
  };

  probe_field("static", f.stat.grid().params(), g.stat, 0, g.stat.size());
  if (f.dyn) {
    const std::size_t nv = f.dyn->grid().voxel_count();
    probe_field("dynamic", f.dyn->grid().params(), g.dyn, 0, nv * kBlend);
    probe_field("blend", f.dyn->grid().params(), g.dyn, nv * kBlend, nv * kDynamicChannels);
  }

  auto probe_vec = [&](GradientCheckEntry& e, Vec3& param, const Vec3& analytic) {
    for (int i = 0; i < 3; ++i) {
      const double orig = param[i];
      param[i] = orig + check.pose_step;
      const double lp = eval();
      param[i] = orig - check.pose_step;
      const double lm = eval();
      param[i] = orig;
      e.analytic.push_back(analytic[i]);
      e.numeric.push_back((lp - lm) / (2.0 * check.pose_step));
    }
  };
  GradientCheckEntry& rot = report["pose_rotation"];
  GradientCheckEntry& trans = report["pose_translation"];
  for (std::size_t fr = 0; fr < p.frame_count(); ++fr) {
    probe_vec(rot, p.rotation[fr], g.pose_rotation[fr]);
    probe_vec(trans, p.translation[fr], g.pose_translation[fr]);
  }
  finish_entry(rot);
  finish_entry(trans);
  GradientCheckEntry& relative = report["relative_transform"];
  probe_vec(relative, p.rel_rotation, g.rel_rotation);
  probe_vec(relative, p.rel_translation, g.rel_translation);
  finish_entry(relative);

  for (const auto& [name, e] : report) {
    if (!std::isfinite(e.max_rel_error))
      throw std::runtime_error("check_gradients: non-finite comparison in block '" + name + "'");
  }
  return report;
}

// ---------------------------------------------------------------- config

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("train config: '" + field + "' " + why);
  };
  if (!(lambda >= 0.0)) fail("lambda", "must be >= 0");
  if (lambda_half_life < 1) fail("lambda_half_life", "must be >= 1");
  if (rays_per_batch < 1) fail("rays_per_batch", "must be >= 1");
  if (iterations < 1) fail("iterations", "must be >= 1");
  if (!(lr_fields > 0.0)) fail("lr_fields", "must be > 0");
  if (!(lr_pose_initial > 0.0)) fail("lr_pose_initial", "must be > 0");
  if (!(lr_pose_late > 0.0)) fail("lr_pose_late", "must be > 0");
  if (pose_stage_iters < 1) fail("pose_stage_iters", "must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", "must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2", "must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon", "must be > 0");
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) fail("lr_final_fraction", "must be in (0, 1]");
  if (n_samples < 2) fail("n_samples", "must be >= 2");
  if (!(divergence_factor > 1.0)) fail("divergence_factor", "must be > 1");
}

namespace {

std::string mode_name(SupervisionMode m) {
  switch (m) {
    case SupervisionMode::kPhasor: return "phasor";
    case SupervisionMode::kDepth: return "depth";
    case SupervisionMode::kRgbOnly: return "rgb_only";
  }
  return "phasor";
}

SupervisionMode parse_mode(const std::string& s) {
  if (s == "phasor") return SupervisionMode::kPhasor;
  if (s == "depth") return SupervisionMode::kDepth;
  if (s == "rgb_only") return SupervisionMode::kRgbOnly;
  throw std::invalid_argument("train config: 'mode' must be phasor|depth|rgb_only, got '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lambda", c.lambda},
          {"lambda_half_life", c.lambda_half_life},
          {"rays_per_batch", c.rays_per_batch},
          {"iterations", c.iterations},
          {"lr_fields", c.lr_fields},
          {"lr_pose_initial", c.lr_pose_initial},
          {"lr_pose_late", c.lr_pose_late},
          {"pose_stage_iters", c.pose_stage_iters},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"lr_final_fraction", c.lr_final_fraction},
          {"n_samples", c.n_samples},
          {"optimize_poses", c.optimize_poses},
          {"optimize_relative", c.optimize_relative},
          {"anchor_first_frame", c.anchor_first_frame},
          {"normalize_residuals", c.normalize_residuals},
          {"mode", mode_name(c.mode)},
          {"divergence_factor", c.divergence_factor}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("train config: expected a JSON object");
  TrainConfig c;
  const nlohmann::json known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("train config: unknown field '" + key + "'");
    try {
      if (key == "lambda") c.lambda = value.get<double>();
      else if (key == "lambda_half_life") c.lambda_half_life = value.get<long>();
      else if (key == "rays_per_batch") c.rays_per_batch = value.get<int>();
      else if (key == "iterations") c.iterations = value.get<long>();
      else if (key == "lr_fields") c.lr_fields = value.get<double>();
      else if (key == "lr_pose_initial") c.lr_pose_initial = value.get<double>();
      else if (key == "lr_pose_late") c.lr_pose_late = value.get<double>();
      else if (key == "pose_stage_iters") c.pose_stage_iters = value.get<long>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "adam_epsilon") c.adam_epsilon = value.get<double>();
      else if (key == "lr_final_fraction") c.lr_final_fraction = value.get<double>();
      else if (key == "n_samples") c.n_samples = value.get<int>();
      else if (key == "optimize_poses") c.optimize_poses = value.get<bool>();
      else if (key == "optimize_relative") c.optimize_relative = value.get<bool>();
      else if (key == "anchor_first_frame") c.anchor_first_frame = value.get<bool>();
      else if (key == "normalize_residuals") c.normalize_residuals = value.get<bool>();
      else if (key == "mode") c.mode = parse_mode(value.get<std::string>());
      else if (key == "divergence_factor") c.divergence_factor = value.get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("train config: field '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

double lambda_at(long iteration, const TrainConfig& cfg) {
  const long halvings = std::max(0L, iteration) / cfg.lambda_half_life;
  return std::ldexp(cfg.lambda, -static_cast<int>(std::min(halvings, 2000L)));
}

// ---------------------------------------------------------------- training

std::vector<PoseError> pose_errors(const PoseParams& estimate, std::span<const Pose> truth) {
  if (truth.size() != estimate.frame_count())
    throw std::invalid_argument("pose_errors: frame count mismatch");
  std::vector<PoseError> out;
  if (truth.empty()) return out;
  const Pose est0_inv = estimate.rig_pose(0).inverse();
  const Pose gt0_inv = truth[0].inverse();
  for (std::size_t f = 0; f < truth.size(); ++f) {
    Pose e = estimate.rig_pose(f);
    Pose g = truth[f];
    if (truth.size() > 1) {
      e = est0_inv.compose(e);
      g = gt0_inv.compose(g);
    }
    out.push_back({rotation_angle_between(e.rotation, g.rotation) * 180.0 / kPi,
                   (e.translation - g.translation).norm()});
  }
  return out;
}

namespace {

class Adam {
 public:
  explicit Adam(std::size_t n = 0) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double lr,
            const TrainConfig& cfg) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * grad[i];
      v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
      params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg.adam_epsilon);
    }
  }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

std::vector<double> flatten(const std::vector<Vec3>& v) {
  std::vector<double> out;
  out.reserve(v.size() * 3);
  for (const Vec3& x : v) out.insert(out.end(), {x[0], x[1], x[2]});
  return out;
}

void unflatten(std::span<const double> flat, std::vector<Vec3>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = Vec3(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
}

struct PixelRef {
  std::size_t frame;
  int x;
  int y;
};

// Endless stream of pixel references, reshuffled at every epoch.
class EpochSampler {
 public:
  EpochSampler(std::vector<PixelRef> items, std::uint64_t seed) : items_(std::move(items)), rng_(seed) {
    reshuffle();
  }
  std::size_t size() const { return items_.size(); }
  const PixelRef& next() {
    if (pos_ == items_.size()) reshuffle();
    return items_[pos_++];
  }

 private:
  void reshuffle() {
    std::shuffle(items_.begin(), items_.end(), rng_);
    pos_ = 0;
  }
  std::vector<PixelRef> items_;
  std::mt19937_64 rng_;
  std::size_t pos_ = 0;
};

double variance_weight(double sum, double sum_sq, std::size_t count) {
  if (count == 0) return 1.0;
  const double mean = sum / count;
  const double var = sum_sq / count - mean * mean;
  return var > 1e-12 ? 1.0 / var : 1.0;
}

}  // namespace

TrainResult train(const Dataset& data, RadianceFieldSet& fields, PoseParams& poses,
                  const TrainConfig& cfg, std::uint64_t seed, const TrainHooks& hooks) {
  cfg.validate();
  if (data.frames.empty()) throw std::invalid_argument("train: dataset has no frames");
  if (poses.frame_count() != data.frames.size())
    throw std::invalid_argument("train: pose count does not match frame count");
  const SensorRig& rig = data.rig;

  // Measurements in renderer units.
  std::vector<PhasorImage> phasors;
  std::vector<Image> wrapped_depth;
  for (std::size_t f = 0; f < data.frames.size(); ++f) {
    phasors.push_back(data.normalized_phasors(f));
    if (cfg.mode == SupervisionMode::kDepth) {
      const PhasorImage& p = phasors.back();
      Image d(p.width(), p.height(), 1);
      for (int y = 0; y < p.height(); ++y)
        for (int x = 0; x < p.width(); ++x) {
          const DepthEstimate e = phasor_to_depth(p(x, y), rig.model);
          d(x, y, 0) = e.reliable ? e.depth : -1.0;
        }
      wrapped_depth.push_back(std::move(d));
    }
  }

  std::vector<PixelRef> rgb_items;
  std::vector<PixelRef> tof_items;
  double rs = 0.0, rss = 0.0, ts = 0.0, tss = 0.0;
  std::size_t rn = 0, tn = 0;
  for (std::size_t f = 0; f < data.frames.size(); ++f) {
    const Image& rgb = data.frames[f].rgb;
    for (int y = 0; y < rgb.height(); ++y)
      for (int x = 0; x < rgb.width(); ++x) {
        rgb_items.push_back({f, x, y});
        for (int c = 0; c < 3; ++c) {
          rs += rgb(x, y, c);
          rss += rgb(x, y, c) * rgb(x, y, c);
        }
        rn += 3;
      }
    const PhasorImage& p = phasors[f];
    for (int y = 0; y < p.height(); ++y)
      for (int x = 0; x < p.width(); ++x) {
        if (cfg.mode == SupervisionMode::kDepth) {
          const double d = wrapped_depth[f](x, y, 0);
          if (d < 0.0) continue;
          ts += d;
          tss += d * d;
          ++tn;
        }
        tof_items.push_back({f, x, y});
      }
  }
  LossWeights weights;
  if (cfg.normalize_residuals) {
    weights.rgb = variance_weight(rs, rss, rn);
    if (cfg.mode == SupervisionMode::kDepth) {
      weights.depth = variance_weight(ts, tss, tn);
    } else {
      // Variance of the complex measurement: E|p - mean|^2.
      Phasor sum{};
      double sq = 0.0;
      std::size_t count = 0;
      for (const PixelRef& r : tof_items) {
        const Phasor v = phasors[r.frame](r.x, r.y);
        sum += v;
        sq += std::norm(v);
        ++count;
      }
      if (count > 0) {
        const double var = sq / count - std::norm(sum / static_cast<double>(count));
        weights.tof = var > 1e-12 ? 1.0 / var : 1.0;
      }
    }
  }
  const bool use_tof = cfg.mode != SupervisionMode::kRgbOnly && !tof_items.empty();
  if (rgb_items.empty() && !use_tof) throw std::invalid_argument("train: dataset has no pixels");

  std::mt19937_64 seeder(seed);
  EpochSampler rgb_sampler(rgb_items, seeder());
  EpochSampler tof_sampler(tof_items, seeder());

  const bool had_dynamic = fields.use_dynamic && fields.dyn.has_value();
  Adam adam_stat(fields.stat.grid().params().size());
  Adam adam_dyn(fields.dyn ? fields.dyn->grid().params().size() : 0);
  Adam adam_rot(poses.frame_count() * 3);
  Adam adam_trans(poses.frame_count() * 3);
  Adam adam_rel(6);

  RenderOptions opt;
  opt.n_samples = cfg.n_samples;
  opt.stratified = true;

  TrainResult result;
  result.weights = weights;
  GradientSet grad = GradientSet::zeros_like(fields, poses);
  std::vector<RayQuery> batch;
  double first_rgb = -1.0;
  double first_tof = -1.0;

  try {
    for (long it = 0; it < cfg.iterations; ++it) {
      const bool stage2 = it >= cfg.pose_stage_iters;
      fields.use_dynamic = had_dynamic && stage2;
      const bool tof_turn = use_tof && (rgb_items.empty() || it % 2 == 1);
      weights.lambda = lambda_at(it, cfg);

      batch.clear();
      EpochSampler& sampler = tof_turn ? tof_sampler : rgb_sampler;
      const std::size_t count = std::min<std::size_t>(cfg.rays_per_batch, sampler.size());
      for (std::size_t i = 0; i < count; ++i) {
        const PixelRef& r = sampler.next();
        RayQuery q;
        q.frame = r.frame;
        q.px = r.x;
        q.py = r.y;
        q.tau = data.frames[r.frame].tau;
        q.seed = mix_seed(seed, static_cast<std::uint64_t>(it), i);
        if (tof_turn) {
          q.sensor = Sensor::kTof;
          if (cfg.mode == SupervisionMode::kDepth) {
            q.kind = Supervision::kDepth;
            q.depth = wrapped_depth[r.frame](r.x, r.y, 0);
          } else {
            q.kind = Supervision::kTof;
            q.phasor = phasors[r.frame](r.x, r.y);
          }
        } else {
          q.sensor = Sensor::kRgb;
          q.kind = Supervision::kRgb;
          const Image& img = data.frames[r.frame].rgb;
          q.rgb = Vec3(img(r.x, r.y, 0), img(r.x, r.y, 1), img(r.x, r.y, 2));
        }
        batch.push_back(q);
      }

      grad.set_zero();
      const LossBreakdown lb = evaluate_batch(batch, fields, poses, rig, weights, opt, &grad);
      const std::string bad = grad.first_non_finite_block();
      if (!std::isfinite(lb.total) || !bad.empty())
        throw std::runtime_error("train: non-finite " + (bad.empty() ? std::string("loss") : "gradient in block '" + bad + "'") +
                                 " at iteration " + std::to_string(it));

      TraceRow row;
      row.iteration = it;
      row.lambda = weights.lambda;
      const double mean = lb.total / static_cast<double>(std::max<std::size_t>(1, count));
      double& first = tof_turn ? first_tof : first_rgb;
      if (first < 0.0) first = std::max(mean, 1e-300);
      if (mean > cfg.divergence_factor * first)
        throw std::runtime_error("train: diverged at iteration " + std::to_string(it) + " (loss " +
                                 std::to_string(mean) + ", initial " + std::to_string(first) + ")");
      const double per_ray = 1.0 / static_cast<double>(std::max<std::size_t>(1, count));
      if (tof_turn)
        row.tof_loss = (cfg.mode == SupervisionMode::kDepth ? lb.depth : lb.tof) * per_ray;
      else
        row.rgb_loss = lb.rgb * per_ray;

      // Updates.
      const double progress = static_cast<double>(it) / static_cast<double>(cfg.iterations);
      const double lr_f = cfg.lr_fields * std::pow(cfg.lr_final_fraction, progress);
      adam_stat.step(fields.stat.grid().params(), grad.stat, lr_f, cfg);
      if (fields.use_dynamic) adam_dyn.step(fields.dyn->grid().params(), grad.dyn, lr_f, cfg);
      const double lr_p = stage2 ? cfg.lr_pose_late : cfg.lr_pose_initial;
      if (cfg.optimize_poses) {
        if (cfg.anchor_first_frame) {
          grad.pose_rotation[0].setZero();
          grad.pose_translation[0].setZero();
        }
        std::vector<double> rot = flatten(poses.rotation);
        std::vector<double> trans = flatten(poses.translation);
        adam_rot.step(rot, flatten(grad.pose_rotation), lr_p, cfg);
        adam_trans.step(trans, flatten(grad.pose_translation), lr_p, cfg);
        unflatten(rot, poses.rotation);
        unflatten(trans, poses.translation);
      }
      if (cfg.optimize_relative) {
        std::array<double, 6> rel{poses.rel_rotation[0], poses.rel_rotation[1], poses.rel_rotation[2],
                                  poses.rel_translation[0], poses.rel_translation[1], poses.rel_translation[2]};
        const std::array<double, 6> g{grad.rel_rotation[0], grad.rel_rotation[1], grad.rel_rotation[2],
                                      grad.rel_translation[0], grad.rel_translation[1], grad.rel_translation[2]};
        adam_rel.step(rel, g, lr_p, cfg);
        poses.rel_rotation = Vec3(rel[0], rel[1], rel[2]);
        poses.rel_translation = Vec3(rel[3], rel[4], rel[5]);
      }
      poses.renormalize();

      if (!hooks.true_poses.empty()) {
        const std::vector<PoseError> errs = pose_errors(poses, hooks.true_poses);
        double sum = 0.0;
        for (const PoseError& e : errs) sum += e.translation_m;
        row.pose_error = sum / static_cast<double>(errs.size());
      }
      result.trace.push_back(row);
      if (hooks.on_iteration) hooks.on_iteration(row);
    }
  } catch (...) {
    fields.use_dynamic = had_dynamic;
    throw;
  }
  fields.use_dynamic = had_dynamic;
  return result;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  auto cell = [&](double v) {
    if (std::isfinite(v)) out << v;
  };
  out.precision(10);
  out << "iteration,rgb_loss,tof_loss,lambda,pose_error\n";
  for (const TraceRow& r : trace) {
    out << r.iteration << ",";
    cell(r.rgb_loss);
    out << ",";
    cell(r.tof_loss);
    out << ",";
    cell(r.lambda);
    out << ",";
    cell(r.pose_error);
    out << "\n";
  }
}

}  // namespace torf
