// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/scene_sim.hpp"

#include "torf/io.hpp"
#include "torf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace torf {

namespace {

constexpr double kMinRange = 1e-9;

Vec3 checker_rgb(const Material& m, bool alt) { return alt ? m.rgb_alt : m.rgb; }

// Checker parity in the primitive's own frame. Planar faces skip the axis
// along their normal so the pattern does not flicker with rounding.
bool checker_alt(const Primitive& p, const Vec3& local, const Vec3& normal) {
  const double s = p.material.checker_size;
  if (s <= 0.0) return false;
  int skip = -1;
  if (p.kind != PrimitiveKind::kSphere) normal.cwiseAbs().maxCoeff(&skip);
  long sum = 0;
  for (int i = 0; i < 3; ++i)
    if (i != skip) sum += static_cast<long>(std::floor(local[i] / s));
  return (sum & 1L) != 0;
}

struct RawHit {
  double t = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::Zero();
};

std::optional<RawHit> intersect(const Primitive& p, const Vec3& o, const Vec3& d) {
  RawHit h;
  switch (p.kind) {
    case PrimitiveKind::kPlane: {
      const double dn = d.dot(p.normal);
      if (std::abs(dn) < 1e-15) return std::nullopt;
      h.t = (p.point - o).dot(p.normal) / dn;
      h.normal = dn < 0.0 ? p.normal : Vec3(-p.normal);
      break;
    }
    case PrimitiveKind::kSphere: {
      const Vec3 oc = o - p.center;
      const double b = oc.dot(d);
      const double c = oc.squaredNorm() - p.radius * p.radius;
      const double disc = b * b - c;
      if (disc < 0.0) return std::nullopt;
      const double sq = std::sqrt(disc);
      h.t = -b - sq;
      if (h.t <= kMinRange) h.t = -b + sq;
      const Vec3 n = (o + h.t * d - p.center) / p.radius;
      h.normal = n.dot(d) < 0.0 ? n : Vec3(-n);
      break;
    }
    case PrimitiveKind::kBox: {
      double t0 = -std::numeric_limits<double>::infinity();
      double t1 = std::numeric_limits<double>::infinity();
      int a0 = -1;
      int a1 = -1;
      for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-15) {
          if (o[i] < p.box_min[i] || o[i] > p.box_max[i]) return std::nullopt;
          continue;
        }
        double lo = (p.box_min[i] - o[i]) / d[i];
        double hi = (p.box_max[i] - o[i]) / d[i];
        if (lo > hi) std::swap(lo, hi);
        if (lo > t0) { t0 = lo; a0 = i; }
        if (hi < t1) { t1 = hi; a1 = i; }
      }
      if (t0 > t1) return std::nullopt;
      int axis = a0;
      h.t = t0;
      if (t0 <= kMinRange) {
        h.t = t1;
        axis = a1;
      }
      if (axis < 0) return std::nullopt;
      h.normal = Vec3::Zero();
      h.normal[axis] = d[axis] > 0.0 ? -1.0 : 1.0;
      break;
    }
  }
  if (!(h.t > kMinRange) || !std::isfinite(h.t)) return std::nullopt;
  return h;
}

}  // namespace

Vec3 Primitive::offset_at(double tau) const {
  if (motion.empty()) return Vec3::Zero();
  if (tau <= motion.front().tau) return motion.front().offset;
  if (tau >= motion.back().tau) return motion.back().offset;
  for (std::size_t i = 1; i < motion.size(); ++i) {
    if (tau <= motion[i].tau) {
      const MotionKey& a = motion[i - 1];
      const MotionKey& b = motion[i];
      const double s = (tau - a.tau) / (b.tau - a.tau);
      return (1.0 - s) * a.offset + s * b.offset;
    }
  }
  return motion.back().offset;
}

void Primitive::validate() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(reflectivity)) throw std::invalid_argument("primitive: reflectivity must be in [0, 1]");
  if (!in01(material.ir) || !in01(material.ir_alt))
    throw std::invalid_argument("primitive: ir albedo must be in [0, 1]");
  for (int c = 0; c < 3; ++c)
    if (!in01(material.rgb[c]) || !in01(material.rgb_alt[c]))
      throw std::invalid_argument("primitive: rgb albedo must be in [0, 1]");
  if (material.checker_size < 0.0) throw std::invalid_argument("primitive: checker size must be >= 0");
  switch (kind) {
    case PrimitiveKind::kPlane:
      if (std::abs(normal.norm() - 1.0) > 1e-6) throw std::invalid_argument("plane: normal must be unit length");
      break;
    case PrimitiveKind::kSphere:
      if (!(radius > 0.0)) throw std::invalid_argument("sphere: radius must be > 0");
      break;
    case PrimitiveKind::kBox:
      if (!(box_min.array() < box_max.array()).all()) throw std::invalid_argument("box: need min < max");
      break;
  }
  for (std::size_t i = 1; i < motion.size(); ++i)
    if (!(motion[i].tau > motion[i - 1].tau))
      throw std::invalid_argument("primitive: motion keys must have increasing tau");
}

void AnalyticScene::validate() const {
  if (primitives.empty()) throw std::invalid_argument("scene: at least one primitive is required");
  for (const Primitive& p : primitives) p.validate();
  if (!(ambient >= 0.0)) throw std::invalid_argument("scene: ambient must be >= 0");
}

std::optional<std::pair<Vec3, Vec3>> AnalyticScene::bounds() const {
  std::optional<std::pair<Vec3, Vec3>> box;
  auto grow = [&](const Vec3& lo, const Vec3& hi) {
    if (!box) box = std::make_pair(lo, hi);
    box->first = box->first.cwiseMin(lo);
    box->second = box->second.cwiseMax(hi);
  };
  for (const Primitive& p : primitives) {
    std::vector<Vec3> offsets{Vec3::Zero()};
    if (!p.motion.empty()) {
      offsets.clear();
      for (const MotionKey& k : p.motion) offsets.push_back(k.offset);
    }
    for (const Vec3& off : offsets) {
      if (p.kind == PrimitiveKind::kSphere)
        grow(p.center + off - Vec3::Constant(p.radius), p.center + off + Vec3::Constant(p.radius));
      else if (p.kind == PrimitiveKind::kBox)
        grow(p.box_min + off, p.box_max + off);
    }
  }
  return box;
}

std::optional<Hit> trace_first_hit(const AnalyticScene& scene, const Ray& ray, double tau,
                                   std::optional<std::size_t> skip) {
  const Vec3 d = ray.direction.normalized();
  std::optional<Hit> best;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    if (skip && *skip == i) continue;
    const Primitive& p = scene.primitives[i];
    const Vec3 off = p.offset_at(tau);
    // Moving primitives: intersect in the primitive's rest frame.
    const auto raw = intersect(p, ray.origin - off, d);
    if (!raw || (best && raw->t >= best->depth)) continue;
    Hit h;
    h.depth = raw->t;
    h.point = ray.origin + raw->t * d;
    h.normal = raw->normal;
    h.primitive = i;
    const bool alt = checker_alt(p, h.point - off, h.normal);
    h.rgb = checker_rgb(p.material, alt) * scene.ambient;
    h.ir_albedo = alt ? p.material.ir_alt : p.material.ir;
    h.ir_energy = h.ir_albedo * std::abs(h.normal.dot(d)) / (h.depth * h.depth);
    best = h;
  }
  return best;
}

PathContributions trace_paths(const AnalyticScene& scene, const Ray& ray, double tau,
                              const ToFModel& model) {
  PathContributions out;
  const auto hit = trace_first_hit(scene, ray, tau);
  if (!hit) return out;
  const double c = model.light_speed;
  const double intensity = model.source_intensity;
  out.direct = Impulse{2.0 * hit->depth / c, intensity * hit->ir_energy};
  const double rho = scene.primitives[hit->primitive].reflectivity;
  if (rho > 0.0) {
    const Vec3 d = ray.direction.normalized();
    const Vec3 r = d - 2.0 * d.dot(hit->normal) * hit->normal;
    Ray bounce{hit->point, r, 0.0, std::numeric_limits<double>::infinity()};
    const auto second = trace_first_hit(scene, bounce, tau, hit->primitive);
    if (second) {
      const double total = hit->depth + second->depth;
      const double cosine = std::abs(second->normal.dot(r));
      out.mirrored = Impulse{2.0 * total / c,
                             rho * intensity * second->ir_albedo * cosine / (total * total)};
    }
  }
  return out;
}

void CaptureConfig::validate() const {
  if (trajectory.empty()) throw std::invalid_argument("capture: trajectory must not be empty");
  if (!times.empty() && times.size() != trajectory.size())
    throw std::invalid_argument("capture: 'times' must match the trajectory length");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("capture: noise_std must be >= 0");
  if (supersample < 1) throw std::invalid_argument("capture: supersample must be >= 1");
  rig.rgb.validate();
  rig.tof.validate();
  rig.model.validate();
  for (const Pose& p : trajectory) p.validate();
}

double CaptureConfig::time_of(std::size_t frame) const {
  if (!times.empty()) return times.at(frame);
  if (trajectory.size() <= 1) return 0.0;
  return static_cast<double>(frame) / static_cast<double>(trajectory.size() - 1);
}

SensorRig default_rig() {
  SensorRig rig;
  rig.rgb = Intrinsics{300.0, 300.0, 160.0, 120.0, 320, 240};
  rig.tof = rig.rgb;
  rig.tof_in_rgb.translation = Vec3(0.041, 0.0, 0.0);
  rig.model = ToFModel{};
  return rig;
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = (-up).cross(z);
  if (x.norm() < 1e-12) throw std::invalid_argument("look_at: view direction parallel to up");
  x.normalize();
  const Vec3 y = z.cross(x);
  Pose p;
  p.rotation.col(0) = x;
  p.rotation.col(1) = y;
  p.rotation.col(2) = z;
  p.translation = eye;
  return p;
}

Frame capture_frame(const AnalyticScene& scene, const CaptureConfig& cfg, std::size_t frame) {
  scene.validate();
  cfg.validate();
  if (frame >= cfg.trajectory.size()) throw std::out_of_range("capture_frame: frame index out of range");
  const SensorRig& rig = cfg.rig;
  Frame out;
  out.tau = cfg.time_of(frame);
  out.rig_pose = cfg.trajectory[frame];

  const Camera rgb_cam{rig.rgb, out.rig_pose};
  out.rgb = Image(rig.rgb.width, rig.rgb.height, 3);
  parallel_for(out.rgb.pixel_count(), [&](std::size_t i) {
    const int x = static_cast<int>(i % rig.rgb.width);
    const int y = static_cast<int>(i / rig.rgb.width);
    const Ray ray = generate_ray(rgb_cam, x, y, rig.t_near, rig.t_far);
    const auto hit = trace_first_hit(scene, ray, out.tau);
    const Vec3 c = hit ? hit->rgb : scene.background;
    for (int k = 0; k < 3; ++k) out.rgb(x, y, k) = c[k];
  });

  const Camera tof_cam{rig.tof, rig.sensor_pose(out.rig_pose, Sensor::kTof)};
  out.quad = QuadImage(rig.tof.width, rig.tof.height);
  out.depth_gt = Image(rig.tof.width, rig.tof.height, 1);
  const int k = cfg.supersample;
  const double sub_weight = 1.0 / static_cast<double>(k * k);
  parallel_for(static_cast<std::size_t>(rig.tof.width) * rig.tof.height, [&](std::size_t i) {
    const int x = static_cast<int>(i % rig.tof.width);
    const int y = static_cast<int>(i / rig.tof.width);
    const Ray center = generate_ray(tof_cam, x, y, rig.t_near, rig.t_far);
    const auto center_hit = trace_first_hit(scene, center, out.tau);
    out.depth_gt(x, y, 0) = center_hit ? center_hit->depth : 0.0;

    std::vector<Impulse> impulses;
    for (int sy = 0; sy < k; ++sy) {
      for (int sx = 0; sx < k; ++sx) {
        Ray ray = center;
        if (k > 1) {
          const double px = x + (sx + 0.5) / k - 0.5;
          const double py = y + (sy + 0.5) / k - 0.5;
          ray.direction = (tof_cam.pose.rotation * camera_direction(rig.tof, px, py)).normalized();
        }
        const PathContributions paths = trace_paths(scene, ray, out.tau, rig.model);
        if (paths.direct) impulses.push_back({paths.direct->delay, paths.direct->energy * sub_weight});
        if (paths.mirrored) impulses.push_back({paths.mirrored->delay, paths.mirrored->energy * sub_weight});
      }
    }
    const QuadImage q = simulate_quad_exposures(TemporalResponse::from_unsorted(std::move(impulses)),
                                                rig.model, rig.n_periods);
    std::mt19937_64 rng(mix_seed(cfg.seed, frame, i));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int p = 0; p < 4; ++p)
      out.quad.at(x, y, p) = q.at(0, 0, p) + (cfg.noise_std > 0.0 ? cfg.noise_std * noise(rng) : 0.0);
  });
  return out;
}

Dataset capture_dataset(const AnalyticScene& scene, const CaptureConfig& cfg) {
  Dataset data;
  data.rig = cfg.rig;
  data.scene_bounds = scene.bounds();
  for (std::size_t f = 0; f < cfg.trajectory.size(); ++f) data.frames.push_back(capture_frame(scene, cfg, f));
  return data;
}

Dataset capture_dataset(const AnalyticScene& scene, const CaptureConfig& cfg,
                        const std::filesystem::path& dir) {
  Dataset data = capture_dataset(scene, cfg);
  save_dataset(data, dir);
  return data;
}

Dataset render_dataset(const RadianceFieldSet& fields, const SensorRig& rig,
                       std::span<const Pose> rig_poses, std::span<const double> times,
                       const RenderOptions& opt) {
  if (times.size() != rig_poses.size()) throw std::invalid_argument("render_dataset: times/poses mismatch");
  Dataset data;
  data.rig = rig;
  const ViewBounds bounds{rig.t_near, rig.t_far};
  for (std::size_t f = 0; f < rig_poses.size(); ++f) {
    Frame frame;
    frame.tau = times[f];
    frame.rig_pose = rig_poses[f];
    const Camera rgb_cam{rig.rgb, frame.rig_pose};
    const Camera tof_cam{rig.tof, rig.sensor_pose(frame.rig_pose, Sensor::kTof)};
    frame.rgb = render_image(rgb_cam, fields, frame.tau, rig.model, RenderMode::kRgb, opt, bounds, 2 * f);
    const PhasorImage tof = PhasorImage::from_image(
        render_image(tof_cam, fields, frame.tau, rig.model, RenderMode::kTof, opt, bounds, 2 * f + 1));
    PhasorImage scaled = tof;
    for (Phasor& v : scaled.data()) v *= rig.phasor_scale();
    frame.quad = QuadImage::from_phasors(scaled);
    frame.depth_gt = render_image(tof_cam, fields, frame.tau, rig.model, RenderMode::kDepth, opt, bounds, 2 * f + 1);
    data.frames.push_back(std::move(frame));
  }
  return data;
}

// ---------------------------------------------------------------- JSON

namespace {

const char* kind_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::kPlane: return "plane";
    case PrimitiveKind::kSphere: return "sphere";
    case PrimitiveKind::kBox: return "box";
  }
  return "plane";
}

Material material_from_json(const nlohmann::json& j) {
  Material m;
  if (j.contains("rgb")) m.rgb = vec3_from_json(j.at("rgb"));
  m.ir = j.value("ir", m.ir);
  if (j.contains("checker")) {
    const auto& c = j.at("checker");
    m.checker_size = c.at("size").get<double>();
    m.rgb_alt = c.contains("rgb") ? vec3_from_json(c.at("rgb")) : m.rgb;
    m.ir_alt = c.value("ir", m.ir);
  }
  return m;
}

nlohmann::json material_to_json(const Material& m) {
  nlohmann::json j{{"rgb", to_json(m.rgb)}, {"ir", m.ir}};
  if (m.checker_size > 0.0)
    j["checker"] = {{"size", m.checker_size}, {"rgb", to_json(m.rgb_alt)}, {"ir", m.ir_alt}};
  return j;
}

}  // namespace

AnalyticScene scene_from_json(const nlohmann::json& j) {
  AnalyticScene scene;
  scene.ambient = j.value("ambient", scene.ambient);
  if (j.contains("background")) scene.background = vec3_from_json(j.at("background"));
  if (!j.contains("primitives") || !j.at("primitives").is_array())
    throw FormatError("scene: 'primitives' array is required");
  std::size_t index = 0;
  for (const auto& pj : j.at("primitives")) {
    const std::string where = "scene: primitives[" + std::to_string(index++) + "]";
    try {
      Primitive p;
      const std::string type = pj.at("type").get<std::string>();
      if (type == "plane") {
        p.kind = PrimitiveKind::kPlane;
        p.point = vec3_from_json(pj.at("point"));
        p.normal = vec3_from_json(pj.at("normal")).normalized();
      } else if (type == "sphere") {
        p.kind = PrimitiveKind::kSphere;
        p.center = vec3_from_json(pj.at("center"));
        p.radius = pj.at("radius").get<double>();
      } else if (type == "box") {
        p.kind = PrimitiveKind::kBox;
        p.box_min = vec3_from_json(pj.at("min"));
        p.box_max = vec3_from_json(pj.at("max"));
      } else {
        throw FormatError("unknown type '" + type + "'");
      }
      if (pj.contains("material")) p.material = material_from_json(pj.at("material"));
      if (pj.contains("motion"))
        for (const auto& k : pj.at("motion"))
          p.motion.push_back({k.at("tau").get<double>(), vec3_from_json(k.at("offset"))});
      p.reflectivity = pj.value("reflectivity", 0.0);
      p.validate();
      scene.primitives.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  try {
    scene.validate();
  } catch (const std::exception& e) {
    throw FormatError(e.what());
  }
  return scene;
}

nlohmann::json to_json(const AnalyticScene& scene) {
  nlohmann::json prims = nlohmann::json::array();
  for (const Primitive& p : scene.primitives) {
    nlohmann::json j{{"type", kind_name(p.kind)}};
    switch (p.kind) {
      case PrimitiveKind::kPlane:
        j["point"] = to_json(p.point);
        j["normal"] = to_json(p.normal);
        break;
      case PrimitiveKind::kSphere:
        j["center"] = to_json(p.center);
        j["radius"] = p.radius;
        break;
      case PrimitiveKind::kBox:
        j["min"] = to_json(p.box_min);
        j["max"] = to_json(p.box_max);
        break;
    }
    j["material"] = material_to_json(p.material);
    if (!p.motion.empty()) {
      nlohmann::json keys = nlohmann::json::array();
      for (const MotionKey& k : p.motion) keys.push_back({{"tau", k.tau}, {"offset", to_json(k.offset)}});
      j["motion"] = keys;
    }
    if (p.reflectivity > 0.0) j["reflectivity"] = p.reflectivity;
    prims.push_back(j);
  }
  return {{"ambient", scene.ambient}, {"background", to_json(scene.background)}, {"primitives", prims}};
}

CaptureConfig capture_config_from_json(const nlohmann::json& j) {
  CaptureConfig cfg;
  try {
    cfg.rig = rig_from_json(j.value("rig", nlohmann::json::object()), default_rig());
  } catch (const std::exception& e) {
    throw FormatError(std::string("capture: rig: ") + e.what());
  }
  if (!j.contains("trajectory") || !j.at("trajectory").is_array())
    throw FormatError("capture: 'trajectory' array is required");
  std::size_t index = 0;
  for (const auto& pj : j.at("trajectory")) {
    try {
      if (pj.contains("eye")) {
        const Vec3 up = pj.contains("up") ? vec3_from_json(pj.at("up")) : Vec3::UnitY();
        cfg.trajectory.push_back(look_at(vec3_from_json(pj.at("eye")), vec3_from_json(pj.at("target")), up));
      } else {
        cfg.trajectory.push_back(pose_from_json(pj));
      }
    } catch (const std::exception& e) {
      throw FormatError("capture: trajectory[" + std::to_string(index) + "]: " + e.what());
    }
    ++index;
  }
  try {
    if (j.contains("times")) cfg.times = j.at("times").get<std::vector<double>>();
    cfg.noise_std = j.value("noise_std", 0.0);
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.supersample = j.value("supersample", 1);
    cfg.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("capture: ") + e.what());
  }
  return cfg;
}

nlohmann::json to_json(const CaptureConfig& cfg) {
  nlohmann::json traj = nlohmann::json::array();
  for (const Pose& p : cfg.trajectory) traj.push_back(to_json(p));
  nlohmann::json j{{"rig", to_json(cfg.rig)},
                   {"trajectory", traj},
                   {"noise_std", cfg.noise_std},
                   {"seed", cfg.seed},
                   {"supersample", cfg.supersample}};
  if (!cfg.times.empty()) j["times"] = cfg.times;
  return j;
}

}  // namespace torf
