#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "casdet/cloud.hpp"
#include "casdet/errors.hpp"
#include "casdet/plane.hpp"
#include "casdet/rng.hpp"

namespace casdet {

// ---------------------------------------------------------------------------
// Body parameterization
// ---------------------------------------------------------------------------

struct BodyParams {
  double stature_mm = 1700.0;
  double bmi = 25.0;          // kg/m^2
  double shs = 0.5;           // erect sitting height / stature
  double age = 40.0;          // years
  double orientation_deg = 0.0;  // rotation about the ground normal
};

inline void validate(const BodyParams& p) {
  if (!(p.stature_mm >= 1200.0 && p.stature_mm <= 2200.0))
    throw InvalidParams("body stature out of range [1200, 2200] mm");
  if (!(p.bmi >= 15.0 && p.bmi <= 40.0))
    throw InvalidParams("body BMI out of range [15, 40]");
  if (!(p.shs > 0.3 && p.shs < 0.7))
    throw InvalidParams("body SHS out of range (0.3, 0.7)");
  if (!(p.orientation_deg > -180.0 && p.orientation_deg <= 180.0))
    throw InvalidParams("body orientation out of range (-180, 180]");
}

// Sphere-swept segment. p0 == p1 degenerates to a sphere.
struct Capsule {
  Eigen::Vector3d p0;
  Eigen::Vector3d p1;
  double radius;
};

// A lying body as a set of capsules resting on the z=0 plane, centered on the
// origin, with the head toward +axis.
struct BodyModel {
  std::vector<Capsule> primitives;
  Eigen::Vector3d axis{1.0, 0.0, 0.0};  // unit, in the ground plane
  double stature_m = 0.0;

  void translate(const Eigen::Vector3d& t) {
    for (auto& c : primitives) {
      c.p0 += t;
      c.p1 += t;
    }
  }
};

namespace detail {

// Radius of a capsule of axis length L and volume V:
// V = pi r^2 L + 4/3 pi r^3, solved by Newton iteration.
inline double capsule_radius_for_volume(double volume, double length) {
  const double pi = std::numbers::pi;
  double r = std::sqrt(volume / (pi * std::max(length, 0.05)));
  for (int i = 0; i < 12; ++i) {
    const double f = pi * length * r * r + (4.0 / 3.0) * pi * r * r * r - volume;
    const double df = 2.0 * pi * length * r + 4.0 * pi * r * r;
    r -= f / df;
  }
  return r;
}

}  // namespace detail

// Procedural lying-body synthesis. Stature fixes the axial extent, SHS splits
// it between torso and legs, BMI sets the segment volumes (radii grow
// monotonically with BMI), age adds a mild shoulder slump, and a small seeded
// jitter varies proportions between individuals.
inline BodyModel synth_body(const BodyParams& params, std::uint64_t seed) {
  validate(params);
  auto rng = make_rng(derive_seed(seed, "body-jitter"));
  std::uniform_real_distribution<double> jr(0.96, 1.04);
  std::uniform_real_distribution<double> jy(0.95, 1.05);

  const double S = params.stature_mm / 1000.0;
  const double volume = params.bmi * S * S / 1000.0;  // body density ~1000 kg/m^3

  const double head_r = (S / 15.0) * jr(rng);
  const double hip_x = S - params.shs * S;    // leg length
  const double neck_x = S - 2.0 * head_r - 0.01 * S;
  const double torso_len = neck_x - hip_x;

  const double torso_r = detail::capsule_radius_for_volume(0.40 * volume, torso_len) * jr(rng);
  const double pelvis_w = 0.09 * S * jy(rng);
  const double pelvis_r =
      detail::capsule_radius_for_volume(0.12 * volume, 2.0 * pelvis_w) * jr(rng);

  const double age_t = std::clamp((params.age - 20.0) / 60.0, 0.0, 1.0);
  const double shoulder_drop = 0.05 * S * age_t;

  // Legs: hip joints to ankles, feet capped at x = 0.
  const double leg_vol = 0.14 * volume;
  double leg_r = detail::capsule_radius_for_volume(leg_vol, hip_x);
  leg_r = detail::capsule_radius_for_volume(leg_vol, std::max(hip_x - leg_r, 0.05)) * jr(rng);
  const double ankle_x = leg_r;
  const double hip_y = 0.055 * S * jy(rng);
  const double ankle_y = 0.07 * S * jy(rng);

  // Arms alongside the torso.
  const double arm_vol = 0.05 * volume;
  const double shoulder_x = neck_x - 0.04 * S - shoulder_drop;
  const double wrist_x = hip_x - 0.05 * S;
  const double arm_len = std::max(shoulder_x - wrist_x, 0.05);
  const double arm_r = detail::capsule_radius_for_volume(arm_vol, arm_len) * jr(rng);
  const double arm_y = torso_r + 0.75 * arm_r;

  BodyModel body;
  body.stature_m = S;
  auto lying = [](double x0, double y0, double x1, double y1, double r) {
    return Capsule{{x0, y0, r}, {x1, y1, r}, r};
  };
  // torso
  body.primitives.push_back(lying(hip_x, 0.0, neck_x, 0.0, torso_r));
  // pelvis
  body.primitives.push_back(lying(hip_x, -pelvis_w, hip_x, pelvis_w, pelvis_r));
  // head
  body.primitives.push_back(lying(S - head_r, 0.0, S - head_r, 0.0, head_r));
  // legs
  body.primitives.push_back(lying(hip_x, -hip_y, ankle_x, -ankle_y, leg_r));
  body.primitives.push_back(lying(hip_x, hip_y, ankle_x, ankle_y, leg_r));
  // arms
  body.primitives.push_back(lying(shoulder_x, -arm_y, wrist_x, -arm_y, arm_r));
  body.primitives.push_back(lying(shoulder_x, arm_y, wrist_x, arm_y, arm_r));

  // Center on the body midpoint, then orient about the ground normal.
  const double theta = params.orientation_deg * std::numbers::pi / 180.0;
  const Eigen::AngleAxisd rot(theta, Eigen::Vector3d::UnitZ());
  for (auto& c : body.primitives) {
    c.p0.x() -= S / 2.0;
    c.p1.x() -= S / 2.0;
    c.p0 = rot * c.p0;
    c.p1 = rot * c.p1;
  }
  body.axis = rot * Eigen::Vector3d::UnitX();
  return body;
}

// ---------------------------------------------------------------------------
// Scene
// ---------------------------------------------------------------------------

struct Box {
  Eigen::Vector3d center;
  Eigen::Vector3d half;  // half extents
  double yaw = 0.0;      // about world z
};

struct VCylinder {
  double cx = 0.0, cy = 0.0;
  double z0 = 0.0, z1 = 1.0;
  double radius = 0.5;
};

enum class SceneLabel { non_casualty = 0, casualty = 1 };

struct Scene {
  Plane ground;  // world frame
  std::optional<BodyModel> body;
  std::optional<BodyParams> body_params;
  Eigen::Vector2d body_pos{0.0, 0.0};
  std::vector<Box> boxes;
  std::vector<VCylinder> cylinders;
  SceneLabel label = SceneLabel::non_casualty;
  std::uint64_t seed = 0;
};

struct CameraModel {
  int width = 160;
  int height = 120;
  double fx = 120.0, fy = 120.0;
  double cx = 80.0, cy = 60.0;
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();  // camera -> world
  double min_depth = 0.2;
  double max_depth = 8.0;

  // Forward-facing camera on a small ground robot: position in world
  // coordinates, pitched down from the horizon. World: x forward, y left,
  // z up. Camera: x right, y down, z forward (optical axis).
  static CameraModel with_pose(const Eigen::Vector3d& position, double pitch_deg,
                               int width = 160, int height = 120, double focal = 120.0) {
    CameraModel cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = focal;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    const double p = pitch_deg * std::numbers::pi / 180.0;
    Eigen::Matrix3d r;
    // columns: camera x, y, z axes expressed in world coordinates
    r.col(0) = Eigen::Vector3d(0.0, -1.0, 0.0);
    r.col(1) = Eigen::Vector3d(-std::sin(p), 0.0, -std::cos(p));
    r.col(2) = Eigen::Vector3d(std::cos(p), 0.0, -std::sin(p));
    cam.pose = Eigen::Isometry3d::Identity();
    cam.pose.linear() = r;
    cam.pose.translation() = position;
    return cam;
  }

  static CameraModel desk_default() {
    return with_pose(Eigen::Vector3d(0.0, 0.0, 0.4), 25.0);
  }
};

inline void validate(const CameraModel& cam) {
  if (cam.width < 1 || cam.height < 1) throw InvalidParams("camera resolution must be >= 1");
  if (!(cam.fx > 0.0 && cam.fy > 0.0)) throw InvalidParams("camera focal lengths must be > 0");
  if (!(cam.cx >= 0.0 && cam.cx < cam.width && cam.cy >= 0.0 && cam.cy < cam.height))
    throw InvalidParams("camera principal point out of bounds");
}

// ---------------------------------------------------------------------------
// Ray casting
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kRayEps = 1e-9;
inline constexpr double kMiss = std::numeric_limits<double>::infinity();

inline double ray_sphere(const Eigen::Vector3d& ro, const Eigen::Vector3d& rd,
                         const Eigen::Vector3d& center, double radius) {
  const Eigen::Vector3d oc = ro - center;
  const double b = oc.dot(rd);
  const double c = oc.dot(oc) - radius * radius;
  const double h = b * b - c;
  if (h < 0.0) return kMiss;
  const double sq = std::sqrt(h);
  const double t0 = -b - sq;
  if (t0 > kRayEps) return t0;
  const double t1 = -b + sq;
  if (t1 > kRayEps) return t1;
  return kMiss;
}

inline double ray_capsule(const Eigen::Vector3d& ro, const Eigen::Vector3d& rd,
                          const Capsule& cap) {
  const Eigen::Vector3d ba = cap.p1 - cap.p0;
  const double baba = ba.dot(ba);
  if (baba < 1e-18) return ray_sphere(ro, rd, cap.p0, cap.radius);

  const Eigen::Vector3d oa = ro - cap.p0;
  const double bard = ba.dot(rd);
  const double baoa = ba.dot(oa);
  const double rdoa = rd.dot(oa);
  const double oaoa = oa.dot(oa);
  const double k2 = baba - bard * bard;
  const double k1 = baba * rdoa - baoa * bard;
  const double k0 = baba * oaoa - baoa * baoa - cap.radius * cap.radius * baba;

  double best = kMiss;
  if (k2 > 1e-12 * baba) {  // ray not parallel to the axis
    const double h = k1 * k1 - k2 * k0;
    if (h >= 0.0) {
      const double sq = std::sqrt(h);
      for (const double t : {(-k1 - sq) / k2, (-k1 + sq) / k2}) {
        if (t > kRayEps && t < best) {
          const double y = baoa + t * bard;
          if (y >= 0.0 && y <= baba) best = t;
        }
      }
    }
  }
  best = std::min(best, ray_sphere(ro, rd, cap.p0, cap.radius));
  best = std::min(best, ray_sphere(ro, rd, cap.p1, cap.radius));
  return best;
}

inline double ray_box(const Eigen::Vector3d& ro, const Eigen::Vector3d& rd, const Box& box) {
  const double c = std::cos(-box.yaw), s = std::sin(-box.yaw);
  auto to_local = [&](const Eigen::Vector3d& v) {
    return Eigen::Vector3d(c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z());
  };
  const Eigen::Vector3d p = to_local(ro - box.center);
  const Eigen::Vector3d q = to_local(rd);

  double tmin = -kMiss, tmax = kMiss;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(q[i]) < 1e-12) {
      if (std::abs(p[i]) > box.half[i]) return kMiss;
      continue;
    }
    double t1 = (-box.half[i] - p[i]) / q[i];
    double t2 = (box.half[i] - p[i]) / q[i];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
  }
  if (tmax < std::max(tmin, kRayEps)) return kMiss;
  return tmin > kRayEps ? tmin : tmax;
}

inline double ray_vcylinder(const Eigen::Vector3d& ro, const Eigen::Vector3d& rd,
                            const VCylinder& cyl) {
  const double ox = ro.x() - cyl.cx, oy = ro.y() - cyl.cy;
  const double dx = rd.x(), dy = rd.y();
  double best = kMiss;

  const double a = dx * dx + dy * dy;
  if (a > 1e-14) {
    const double b = ox * dx + oy * dy;
    const double c0 = ox * ox + oy * oy - cyl.radius * cyl.radius;
    const double h = b * b - a * c0;
    if (h >= 0.0) {
      const double sq = std::sqrt(h);
      for (const double t : {(-b - sq) / a, (-b + sq) / a}) {
        if (t > kRayEps && t < best) {
          const double z = ro.z() + t * rd.z();
          if (z >= cyl.z0 && z <= cyl.z1) best = t;
        }
      }
    }
  }
  if (std::abs(rd.z()) > 1e-12) {
    for (const double zc : {cyl.z0, cyl.z1}) {
      const double t = (zc - ro.z()) / rd.z();
      if (t > kRayEps && t < best) {
        const double x = ox + t * dx, y = oy + t * dy;
        if (x * x + y * y <= cyl.radius * cyl.radius) best = t;
      }
    }
  }
  return best;
}

inline double ray_scene(const Eigen::Vector3d& ro, const Eigen::Vector3d& rd,
                        const Scene& scene) {
  double best = kMiss;
  const double denom = scene.ground.normal.dot(rd);
  if (std::abs(denom) > 1e-12) {
    const double t = -(scene.ground.normal.dot(ro) + scene.ground.offset) / denom;
    if (t > kRayEps) best = t;
  }
  if (scene.body)
    for (const auto& cap : scene.body->primitives)
      best = std::min(best, ray_capsule(ro, rd, cap));
  for (const auto& box : scene.boxes) best = std::min(best, ray_box(ro, rd, box));
  for (const auto& cyl : scene.cylinders) best = std::min(best, ray_vcylinder(ro, rd, cyl));
  return best;
}

}  // namespace detail

// Per-pixel ray cast through the pinhole model; nearest hit across the ground
// and all scene primitives. Points are returned in the sensor frame; misses
// and out-of-range depths become invalid entries.
inline PointCloud render_cloud(const Scene& scene, const CameraModel& camera) {
  validate(camera);
  PointCloud cloud = PointCloud::invalid_grid(camera.width, camera.height, "camera");
  const Eigen::Matrix3d rot = camera.pose.linear();
  const Eigen::Vector3d origin = camera.pose.translation();

  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      const Eigen::Vector3d dir_cam((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy,
                                    1.0);
      const double inv_norm = 1.0 / dir_cam.norm();
      const Eigen::Vector3d dhat_cam = dir_cam * inv_norm;
      const Eigen::Vector3d dhat_world = rot * dhat_cam;
      const double s = detail::ray_scene(origin, dhat_world, scene);
      if (!std::isfinite(s)) continue;
      const double depth = s * inv_norm;  // z in the camera frame
      if (depth < camera.min_depth || depth > camera.max_depth) continue;
      cloud.points[cloud.index(v, u)] = (s * dhat_cam).cast<float>();
    }
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Ranges for one labeled draw. Positions are in world coordinates on the
// ground; the defaults keep objects inside the desk camera's view.
struct SampleSpec {
  bool casualty = true;
  ParamRange stature_mm{1500.0, 2000.0};
  ParamRange bmi{20.0, 30.0};
  ParamRange shs{0.4, 0.6};
  ParamRange age{20.0, 80.0};
  ParamRange orientation_deg{-180.0, 180.0};
  ParamRange body_x{1.2, 2.2};
  ParamRange body_y{-0.45, 0.45};
  int min_distractors = 0;
  int max_distractors = 3;
  int pos_min_distractors = 0;
  int pos_max_distractors = 2;
  ParamRange distractor_extent{0.2, 1.5};
  ParamRange distractor_x{0.9, 2.6};
  ParamRange distractor_y{-0.8, 0.8};
  double body_clearance = 1.3;
  CameraModel camera = CameraModel::desk_default();
};

namespace detail {

inline double draw(std::mt19937_64& rng, const ParamRange& r) {
  std::uniform_real_distribution<double> d(r.lo, r.hi);
  return d(rng);
}

}  // namespace detail

// Deterministic scene construction: a pure function of (spec, seed).
inline Scene build_scene(const SampleSpec& spec, std::uint64_t seed) {
  auto rng = make_rng(derive_seed(seed, "scene"));
  Scene scene;
  scene.seed = seed;
  scene.ground = Plane{{0.0, 0.0, 1.0}, 0.0};
  scene.label = spec.casualty ? SceneLabel::casualty : SceneLabel::non_casualty;

  int n_distractors = 0;
  if (spec.casualty) {
    BodyParams params;
    params.stature_mm = detail::draw(rng, spec.stature_mm);
    params.bmi = detail::draw(rng, spec.bmi);
    params.shs = detail::draw(rng, spec.shs);
    params.age = detail::draw(rng, spec.age);
    params.orientation_deg = detail::draw(rng, spec.orientation_deg);
    if (params.orientation_deg <= -180.0) params.orientation_deg = 180.0;

    BodyModel body = synth_body(params, derive_seed(seed, "body"));
    const double bx = detail::draw(rng, spec.body_x);
    const double by = detail::draw(rng, spec.body_y);
    body.translate(Eigen::Vector3d(bx, by, 0.0));
    scene.body = std::move(body);
    scene.body_params = params;
    scene.body_pos = Eigen::Vector2d(bx, by);
    std::uniform_int_distribution<int> nd(spec.pos_min_distractors, spec.pos_max_distractors);
    n_distractors = nd(rng);
  } else {
    std::uniform_int_distribution<int> nd(spec.min_distractors, spec.max_distractors);
    n_distractors = nd(rng);
  }

  std::uniform_int_distribution<int> coin(0, 1);
  for (int k = 0; k < n_distractors; ++k) {
    double x = 0.0, y = 0.0;
    bool placed = false;
    for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
      x = detail::draw(rng, spec.distractor_x);
      y = detail::draw(rng, spec.distractor_y);
      placed = !spec.casualty ||
               (Eigen::Vector2d(x, y) - scene.body_pos).norm() >= spec.body_clearance;
    }
    if (!placed) continue;
    if (coin(rng) == 0) {
      Box box;
      box.half = Eigen::Vector3d(detail::draw(rng, spec.distractor_extent) / 2.0,
                                 detail::draw(rng, spec.distractor_extent) / 2.0,
                                 detail::draw(rng, spec.distractor_extent) / 2.0);
      std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
      box.yaw = yaw(rng);
      box.center = Eigen::Vector3d(x, y, box.half.z());
      scene.boxes.push_back(box);
    } else {
      VCylinder cyl;
      cyl.radius = detail::draw(rng, spec.distractor_extent) / 2.0;
      cyl.z0 = 0.0;
      cyl.z1 = detail::draw(rng, spec.distractor_extent);
      cyl.cx = x;
      cyl.cy = y;
      scene.cylinders.push_back(cyl);
    }
  }
  return scene;
}

inline std::pair<PointCloud, Scene> generate_sample(const SampleSpec& spec, std::uint64_t seed) {
  Scene scene = build_scene(spec, seed);
  PointCloud cloud = render_cloud(scene, spec.camera);
  return {std::move(cloud), std::move(scene)};
}

}  // namespace casdet
