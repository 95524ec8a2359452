#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "casdet/cloud.hpp"
#include "casdet/errors.hpp"
#include "casdet/rng.hpp"

namespace casdet {

// Plane {p : normal . p + offset = 0} with |normal| = 1. The normal is
// oriented so the sensor origin has non-negative signed distance.
struct Plane {
  Eigen::Vector3d normal{0.0, 0.0, 1.0};
  double offset = 0.0;

  double signed_distance(const Eigen::Vector3d& p) const {
    return normal.dot(p) + offset;
  }

  Plane oriented_toward_origin() const {
    Plane out = *this;
    if (out.offset < 0.0) {
      out.normal = -out.normal;
      out.offset = -out.offset;
    }
    return out;
  }
};

namespace detail {

inline Plane fit_plane_least_squares(const std::vector<Eigen::Vector3d>& pts) {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector3d d = p - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Plane plane;
  plane.normal = es.eigenvectors().col(0).normalized();  // smallest eigenvalue
  plane.offset = -plane.normal.dot(centroid);
  return plane.oriented_toward_origin();
}

}  // namespace detail

// RANSAC over 3-point minimal samples with |signed distance| <= tau as the
// inlier test, followed by a least-squares refit on the largest inlier set.
// Deterministic for a given seed.
inline Plane estimate_ground_plane(const PointCloud& cloud, int iters = 200,
                                   double tau = 0.02, std::uint64_t seed = 0) {
  if (iters < 1) throw InvalidParams("estimate_ground_plane: iters must be >= 1");
  if (!(tau > 0.0)) throw InvalidParams("estimate_ground_plane: tau must be > 0");

  std::vector<Eigen::Vector3d> pts;
  pts.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (cloud.valid(i)) pts.push_back(cloud.points[i].cast<double>());

  if (pts.size() < 3)
    throw InsufficientPoints("estimate_ground_plane: need at least 3 valid points");

  auto rng = make_rng(derive_seed(seed, "ransac-plane"));
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);

  std::size_t best_count = 0;
  Eigen::Vector3d best_n = Eigen::Vector3d::Zero();
  double best_off = 0.0;
  bool found = false;

  for (int it = 0; it < iters; ++it) {
    std::size_t ia = pick(rng), ib = pick(rng), ic = pick(rng);
    if (ia == ib || ib == ic || ia == ic) continue;
    const Eigen::Vector3d& a = pts[ia];
    const Eigen::Vector3d ab = pts[ib] - a;
    const Eigen::Vector3d ac = pts[ic] - a;
    Eigen::Vector3d n = ab.cross(ac);
    const double scale = std::max(ab.norm(), ac.norm());
    if (n.norm() <= 1e-12 * std::max(1.0, scale * scale)) continue;  // collinear sample
    n.normalize();
    const double off = -n.dot(a);

    std::size_t count = 0;
    for (const auto& p : pts)
      if (std::abs(n.dot(p) + off) <= tau) ++count;

    if (!found || count > best_count) {
      found = true;
      best_count = count;
      best_n = n;
      best_off = off;
    }
  }

  if (!found)
    throw DegenerateGeometry("estimate_ground_plane: all minimal samples were collinear");

  std::vector<Eigen::Vector3d> inliers;
  inliers.reserve(best_count);
  for (const auto& p : pts)
    if (std::abs(best_n.dot(p) + best_off) <= tau) inliers.push_back(p);
  if (inliers.size() < 3)
    throw DegenerateGeometry("estimate_ground_plane: degenerate inlier set");

  return detail::fit_plane_least_squares(inliers);
}

// Heights of all valid points above the plane, as (point index, height) pairs.
// height = normal . p + offset, the signed distance of the point to the plane.
inline std::vector<std::pair<std::size_t, double>> signed_heights(const PointCloud& cloud,
                                                                  const Plane& plane) {
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud.valid(i)) continue;
    out.emplace_back(i, plane.signed_distance(cloud.points[i].cast<double>()));
  }
  return out;
}

}  // namespace casdet
