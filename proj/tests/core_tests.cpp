// Seeding, parallel slots, PCD/PGM I/O, plane estimation, and heightmap
// rasterization, each checked against independent oracles computed in-test.

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "casdet/cloud.hpp"
#include "casdet/heightmap.hpp"
#include "casdet/parallel.hpp"
#include "casdet/plane.hpp"
#include "casdet/rng.hpp"

#include "helpers.hpp"

using namespace casdet;

TEST_CASE("derived seeds are deterministic and stream-separated") {
  CHECK(derive_seed(42, "alpha") == derive_seed(42, "alpha"));
  CHECK(derive_seed(42, "alpha") != derive_seed(42, "beta"));
  CHECK(derive_seed(42, "alpha", 0) != derive_seed(42, "alpha", 1));
  CHECK(derive_seed(42, "alpha") != derive_seed(43, "alpha"));

  // No collisions across a realistic block of work-item seeds.
  std::map<std::uint64_t, int> seen;
  for (int i = 0; i < 10000; ++i) ++seen[derive_seed(7, "items", i)];
  CHECK(seen.size() == 10000);
}

TEST_CASE("parallel_for matches serial execution and propagates exceptions") {
  const std::size_t n = 1000;
  std::vector<std::uint64_t> serial(n), parallel(n);
  auto work = [](std::size_t i) { return mix64(i * 2654435761ULL); };
  casdet::parallel_for(n, [&](std::size_t i) { serial[i] = work(i); }, 1);
  casdet::parallel_for(n, [&](std::size_t i) { parallel[i] = work(i); }, 7);
  CHECK(serial == parallel);

  CHECK_THROWS_AS(casdet::parallel_for(
                      100, [](std::size_t i) {
                        if (i == 57) throw std::runtime_error("boom");
                      },
                      4),
                  std::runtime_error);
}

// ---------------------------------------------------------------------------
// PCD
// ---------------------------------------------------------------------------

static std::string minimal_pcd(const std::string& dims_and_data) {
  return "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n" + dims_and_data;
}

TEST_CASE("parse_pcd reads a minimal one-point file") {
  const PointCloud c =
      parse_pcd(minimal_pcd("WIDTH 1\nHEIGHT 1\nPOINTS 1\nDATA ascii\n0 0 1\n"));
  REQUIRE(c.width == 1);
  REQUIRE(c.height == 1);
  REQUIRE(c.size() == 1);
  REQUIRE(c.valid(0));
  CHECK(c.points[0] == Eigen::Vector3f(0.0f, 0.0f, 1.0f));
}

TEST_CASE("PCD write/parse round-trips bit-exactly") {
  PointCloud cloud = testutil::random_cloud(17, 9, 123);
  cloud.invalidate(5);
  cloud.invalidate(100);
  // Awkward values: exact powers of two round-trip regardless, these do not.
  cloud.points[0] = Eigen::Vector3f(0.1f, -3.3333333f, 1e-7f);

  const std::string text = write_pcd(cloud);
  const PointCloud back = parse_pcd(text);
  REQUIRE(back.width == cloud.width);
  REQUIRE(back.height == cloud.height);
  REQUIRE(back.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    REQUIRE(back.valid(i) == cloud.valid(i));
    if (cloud.valid(i)) {
      // bit-exact: compare the float payloads directly
      CHECK(back.points[i].x() == cloud.points[i].x());
      CHECK(back.points[i].y() == cloud.points[i].y());
      CHECK(back.points[i].z() == cloud.points[i].z());
    }
  }
  CHECK(write_pcd(back) == text);
}

TEST_CASE("parse_pcd rejects malformed files") {
  CHECK_THROWS_AS(parse_pcd(minimal_pcd("WIDTH 2\nHEIGHT 1\nPOINTS 1\nDATA ascii\n0 0 1\n")),
                  ParseError);  // POINTS != WIDTH*HEIGHT
  CHECK_THROWS_AS(parse_pcd(minimal_pcd("WIDTH 1\nHEIGHT 1\nPOINTS 1\nDATA ascii\n")),
                  ParseError);  // missing record
  CHECK_THROWS_AS(
      parse_pcd(minimal_pcd("WIDTH 1\nHEIGHT 1\nPOINTS 1\nDATA ascii\n0 0 1\n2 2 2\n")),
      ParseError);  // trailing record
  CHECK_THROWS_AS(parse_pcd(minimal_pcd("WIDTH 1\nHEIGHT 1\nPOINTS 1\nDATA ascii\n0 0 x\n")),
                  ParseError);  // bad token
  CHECK_THROWS_AS(parse_pcd("VERSION 0.7\nFIELDS x y z rgb\n"), ParseError);
  CHECK_THROWS_AS(parse_pcd(""), ParseError);
}

TEST_CASE("parse_pcd maps nan records to invalid entries") {
  const PointCloud c =
      parse_pcd(minimal_pcd("WIDTH 2\nHEIGHT 1\nPOINTS 2\nDATA ascii\nnan nan nan\n1 2 3\n"));
  CHECK_FALSE(c.valid(0));
  CHECK(c.valid(1));
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

TEST_CASE("PGM write/parse round-trips") {
  Heightmap map = testutil::blank_map(9);
  for (std::size_t i = 0; i < map.cells.size(); ++i)
    map.cells[i] = static_cast<std::uint8_t>((i * 37) % 256);
  const std::string bytes = write_pgm(map);
  const GreyImage img = parse_pgm(bytes);
  REQUIRE(img.width == 9);
  REQUIRE(img.height == 9);
  CHECK(img.pixels == map.cells);

  CHECK_THROWS_AS(parse_pgm("P2\n1 1\n255\n0"), ParseError);
  CHECK_THROWS_AS(parse_pgm("P5\n2 2\n255\nab"), ParseError);  // truncated
  CHECK_THROWS_AS(parse_pgm("P5\n1 1\n65535\n aa"), ParseError);
}

// ---------------------------------------------------------------------------
// Plane estimation
// ---------------------------------------------------------------------------

TEST_CASE("estimate_ground_plane recovers an exact horizontal plane") {
  PointCloud cloud = PointCloud::invalid_grid(1000, 1);
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  for (auto& p : cloud.points) p = Eigen::Vector3f(d(rng), d(rng), 0.0f);

  const Plane plane = estimate_ground_plane(cloud, 200, 0.02, 1);
  CHECK(std::abs(plane.normal.norm() - 1.0) < 1e-9);
  CHECK(std::abs(std::abs(plane.normal.z()) - 1.0) < 1e-9);
  CHECK(std::abs(plane.offset) < 1e-6);
  CHECK(plane.offset >= 0.0);  // sign convention: origin on the non-negative side
}

TEST_CASE("signed heights match the plane equation") {
  const Plane ground{{0.0, 0.0, 1.0}, 0.0};
  PointCloud cloud = PointCloud::invalid_grid(3, 1);
  cloud.points[0] = Eigen::Vector3f(0.0f, 0.0f, 1.0f);
  cloud.points[1] = Eigen::Vector3f(5.0f, -2.0f, 0.0f);  // on the plane
  const auto heights = signed_heights(cloud, ground);
  REQUIRE(heights.size() == 2);  // invalid entry omitted
  CHECK(heights[0].first == 0);
  CHECK(heights[0].second == Catch::Approx(1.0));
  CHECK(heights[1].second == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("signed heights match a brute-force nearest-point search") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Plane plane;
    plane.normal = Eigen::Vector3d(d(rng), d(rng), 1.0 + std::abs(d(rng))).normalized();
    plane.offset = std::abs(d(rng));
    const Eigen::Vector3d p(d(rng), d(rng), d(rng) + 1.0);

    // Oracle: distance to the nearest point of a dense grid sampled on the
    // plane around the point's orthogonal projection.
    const Eigen::Vector3d foot = p - (plane.normal.dot(p) + plane.offset) * plane.normal;
    Eigen::Vector3d t1 = plane.normal.unitOrthogonal();
    Eigen::Vector3d t2 = plane.normal.cross(t1);
    double best = std::numeric_limits<double>::infinity();
    for (int i = -40; i <= 40; ++i)
      for (int j = -40; j <= 40; ++j) {
        const Eigen::Vector3d q = foot + 0.0005 * (i * t1 + j * t2);
        best = std::min(best, (p - q).norm());
      }

    PointCloud cloud = PointCloud::invalid_grid(1, 1);
    cloud.points[0] = p.cast<float>();
    const double h = signed_heights(cloud, plane)[0].second;
    CHECK(std::abs(std::abs(h) - best) < 1e-3);
  }
}

namespace {

struct PlaneTrial {
  PointCloud cloud;
  Plane truth;
  std::vector<Eigen::Vector3d> true_inliers;
};

// Tilted plane with Gaussian inlier noise (sigma = tau/3) plus uniform
// outliers in a 2 m box.
PlaneTrial make_plane_trial(std::uint32_t seed, double tilt_deg, double offset,
                            double outlier_frac, int n = 1200, double tau = 0.02) {
  PlaneTrial trial;
  const double tilt = tilt_deg * M_PI / 180.0;
  trial.truth.normal = Eigen::Vector3d(0.0, -std::sin(tilt), std::cos(tilt));
  trial.truth.offset = offset;

  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> xy(-1.0, 1.0);
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, tau / 3.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  trial.cloud = PointCloud::invalid_grid(n, 1);
  for (int i = 0; i < n; ++i) {
    if (u01(rng) < outlier_frac) {
      trial.cloud.points[i] = Eigen::Vector3f(static_cast<float>(box(rng)),
                                              static_cast<float>(box(rng)),
                                              static_cast<float>(box(rng)));
    } else {
      const double x = xy(rng), y = xy(rng);
      const double z = (-trial.truth.offset - trial.truth.normal.x() * x -
                        trial.truth.normal.y() * y) /
                       trial.truth.normal.z();
      Eigen::Vector3d p(x, y, z);
      trial.true_inliers.push_back(p);
      p += noise(rng) * trial.truth.normal;
      trial.cloud.points[i] = p.cast<float>();
    }
  }
  return trial;
}

Plane ls_fit_oracle(const std::vector<Eigen::Vector3d>& pts) {
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
  plane.normal = es.eigenvectors().col(0).normalized();
  plane.offset = -plane.normal.dot(centroid);
  if (plane.offset < 0.0) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  return plane;
}

double angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("RANSAC matches a least-squares oracle on the true inliers") {
  int ok = 0;
  const int trials = 25;
  for (int t = 0; t < trials; ++t) {
    const PlaneTrial trial = make_plane_trial(1000 + t, 5.0, 0.1, 0.3);
    const Plane est = estimate_ground_plane(trial.cloud, 200, 0.02, t);
    const Plane oracle = ls_fit_oracle(trial.true_inliers);

    const bool within = angle_deg(est.normal, oracle.normal) <= 1.0 &&
                        std::abs(est.offset - oracle.offset) <= 0.01 &&
                        angle_deg(est.normal, trial.truth.normal) <= 1.0 &&
                        std::abs(est.offset - trial.truth.offset) <= 0.01;
    if (within) ++ok;
  }
  CHECK(ok >= trials - 1);
}

TEST_CASE("plane estimation rejects degenerate inputs") {
  PointCloud two = PointCloud::invalid_grid(5, 1);
  two.points[0] = Eigen::Vector3f(0, 0, 0);
  two.points[3] = Eigen::Vector3f(1, 0, 0);
  CHECK_THROWS_AS(estimate_ground_plane(two), InsufficientPoints);

  PointCloud collinear = PointCloud::invalid_grid(10, 1);
  for (int i = 0; i < 10; ++i)
    collinear.points[i] = Eigen::Vector3f(static_cast<float>(i), 0.0f, 0.0f);
  CHECK_THROWS_AS(estimate_ground_plane(collinear), DegenerateGeometry);
}

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

TEST_CASE("height_to_grey follows the normalization formula") {
  CHECK(height_to_grey(0.5, 2.0) == 64);   // lround(63.75)
  CHECK(height_to_grey(1.0, 2.0) == 128);  // lround(127.5), ties away from zero
  CHECK(height_to_grey(1.5, 2.0) == 191);  // lround(191.25)
  CHECK(height_to_grey(2.0, 2.0) == 254);  // clamped below the empty sentinel
  CHECK(height_to_grey(7.0, 2.0) == 254);
}

TEST_CASE("empty and all-ground clouds rasterize to a white map") {
  const Plane ground{{0.0, 0.0, 1.0}, 0.0};
  PointCloud empty = PointCloud::invalid_grid(4, 4);
  Heightmap map = rasterize_heightmap(empty, ground, 16, 4.0, 2.0, 0.02);
  for (auto c : map.cells) CHECK(c == kEmptyCell);

  PointCloud flat = PointCloud::invalid_grid(100, 1);
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> d(-1.9f, 1.9f);
  for (auto& p : flat.points) p = Eigen::Vector3f(d(rng), d(rng), 0.01f);  // within tau
  map = rasterize_heightmap(flat, ground, 16, 4.0, 2.0, 0.02);
  for (auto c : map.cells) CHECK(c == kEmptyCell);
}

TEST_CASE("three known heights land in the specced grey levels") {
  const Plane ground{{0.0, 0.0, 1.0}, 0.0};
  // For this plane the chart is a = -y, b = x around the origin.
  PointCloud cloud = PointCloud::invalid_grid(3, 1);
  cloud.points[0] = Eigen::Vector3f(0.25f, 0.25f, 0.5f);
  cloud.points[1] = Eigen::Vector3f(0.75f, -0.75f, 1.0f);
  cloud.points[2] = Eigen::Vector3f(-1.25f, 0.75f, 1.5f);
  const Heightmap map = rasterize_heightmap(cloud, ground, 8, 4.0, 2.0, 0.02);

  auto cell_of = [&](const Eigen::Vector3f& p) {
    const double a = -p.y() + 2.0, b = p.x() + 2.0;
    return std::pair<int, int>(static_cast<int>(a / 0.5), static_cast<int>(b / 0.5));
  };
  const auto [r0, c0] = cell_of(cloud.points[0]);
  const auto [r1, c1] = cell_of(cloud.points[1]);
  const auto [r2, c2] = cell_of(cloud.points[2]);
  CHECK(map.at(r0, c0) == 64);
  CHECK(map.at(r1, c1) == 128);
  CHECK(map.at(r2, c2) == 191);

  int occupied = 0;
  for (auto c : map.cells)
    if (c != kEmptyCell) ++occupied;
  CHECK(occupied == 3);
}

TEST_CASE("a single saturated point fills only the expected cell") {
  const Plane ground{{0.0, 0.0, 1.0}, 0.0};
  PointCloud cloud = PointCloud::invalid_grid(1, 1);
  cloud.points[0] = Eigen::Vector3f(0.0f, 0.0f, 3.0f);  // above h_norm
  const Heightmap map = rasterize_heightmap(cloud, ground, 8, 4.0, 2.0, 0.02);
  int occupied = 0;
  for (auto c : map.cells)
    if (c != kEmptyCell) {
      ++occupied;
      CHECK(c == 254);
    }
  CHECK(occupied == 1);
}

namespace {

// Independent per-point binning oracle. Uses the frame the map reports but
// re-derives exclusion, binning, the per-cell max, and the grey formula.
std::vector<std::uint8_t> raster_oracle(const PointCloud& cloud, const Plane& plane,
                                        const GroundFrame& frame, int m, double extent,
                                        double h_norm, double tau, std::size_t* consumed) {
  const double half = extent / 2.0;
  const double cell = extent / m;
  std::vector<double> hmax(static_cast<std::size_t>(m) * m,
                           -std::numeric_limits<double>::infinity());
  std::size_t used = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud.valid(i)) continue;
    const Eigen::Vector3d p = cloud.points[i].cast<double>();
    const double h = plane.normal.dot(p) + plane.offset;
    if (h <= tau) continue;
    const Eigen::Vector3d d = p - frame.center;
    const double a = frame.u.dot(d) + half;
    const double b = frame.v.dot(d) + half;
    if (a < 0.0 || a >= extent || b < 0.0 || b >= extent) continue;
    const int row = std::min(static_cast<int>(a / cell), m - 1);
    const int col = std::min(static_cast<int>(b / cell), m - 1);
    auto& slot = hmax[static_cast<std::size_t>(row) * m + col];
    slot = std::max(slot, h);
    ++used;
  }
  if (consumed) *consumed = used;
  std::vector<std::uint8_t> cells(hmax.size(), kEmptyCell);
  for (std::size_t i = 0; i < hmax.size(); ++i) {
    if (!std::isfinite(hmax[i])) continue;
    const long grey = std::lround(255.0 * std::min(hmax[i], h_norm) / h_norm);
    cells[i] = static_cast<std::uint8_t>(std::min<long>(grey, 254));
  }
  return cells;
}

}  // namespace

TEST_CASE("rasterization matches the brute-force binning oracle bit-exactly") {
  std::mt19937 meta(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const PointCloud cloud = testutil::random_cloud(40, 30, 5000 + trial, -2.5f, 2.5f);
    std::uniform_real_distribution<double> nd(-0.4, 0.4);
    Plane plane;
    plane.normal = Eigen::Vector3d(nd(meta), nd(meta), 1.0).normalized();
    plane.offset = std::abs(nd(meta));
    const int m = 8 + static_cast<int>(trial) % 25;

    const Heightmap map = rasterize_heightmap(cloud, plane, m, 3.0, 1.5, 0.02);
    std::size_t consumed = 0;
    const auto oracle =
        raster_oracle(cloud, plane, map.frame, m, 3.0, 1.5, 0.02, &consumed);
    REQUIRE(map.cells == oracle);

    // Conservation: consumed = valid - ground inliers - below-plane - outside.
    std::size_t excluded_band = 0, outside = 0;
    const double half = 1.5, cellsz = 3.0 / m;
    (void)cellsz;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (!cloud.valid(i)) continue;
      const Eigen::Vector3d p = cloud.points[i].cast<double>();
      const double h = plane.normal.dot(p) + plane.offset;
      if (h <= 0.02) {
        ++excluded_band;
        continue;
      }
      const Eigen::Vector3d d = p - map.frame.center;
      const double a = map.frame.u.dot(d) + half;
      const double b = map.frame.v.dot(d) + half;
      if (a < 0.0 || a >= 3.0 || b < 0.0 || b >= 3.0) ++outside;
    }
    CHECK(consumed == cloud.valid_count() - excluded_band - outside);
  }
}

TEST_CASE("ground frame satisfies its geometric contract") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (int i = 0; i < 20; ++i) {
    Plane plane;
    plane.normal = Eigen::Vector3d(d(rng), d(rng), 1.0).normalized();
    plane.offset = 0.1 + std::abs(d(rng));
    const GroundFrame f = ground_frame(plane);
    CHECK(std::abs(plane.signed_distance(f.center)) < 1e-9);  // center on the plane
    CHECK(std::abs(f.u.norm() - 1.0) < 1e-9);
    CHECK(std::abs(f.v.norm() - 1.0) < 1e-9);
    CHECK(std::abs(f.u.dot(plane.normal)) < 1e-9);
    CHECK(std::abs(f.v.dot(plane.normal)) < 1e-9);
    CHECK(std::abs(f.u.dot(f.v)) < 1e-9);
    CHECK(f.u.cross(f.v).dot(plane.normal) > 0.0);  // right-handed
  }
}

TEST_CASE("raising a point never decreases its cell value") {
  const Plane ground{{0.0, 0.0, 1.0}, 0.0};
  PointCloud cloud = PointCloud::invalid_grid(1, 1);
  std::uint8_t prev = 0;
  for (double h = 0.05; h < 2.5; h += 0.05) {
    cloud.points[0] = Eigen::Vector3f(0.3f, 0.3f, static_cast<float>(h));
    const Heightmap map = rasterize_heightmap(cloud, ground, 8, 4.0, 2.0, 0.02);
    std::uint8_t value = 0;
    for (auto c : map.cells)
      if (c != kEmptyCell) value = c;
    CHECK(value >= prev);
    CHECK(value <= 254);  // sentinel separation
    prev = value;
  }
}
