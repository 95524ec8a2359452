#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "casdet/cloud.hpp"
#include "casdet/errors.hpp"
#include "casdet/plane.hpp"

namespace casdet {

inline constexpr std::uint8_t kEmptyCell = 255;

// 2D chart on the ground plane. The grid is centered on the sensor's forward
// ground projection; u is the forward direction projected onto the plane and
// v = normal x u completes the right-handed frame. Rows advance along u,
// columns along v.
struct GroundFrame {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d u{1.0, 0.0, 0.0};
  Eigen::Vector3d v{0.0, 1.0, 0.0};
  Eigen::Vector3d normal{0.0, 0.0, 1.0};

  // (a, b) chart coordinates of a 3D point, relative to center.
  Eigen::Vector2d chart(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d d = p - center;
    return {u.dot(d), v.dot(d)};
  }
};

inline GroundFrame ground_frame(const Plane& plane) {
  GroundFrame f;
  f.normal = plane.normal;

  const Eigen::Vector3d forward(0.0, 0.0, 1.0);  // sensor optical axis
  const double denom = plane.normal.dot(forward);
  if (std::abs(denom) > 1e-9) {
    const double t = -plane.offset / denom;
    if (t > 0.0) f.center = t * forward;
  }
  if (f.center.isZero()) {
    // Looking parallel to the plane (or it is behind): drop the origin onto it.
    f.center = -plane.offset * plane.normal;
  }

  Eigen::Vector3d u = forward - plane.normal.dot(forward) * plane.normal;
  if (u.norm() < 1e-9) {
    // Optical axis parallel to the normal; fall back to the sensor up axis.
    const Eigen::Vector3d up(0.0, -1.0, 0.0);
    u = up - plane.normal.dot(up) * plane.normal;
  }
  f.u = u.normalized();
  f.v = plane.normal.cross(f.u);
  return f;
}

// One binned observation: a point's cell and its height above the plane.
struct HeightSample {
  int row = 0;
  int col = 0;
  double height = 0.0;
};

// m x m grid of greyscale cells over a square extent on the ground plane.
// Cell value encodes the maximum height observed in the cell, normalized by
// h_norm; 255 is reserved for empty cells and occupied cells clamp to 254.
struct Heightmap {
  int m = 0;
  double extent = 0.0;
  double h_norm = 0.0;
  GroundFrame frame;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();  // chart coords of cell (0,0) corner
  std::vector<std::uint8_t> cells;                   // row-major, m*m

  double cell_size() const { return extent / m; }

  std::uint8_t at(int row, int col) const {
    return cells[static_cast<std::size_t>(row) * m + col];
  }

  std::uint8_t& at(int row, int col) {
    return cells[static_cast<std::size_t>(row) * m + col];
  }
};

struct RasterParams {
  int m = 128;
  double extent = 4.0;   // meters per side
  double h_norm = 2.0;   // normalization height
  double tau = 0.02;     // ground-inlier band
  int plane_iters = 200;
};

// Projects valid points into grid cells. Ground inliers (height <= tau),
// below-plane points and points outside the extent are excluded.
inline std::vector<HeightSample> project_to_cells(const PointCloud& cloud, const Plane& plane,
                                                  int m, double extent, double tau) {
  if (m < 1) throw InvalidParams("project_to_cells: m must be >= 1");
  if (!(extent > 0.0)) throw InvalidParams("project_to_cells: extent must be > 0");

  const GroundFrame frame = ground_frame(plane);
  const double half = extent / 2.0;
  const double cell = extent / m;

  std::vector<HeightSample> samples;
  samples.reserve(cloud.size() / 4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud.valid(i)) continue;
    const Eigen::Vector3d p = cloud.points[i].cast<double>();
    const double h = plane.signed_distance(p);
    if (h <= tau) continue;  // ground inlier or below the plane
    const Eigen::Vector2d ab = frame.chart(p);
    const double a = ab.x() + half;
    const double b = ab.y() + half;
    if (a < 0.0 || a >= extent || b < 0.0 || b >= extent) continue;
    int row = static_cast<int>(a / cell);
    int col = static_cast<int>(b / cell);
    row = std::min(row, m - 1);
    col = std::min(col, m - 1);
    samples.push_back({row, col, h});
  }
  return samples;
}

inline std::uint8_t height_to_grey(double height, double h_norm) {
  const double clamped = std::min(height, h_norm);
  const long grey = std::lround(255.0 * clamped / h_norm);
  return static_cast<std::uint8_t>(std::min<long>(grey, 254));
}

// Ground-projected heightmap: per-cell maximum normalized height, greyscale.
// Empty cells get the maximum greyscale value (white background).
inline Heightmap rasterize_heightmap(const PointCloud& cloud, const Plane& plane, int m = 128,
                                     double extent = 4.0, double h_norm = 2.0,
                                     double tau = 0.02) {
  if (m < 1) throw InvalidParams("rasterize_heightmap: m must be >= 1");
  if (!(extent > 0.0)) throw InvalidParams("rasterize_heightmap: extent must be > 0");
  if (!(h_norm > 0.0)) throw InvalidParams("rasterize_heightmap: h_norm must be > 0");

  Heightmap map;
  map.m = m;
  map.extent = extent;
  map.h_norm = h_norm;
  map.frame = ground_frame(plane);
  map.origin = Eigen::Vector2d(-extent / 2.0, -extent / 2.0);
  map.cells.assign(static_cast<std::size_t>(m) * m, kEmptyCell);

  std::vector<double> max_height(static_cast<std::size_t>(m) * m,
                                 -std::numeric_limits<double>::infinity());
  for (const HeightSample& s : project_to_cells(cloud, plane, m, extent, tau)) {
    const std::size_t idx = static_cast<std::size_t>(s.row) * m + s.col;
    max_height[idx] = std::max(max_height[idx], s.height);
  }
  for (std::size_t i = 0; i < max_height.size(); ++i)
    if (std::isfinite(max_height[i])) map.cells[i] = height_to_grey(max_height[i], h_norm);
  return map;
}

inline Heightmap rasterize_heightmap(const PointCloud& cloud, const Plane& plane,
                                     const RasterParams& p) {
  return rasterize_heightmap(cloud, plane, p.m, p.extent, p.h_norm, p.tau);
}

// ---- binary PGM (P5, maxval 255) ----

inline std::string write_pgm(const std::uint8_t* data, int width, int height) {
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(data), static_cast<std::size_t>(width) * height);
  return out;
}

inline std::string write_pgm(const Heightmap& map) {
  return write_pgm(map.cells.data(), map.m, map.m);
}

struct GreyImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

inline GreyImage parse_pgm(std::string_view bytes) {
  // P5, then whitespace/comment-separated width, height, maxval, single
  // whitespace byte, then raw data.
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_ws();
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos == start) throw ParseError("PGM: expected integer");
    return std::strtol(std::string(bytes.substr(start, pos - start)).c_str(), nullptr, 10);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw ParseError("PGM: not P5");
  pos = 2;
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  if (w < 1 || h < 1) throw ParseError("PGM: bad dimensions");
  if (maxval != 255) throw ParseError("PGM: only maxval 255 is supported");
  if (pos >= bytes.size()) throw ParseError("PGM: truncated");
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(w) * h;
  if (bytes.size() - pos < need) throw ParseError("PGM: truncated pixel data");
  GreyImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.pixels.assign(bytes.begin() + pos, bytes.begin() + pos + need);
  return img;
}

inline void save_pgm(const std::filesystem::path& path, const std::uint8_t* data, int width,
                     int height) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write PGM file: " + path.string());
  f << write_pgm(data, width, height);
}

inline void save_pgm(const std::filesystem::path& path, const Heightmap& map) {
  save_pgm(path, map.cells.data(), map.m, map.m);
}

inline GreyImage load_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open PGM file: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_pgm(ss.str());
}

}  // namespace casdet
