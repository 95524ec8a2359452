#pragma once

#include <Eigen/Core>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "casdet/errors.hpp"

namespace casdet {

// Organized point cloud: a width x height grid of points in the sensor frame,
// row-major, in pixel correspondence with the depth image that produced it.
// Invalid entries (sensor dropout, ray misses) are stored as NaN, the same
// convention ASCII PCD files use.
struct PointCloud {
  int width = 0;
  int height = 0;
  std::string frame_id = "sensor";
  std::vector<Eigen::Vector3f> points;  // size == width * height

  static PointCloud invalid_grid(int w, int h, std::string frame = "sensor") {
    PointCloud c;
    c.width = w;
    c.height = h;
    c.frame_id = std::move(frame);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    c.points.assign(static_cast<std::size_t>(w) * h, Eigen::Vector3f(nan, nan, nan));
    return c;
  }

  std::size_t size() const { return points.size(); }

  bool valid(std::size_t i) const {
    const auto& p = points[i];
    return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
  }

  void invalidate(std::size_t i) {
    const float nan = std::numeric_limits<float>::quiet_NaN();
    points[i] = Eigen::Vector3f(nan, nan, nan);
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < points.size(); ++i)
      if (valid(i)) ++n;
    return n;
  }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width + col;
  }
};

namespace detail {

inline bool parse_float_token(const std::string& tok, float& out) {
  if (tok == "nan" || tok == "NaN" || tok == "NAN" || tok == "-nan") {
    out = std::numeric_limits<float>::quiet_NaN();
    return true;
  }
  const char* begin = tok.c_str();
  char* end = nullptr;
  out = std::strtof(begin, &end);
  return end == begin + tok.size();
}

}  // namespace detail

// ASCII PCD v0.7 reader. FIELDS x y z, TYPE F, SIZE 4, DATA ascii. NaN triples
// mark invalid entries.
inline PointCloud parse_pcd(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  std::string line;

  PointCloud cloud;
  long width = -1, height = -1, declared_points = -1;
  bool fields_ok = false, data_seen = false;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "VERSION") {
      std::string v;
      ls >> v;
      if (v != "0.7" && v != ".7") throw ParseError("unsupported PCD version: " + v);
    } else if (key == "FIELDS") {
      std::string a, b, c, extra;
      ls >> a >> b >> c;
      if (ls >> extra) throw ParseError("only FIELDS x y z is supported");
      if (a != "x" || b != "y" || c != "z") throw ParseError("only FIELDS x y z is supported");
      fields_ok = true;
    } else if (key == "SIZE") {
      int s;
      while (ls >> s)
        if (s != 4) throw ParseError("only SIZE 4 is supported");
    } else if (key == "TYPE") {
      std::string t;
      while (ls >> t)
        if (t != "F") throw ParseError("only TYPE F is supported");
    } else if (key == "COUNT") {
      int c;
      while (ls >> c)
        if (c != 1) throw ParseError("only COUNT 1 is supported");
    } else if (key == "WIDTH") {
      if (!(ls >> width) || width < 1) throw ParseError("bad WIDTH");
    } else if (key == "HEIGHT") {
      if (!(ls >> height) || height < 1) throw ParseError("bad HEIGHT");
    } else if (key == "VIEWPOINT") {
      // accepted, ignored
    } else if (key == "POINTS") {
      if (!(ls >> declared_points) || declared_points < 0) throw ParseError("bad POINTS");
    } else if (key == "DATA") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw ParseError("only DATA ascii is supported");
      data_seen = true;
      break;
    } else {
      throw ParseError("unknown PCD header field: " + key);
    }
  }

  if (!data_seen) throw ParseError("missing DATA header");
  if (!fields_ok) throw ParseError("missing FIELDS header");
  if (width < 0 || height < 0) throw ParseError("missing WIDTH/HEIGHT");
  if (declared_points < 0) throw ParseError("missing POINTS");
  if (declared_points != width * height)
    throw ParseError("POINTS does not match WIDTH*HEIGHT");

  cloud.width = static_cast<int>(width);
  cloud.height = static_cast<int>(height);
  cloud.points.reserve(static_cast<std::size_t>(declared_points));

  std::string tx, ty, tz;
  long read = 0;
  while (read < declared_points) {
    if (!(in >> tx >> ty >> tz)) throw ParseError("point record count does not match POINTS");
    float x, y, z;
    if (!detail::parse_float_token(tx, x) || !detail::parse_float_token(ty, y) ||
        !detail::parse_float_token(tz, z))
      throw ParseError("malformed point record: " + tx + " " + ty + " " + tz);
    // A partially-NaN record still counts as invalid; normalize it.
    if (!(std::isfinite(x) && std::isfinite(y) && std::isfinite(z))) {
      const float nan = std::numeric_limits<float>::quiet_NaN();
      cloud.points.emplace_back(nan, nan, nan);
    } else {
      cloud.points.emplace_back(x, y, z);
    }
    ++read;
  }
  std::string trailing;
  if (in >> trailing) throw ParseError("trailing data after declared POINTS");
  return cloud;
}

// Finite coordinates are printed with 9 significant digits, which round-trips
// 32-bit floats exactly.
inline std::string write_pcd(const PointCloud& cloud) {
  std::string out;
  out.reserve(cloud.size() * 24 + 256);
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "# .PCD v0.7 - Point Cloud Data file format\n"
                "VERSION 0.7\n"
                "FIELDS x y z\n"
                "SIZE 4 4 4\n"
                "TYPE F F F\n"
                "COUNT 1 1 1\n"
                "WIDTH %d\n"
                "HEIGHT %d\n",
                cloud.width, cloud.height);
  out += buf;
  out += "VIEWPOINT 0 0 0 1 0 0 0\n";
  std::snprintf(buf, sizeof(buf), "POINTS %ld\nDATA ascii\n",
                static_cast<long>(cloud.size()));
  out += buf;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!cloud.valid(i)) {
      out += "nan nan nan\n";
      continue;
    }
    const auto& p = cloud.points[i];
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", static_cast<double>(p.x()),
                  static_cast<double>(p.y()), static_cast<double>(p.z()));
    out += buf;
  }
  return out;
}

inline PointCloud load_pcd(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open PCD file: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_pcd(ss.str());
}

inline void save_pcd(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write PCD file: " + path.string());
  f << write_pcd(cloud);
}

}  // namespace casdet
