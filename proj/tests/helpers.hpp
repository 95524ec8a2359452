#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "casdet/cloud.hpp"
#include "casdet/heightmap.hpp"

namespace testutil {

// Unique scratch directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("casdet-" + tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline casdet::Heightmap blank_map(int m, double extent = 4.0, double h_norm = 2.0) {
  casdet::Heightmap map;
  map.m = m;
  map.extent = extent;
  map.h_norm = h_norm;
  map.origin = Eigen::Vector2d(-extent / 2.0, -extent / 2.0);
  map.cells.assign(static_cast<std::size_t>(m) * m, casdet::kEmptyCell);
  return map;
}

// Fully-valid organized cloud with uniform random coordinates in [lo, hi]^3.
inline casdet::PointCloud random_cloud(int w, int h, std::uint32_t seed, float lo = -2.0f,
                                       float hi = 2.0f) {
  casdet::PointCloud cloud = casdet::PointCloud::invalid_grid(w, h);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> d(lo, hi);
  for (auto& p : cloud.points) p = Eigen::Vector3f(d(rng), d(rng), d(rng));
  return cloud;
}

}  // namespace testutil
