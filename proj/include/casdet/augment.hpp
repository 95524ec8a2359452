#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "casdet/cloud.hpp"
#include "casdet/errors.hpp"
#include "casdet/heightmap.hpp"
#include "casdet/rng.hpp"

namespace casdet {

// ---------------------------------------------------------------------------
// Strategy catalogue
// ---------------------------------------------------------------------------

enum class AugStrategy : int {
  gaussian = 0,   // additive Gaussian noise on heightmap cells
  snp = 1,        // salt-and-pepper on heightmap cells
  periodic = 2,   // whole rows blanked at a fixed period
  sensor = 3,     // range noise along the viewing ray
  downsample = 4, // random point dropout
  segment = 5,    // rectangular window removal
};

inline constexpr int kAugStrategyCount = 6;

inline constexpr std::array<AugStrategy, kAugStrategyCount> kAllStrategies = {
    AugStrategy::gaussian, AugStrategy::snp,        AugStrategy::periodic,
    AugStrategy::sensor,   AugStrategy::downsample, AugStrategy::segment};

inline std::string_view to_string(AugStrategy s) {
  switch (s) {
    case AugStrategy::gaussian:   return "gaussian";
    case AugStrategy::snp:        return "snp";
    case AugStrategy::periodic:   return "periodic";
    case AugStrategy::sensor:     return "sensor";
    case AugStrategy::downsample: return "downsample";
    case AugStrategy::segment:    return "segment";
  }
  throw InvalidParams("unknown augmentation strategy");
}

inline AugStrategy aug_strategy_from_string(std::string_view name) {
  for (AugStrategy s : kAllStrategies)
    if (to_string(s) == name) return s;
  throw InvalidParams("unknown augmentation strategy: " + std::string(name));
}

inline bool is_cloud_level(AugStrategy s) {
  return s == AugStrategy::sensor || s == AugStrategy::downsample ||
         s == AugStrategy::segment;
}

// Scalar settings for one application of each strategy.
struct AugParams {
  double gaussian_mu = 0.2;
  double gaussian_sigma = 25.0;  // grey levels
  double snp_ratio = 0.5;        // salt fraction of the chosen cells
  double snp_amount = 0.03;      // fraction of cells touched
  int periodic_period = 5;       // rows
  double sensor_sigma = 0.2;     // meters
  double downsample_scale = 0.05;  // keep fraction
  int segment_size = 100;        // window side, grid pixels
};

inline void validate(const AugParams& p) {
  if (!(p.gaussian_sigma >= 0.0)) throw InvalidParams("gaussian sigma must be >= 0");
  if (!(p.snp_ratio >= 0.0 && p.snp_ratio <= 1.0))
    throw InvalidParams("salt-pepper ratio must be in [0, 1]");
  if (!(p.snp_amount >= 0.0 && p.snp_amount <= 1.0))
    throw InvalidParams("salt-pepper amount must be in [0, 1]");
  if (p.periodic_period < 1) throw InvalidParams("periodic noise period must be >= 1");
  if (!(p.sensor_sigma >= 0.0)) throw InvalidParams("sensor noise sigma must be >= 0");
  if (!(p.downsample_scale > 0.0 && p.downsample_scale <= 1.0))
    throw InvalidParams("downsample scale must be in (0, 1]");
  if (p.segment_size < 0) throw InvalidParams("segment size must be >= 0");
}

// Value sets each strategy's parameters are drawn from when generating bulk
// augmented data.
struct AugSets {
  double gaussian_mu = 0.2;
  std::vector<double> gaussian_sigma{10.0, 25.0, 50.0};
  double snp_ratio = 0.5;
  double snp_amount_lo = 0.01, snp_amount_hi = 0.05;
  std::vector<int> periodic_period{3, 5, 10};
  std::vector<double> sensor_sigma{0.1, 0.2, 0.25};
  std::vector<double> downsample_scale{1.0 / 50.0, 1.0 / 20.0, 1.0 / 10.0};
  std::vector<int> segment_size{50, 100, 150};
};

namespace detail {

template <typename T>
inline T pick(std::mt19937_64& rng, const std::vector<T>& values) {
  if (values.empty()) throw InvalidParams("empty augmentation value set");
  std::uniform_int_distribution<std::size_t> d(0, values.size() - 1);
  return values[d(rng)];
}

}  // namespace detail

// One uniform draw from `sets` for the given strategy; other fields keep their
// defaults (only the drawn strategy is ever applied with the result).
inline AugParams draw_params(AugStrategy strategy, const AugSets& sets, std::mt19937_64& rng) {
  AugParams p;
  switch (strategy) {
    case AugStrategy::gaussian:
      p.gaussian_mu = sets.gaussian_mu;
      p.gaussian_sigma = detail::pick(rng, sets.gaussian_sigma);
      break;
    case AugStrategy::snp: {
      p.snp_ratio = sets.snp_ratio;
      std::uniform_real_distribution<double> d(sets.snp_amount_lo, sets.snp_amount_hi);
      p.snp_amount = d(rng);
      break;
    }
    case AugStrategy::periodic:
      p.periodic_period = detail::pick(rng, sets.periodic_period);
      break;
    case AugStrategy::sensor:
      p.sensor_sigma = detail::pick(rng, sets.sensor_sigma);
      break;
    case AugStrategy::downsample:
      p.downsample_scale = detail::pick(rng, sets.downsample_scale);
      break;
    case AugStrategy::segment:
      p.segment_size = detail::pick(rng, sets.segment_size);
      break;
  }
  return p;
}

// Per-strategy augmented-sample counts under a total budget.
struct AugPlan {
  std::array<long long, kAugStrategyCount> counts{};
  long long budget = 0;

  long long count(AugStrategy s) const { return counts[static_cast<int>(s)]; }
  long long& count(AugStrategy s) { return counts[static_cast<int>(s)]; }
  long long total() const {
    return std::accumulate(counts.begin(), counts.end(), 0LL);
  }
};

inline void validate(const AugPlan& plan) {
  for (long long c : plan.counts)
    if (c < 0) throw InvalidParams("augmentation plan counts must be >= 0");
  if (plan.total() != plan.budget)
    throw InvalidParams("augmentation plan counts must sum to the budget");
}

// ---------------------------------------------------------------------------
// Heightmap-level corruptions
// ---------------------------------------------------------------------------

inline Heightmap gaussian_image_noise(const Heightmap& map, double mu, double sigma,
                                      std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidParams("gaussian sigma must be >= 0");
  Heightmap out = map;
  if (sigma == 0.0 && mu == 0.0) return out;
  auto rng = make_rng(seed);
  std::normal_distribution<double> noise(mu, sigma);
  for (auto& cell : out.cells) {
    const double v = static_cast<double>(cell) + noise(rng);
    cell = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0L, 255L));
  }
  return out;
}

inline Heightmap salt_pepper_noise(const Heightmap& map, double ratio, double amount,
                                   std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw InvalidParams("salt-pepper ratio must be in [0, 1]");
  if (!(amount >= 0.0 && amount <= 1.0))
    throw InvalidParams("salt-pepper amount must be in [0, 1]");
  Heightmap out = map;
  const std::size_t n = out.cells.size();
  const std::size_t k = static_cast<std::size_t>(
      std::llround(amount * static_cast<double>(n)));
  if (k == 0) return out;

  auto rng = make_rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {  // partial Fisher-Yates: first k are the chosen cells
    std::uniform_int_distribution<std::size_t> d(i, n - 1);
    std::swap(idx[i], idx[d(rng)]);
  }
  const std::size_t salt = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(k)));
  for (std::size_t i = 0; i < k; ++i)
    out.cells[idx[i]] = (i < salt) ? std::uint8_t{255} : std::uint8_t{0};
  return out;
}

inline Heightmap periodic_noise(const Heightmap& map, int period) {
  if (period < 1) throw InvalidParams("periodic noise period must be >= 1");
  Heightmap out = map;
  for (int r = 0; r < out.m; r += period)
    std::fill_n(out.cells.begin() + static_cast<std::ptrdiff_t>(r) * out.m, out.m,
                std::uint8_t{255});
  return out;
}

// ---------------------------------------------------------------------------
// Point-cloud-level corruptions
// ---------------------------------------------------------------------------

// Range noise: each valid point slides along the ray from the sensor origin
// through it by an independent N(0, sigma) meters.
inline PointCloud sensor_noise(const PointCloud& cloud, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidParams("sensor noise sigma must be >= 0");
  PointCloud out = cloud;
  if (sigma == 0.0) return out;
  auto rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    if (!out.valid(i)) continue;
    const Eigen::Vector3d p = out.points[i].cast<double>();
    const double range = p.norm();
    if (range < 1e-12) continue;
    out.points[i] = (p * (1.0 + noise(rng) / range)).cast<float>();
  }
  return out;
}

inline PointCloud downsample_cloud(const PointCloud& cloud, double scale, std::uint64_t seed) {
  if (!(scale > 0.0 && scale <= 1.0)) throw InvalidParams("downsample scale must be in (0, 1]");
  PointCloud out = cloud;
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < out.points.size(); ++i)
    if (out.valid(i)) valid.push_back(i);
  const std::size_t keep = static_cast<std::size_t>(
      std::floor(scale * static_cast<double>(valid.size())));
  if (keep >= valid.size()) return out;

  auto rng = make_rng(seed);
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, valid.size() - 1);
    std::swap(valid[i], valid[d(rng)]);
  }
  for (std::size_t i = keep; i < valid.size(); ++i) out.invalidate(valid[i]);
  return out;
}

// The grid window a remove_segment call invalidates.
struct GridWindow {
  int row = 0;
  int col = 0;
  int size = 0;

  bool contains(int r, int c) const {
    return r >= row && r < row + size && c >= col && c < col + size;
  }
};

// Window drawn by remove_segment(cloud, size, seed): uniform in-bounds
// position, row before column. Requires 0 < size <= min(width, height).
inline GridWindow segment_window(int width, int height, int size, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_int_distribution<int> dr(0, height - size);
  std::uniform_int_distribution<int> dc(0, width - size);
  const int row = dr(rng);
  const int col = dc(rng);
  return GridWindow{row, col, size};
}

// Invalidates one size x size window at a uniformly random in-bounds grid
// position. Requires a genuinely organized cloud.
inline PointCloud remove_segment(const PointCloud& cloud, int size, std::uint64_t seed) {
  const auto n = static_cast<int>(cloud.points.size());
  if ((cloud.width == 1 && cloud.height == n) || (cloud.height == 1 && cloud.width == n))
    throw UnorganizedCloud("segment removal requires an organized (2D grid) cloud");
  if (size < 0 || size > std::min(cloud.width, cloud.height))
    throw InvalidParams("segment size must be in [0, min(width, height)]");
  PointCloud out = cloud;
  if (size == 0) return out;

  const GridWindow win = segment_window(cloud.width, cloud.height, size, seed);
  for (int r = win.row; r < win.row + size; ++r)
    for (int c = win.col; c < win.col + size; ++c) out.invalidate(out.index(r, c));
  return out;
}

// Single-strategy dispatchers used by plan-driven bulk augmentation.

inline Heightmap apply_to_map(AugStrategy strategy, const Heightmap& map,
                              const AugParams& params, std::uint64_t seed) {
  switch (strategy) {
    case AugStrategy::gaussian:
      return gaussian_image_noise(map, params.gaussian_mu, params.gaussian_sigma, seed);
    case AugStrategy::snp:
      return salt_pepper_noise(map, params.snp_ratio, params.snp_amount, seed);
    case AugStrategy::periodic:
      return periodic_noise(map, params.periodic_period);
    default:
      throw InvalidParams("strategy does not operate on heightmaps");
  }
}

inline PointCloud apply_to_cloud(AugStrategy strategy, const PointCloud& cloud,
                                 const AugParams& params, std::uint64_t seed) {
  switch (strategy) {
    case AugStrategy::sensor:
      return sensor_noise(cloud, params.sensor_sigma, seed);
    case AugStrategy::downsample:
      return downsample_cloud(cloud, params.downsample_scale, seed);
    case AugStrategy::segment:
      return remove_segment(cloud, params.segment_size, seed);
    default:
      throw InvalidParams("strategy does not operate on point clouds");
  }
}

}  // namespace casdet
