#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "casdet/errors.hpp"
#include "casdet/heightmap.hpp"

namespace casdet {

inline constexpr int kRoiPatchSize = 28;

// Cell-aligned rectangle: rows [row, row+height), cols [col, col+width).
struct BBox {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;

  long long area() const { return static_cast<long long>(height) * width; }
  bool empty() const { return height <= 0 || width <= 0; }
};

inline double iou(const BBox& a, const BBox& b) {
  const int r0 = std::max(a.row, b.row);
  const int c0 = std::max(a.col, b.col);
  const int r1 = std::min(a.row + a.height, b.row + b.height);
  const int c1 = std::min(a.col + a.width, b.col + b.width);
  const long long inter =
      static_cast<long long>(std::max(0, r1 - r0)) * std::max(0, c1 - c0);
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

struct Region {
  std::vector<int> cells;  // heightmap cell indices, discovery order
  BBox bbox;               // tight

  int area() const { return static_cast<int>(cells.size()); }
};

// 8-connected components of the foreground (cells with value < fg_threshold).
// Regions are returned in row-major order of their first cell.
inline std::vector<Region> connected_components(const Heightmap& map, int fg_threshold) {
  if (fg_threshold < 0 || fg_threshold > 255)
    throw InvalidParams("foreground threshold must be in [0, 255]");
  const int m = map.m;
  std::vector<std::uint8_t> visited(map.cells.size(), 0);
  std::vector<Region> regions;
  std::vector<int> stack;

  for (int start = 0; start < static_cast<int>(map.cells.size()); ++start) {
    if (visited[start] || map.cells[start] >= fg_threshold) continue;
    Region region;
    int rmin = m, rmax = -1, cmin = m, cmax = -1;
    stack.assign(1, start);
    visited[start] = 1;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      region.cells.push_back(idx);
      const int r = idx / m, c = idx % m;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int nr = r + dr, nc = c + dc;
          if (nr < 0 || nr >= m || nc < 0 || nc >= m) continue;
          const int nidx = nr * m + nc;
          if (visited[nidx] || map.cells[nidx] >= fg_threshold) continue;
          visited[nidx] = 1;
          stack.push_back(nidx);
        }
      }
    }
    region.bbox = BBox{rmin, cmin, rmax - rmin + 1, cmax - cmin + 1};
    regions.push_back(std::move(region));
  }
  return regions;
}

struct Roi {
  BBox bbox;    // margin-expanded crop window, clamped to the map
  BBox region;  // tight box of the source region, used for truth matching
  int area = 0;  // foreground cell count of the source region
  GreyImage patch;  // kRoiPatchSize x kRoiPatchSize nearest-neighbor resample
};

// Nearest-neighbor crop resample; source pixel picked at each target pixel
// center.
inline GreyImage crop_resize_patch(const Heightmap& map, const BBox& box,
                                   int out_size = kRoiPatchSize) {
  if (box.empty() || box.row < 0 || box.col < 0 || box.row + box.height > map.m ||
      box.col + box.width > map.m)
    throw InvalidParams("crop box out of heightmap bounds");
  GreyImage out;
  out.width = out.height = out_size;
  out.pixels.resize(static_cast<std::size_t>(out_size) * out_size);
  for (int r = 0; r < out_size; ++r) {
    const int sr = std::min(box.height - 1,
                            static_cast<int>((r + 0.5) * box.height / out_size));
    for (int c = 0; c < out_size; ++c) {
      const int sc = std::min(box.width - 1,
                              static_cast<int>((c + 0.5) * box.width / out_size));
      out.pixels[static_cast<std::size_t>(r) * out_size + c] =
          map.at(box.row + sr, box.col + sc);
    }
  }
  return out;
}

struct RoiParams {
  int fg_threshold = 250;
  int min_area = 30;  // cells
  int margin = 2;     // crop expansion, cells
};

// Regions with area >= min_area become ROIs, ordered by decreasing area
// (ties keep discovery order).
inline std::vector<Roi> propose_rois(const Heightmap& map, const RoiParams& params = {}) {
  if (params.min_area < 1) throw InvalidParams("minimum region area must be >= 1");
  std::vector<Region> regions = connected_components(map, params.fg_threshold);
  std::vector<Roi> rois;
  for (const Region& region : regions) {
    if (region.area() < params.min_area) continue;
    const int r0 = std::max(0, region.bbox.row - params.margin);
    const int c0 = std::max(0, region.bbox.col - params.margin);
    const int r1 = std::min(map.m, region.bbox.row + region.bbox.height + params.margin);
    const int c1 = std::min(map.m, region.bbox.col + region.bbox.width + params.margin);
    Roi roi;
    roi.bbox = BBox{r0, c0, r1 - r0, c1 - c0};
    roi.region = region.bbox;
    roi.area = region.area();
    roi.patch = crop_resize_patch(map, roi.bbox);
    rois.push_back(std::move(roi));
  }
  std::stable_sort(rois.begin(), rois.end(),
                   [](const Roi& a, const Roi& b) { return a.area > b.area; });
  return rois;
}

}  // namespace casdet
