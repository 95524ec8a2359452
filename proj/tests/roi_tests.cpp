// Region extraction and ROI proposal, verified against a scanline flood-fill
// oracle and hand-constructed maps.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <queue>
#include <random>
#include <set>

#include "casdet/roi.hpp"

#include "helpers.hpp"

using namespace casdet;

namespace {

void paint(Heightmap& map, int row, int col, std::uint8_t value) {
  map.at(row, col) = value;
}

void paint_block(Heightmap& map, int row, int col, int h, int w, std::uint8_t value) {
  for (int r = row; r < row + h; ++r)
    for (int c = col; c < col + w; ++c) map.at(r, c) = value;
}

// Independent BFS flood fill with an explicit visited grid.
struct OracleRegion {
  std::set<int> cells;
  BBox bbox;
};

std::vector<OracleRegion> flood_oracle(const Heightmap& map, int threshold) {
  const int m = map.m;
  std::vector<char> seen(map.cells.size(), 0);
  std::vector<OracleRegion> out;
  for (int s = 0; s < static_cast<int>(map.cells.size()); ++s) {
    if (seen[s] || map.cells[s] >= threshold) continue;
    OracleRegion region;
    int rmin = m, rmax = -1, cmin = m, cmax = -1;
    std::queue<int> q;
    q.push(s);
    seen[s] = 1;
    while (!q.empty()) {
      const int idx = q.front();
      q.pop();
      region.cells.insert(idx);
      const int r = idx / m, c = idx % m;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
      const int offsets[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                 {0, 1},   {1, -1}, {1, 0},  {1, 1}};
      for (const auto& o : offsets) {
        const int nr = r + o[0], nc = c + o[1];
        if (nr < 0 || nr >= m || nc < 0 || nc >= m) continue;
        const int nidx = nr * m + nc;
        if (!seen[nidx] && map.cells[nidx] < threshold) {
          seen[nidx] = 1;
          q.push(nidx);
        }
      }
    }
    region.bbox = BBox{rmin, cmin, rmax - rmin + 1, cmax - cmin + 1};
    out.push_back(std::move(region));
  }
  return out;
}

}  // namespace

TEST_CASE("bounding-box IoU matches hand-computed cases") {
  const BBox a{0, 0, 10, 10};
  CHECK(iou(a, a) == Catch::Approx(1.0));
  CHECK(iou(a, BBox{20, 20, 5, 5}) == 0.0);
  // 5x10 overlap, union 100 + 100 - 50
  CHECK(iou(a, BBox{5, 0, 10, 10}) == Catch::Approx(50.0 / 150.0));
  CHECK(iou(BBox{0, 0, 0, 0}, BBox{0, 0, 0, 0}) == 0.0);
}

TEST_CASE("an all-white map has no regions") {
  const Heightmap map = testutil::blank_map(32);
  CHECK(connected_components(map, 250).empty());
  CHECK(propose_rois(map).empty());
}

TEST_CASE("diagonal contact merges regions under 8-connectivity") {
  Heightmap map = testutil::blank_map(16);
  paint(map, 4, 4, 10);
  paint(map, 5, 5, 10);  // touches only at the corner
  const auto regions = connected_components(map, 250);
  REQUIRE(regions.size() == 1);
  CHECK(regions[0].area() == 2);
  CHECK(regions[0].bbox.row == 4);
  CHECK(regions[0].bbox.col == 4);
  CHECK(regions[0].bbox.height == 2);
  CHECK(regions[0].bbox.width == 2);
}

TEST_CASE("an L-shaped blob is one region with a tight box") {
  Heightmap map = testutil::blank_map(16);
  // Vertical bar of 3 plus a foot of 2.
  paint(map, 2, 3, 0);
  paint(map, 3, 3, 0);
  paint(map, 4, 3, 0);
  paint(map, 4, 4, 0);
  paint(map, 4, 5, 0);
  const auto regions = connected_components(map, 250);
  REQUIRE(regions.size() == 1);
  CHECK(regions[0].area() == 5);
  CHECK(regions[0].bbox.row == 2);
  CHECK(regions[0].bbox.col == 3);
  CHECK(regions[0].bbox.height == 3);
  CHECK(regions[0].bbox.width == 3);
}

TEST_CASE("separated blobs stay distinct and are found in scan order") {
  Heightmap map = testutil::blank_map(32);
  paint_block(map, 2, 2, 3, 3, 100);
  paint_block(map, 20, 20, 4, 4, 100);
  paint_block(map, 2, 26, 2, 2, 100);
  const auto regions = connected_components(map, 250);
  REQUIRE(regions.size() == 3);
  CHECK(regions[0].bbox.col == 2);   // first cell (2,2)
  CHECK(regions[1].bbox.col == 26);  // first cell (2,26)
  CHECK(regions[2].bbox.row == 20);
}

TEST_CASE("components match the flood-fill oracle on random maps") {
  std::mt19937 rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 24 + trial;
    Heightmap map = testutil::blank_map(m);
    std::uniform_int_distribution<int> coin(0, 99);
    std::uniform_int_distribution<int> grey(0, 254);
    for (auto& c : map.cells)
      if (coin(rng) < 35) c = static_cast<std::uint8_t>(grey(rng));

    const auto got = connected_components(map, 250);
    const auto want = flood_oracle(map, 250);
    REQUIRE(got.size() == want.size());

    // Match by cell sets; both sides must partition the foreground.
    std::size_t foreground = 0;
    for (auto c : map.cells)
      if (c < 250) ++foreground;
    std::size_t total = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      const std::set<int> cells(got[i].cells.begin(), got[i].cells.end());
      REQUIRE(cells.size() == got[i].cells.size());  // no duplicates
      bool matched = false;
      for (const auto& w : want) {
        if (w.cells != cells) continue;
        matched = true;
        CHECK(got[i].bbox.row == w.bbox.row);
        CHECK(got[i].bbox.col == w.bbox.col);
        CHECK(got[i].bbox.height == w.bbox.height);
        CHECK(got[i].bbox.width == w.bbox.width);
      }
      REQUIRE(matched);
      total += cells.size();
    }
    CHECK(total == foreground);
  }
}

TEST_CASE("a solid block proposes one margin-expanded ROI") {
  Heightmap map = testutil::blank_map(64);
  paint_block(map, 10, 20, 20, 10, 100);  // 20 rows x 10 cols
  RoiParams params;
  params.min_area = 50;
  params.margin = 2;
  const auto rois = propose_rois(map, params);
  REQUIRE(rois.size() == 1);
  CHECK(rois[0].area == 200);
  CHECK(rois[0].bbox.row == 8);
  CHECK(rois[0].bbox.col == 18);
  CHECK(rois[0].bbox.height == 24);
  CHECK(rois[0].bbox.width == 14);
  CHECK(rois[0].region.row == 10);
  CHECK(rois[0].region.col == 20);
  CHECK(rois[0].region.height == 20);
  CHECK(rois[0].region.width == 10);
  REQUIRE(rois[0].patch.width == kRoiPatchSize);
  REQUIRE(rois[0].patch.height == kRoiPatchSize);
  for (auto px : rois[0].patch.pixels) CHECK((px == 100 || px == 255));
  // Both the block and the margin ring appear in the resample.
  CHECK(std::count(rois[0].patch.pixels.begin(), rois[0].patch.pixels.end(), 100) > 0);
  CHECK(std::count(rois[0].patch.pixels.begin(), rois[0].patch.pixels.end(), 255) > 0);
}

TEST_CASE("margin expansion clamps at the map border") {
  Heightmap map = testutil::blank_map(32);
  paint_block(map, 0, 0, 8, 8, 50);
  RoiParams params;
  params.min_area = 10;
  params.margin = 3;
  const auto rois = propose_rois(map, params);
  REQUIRE(rois.size() == 1);
  CHECK(rois[0].bbox.row == 0);
  CHECK(rois[0].bbox.col == 0);
  CHECK(rois[0].bbox.height == 11);
  CHECK(rois[0].bbox.width == 11);
  CHECK(rois[0].region.row == 0);
  CHECK(rois[0].region.col == 0);
  CHECK(rois[0].region.height == 8);
  CHECK(rois[0].region.width == 8);
}

TEST_CASE("the area filter keeps only large regions") {
  Heightmap map = testutil::blank_map(64);
  paint_block(map, 2, 2, 3, 3, 100);    // area 9
  paint_block(map, 30, 30, 20, 20, 100);  // area 400
  RoiParams params;
  params.min_area = 50;
  const auto rois = propose_rois(map, params);
  REQUIRE(rois.size() == 1);
  CHECK(rois[0].area == 400);
}

TEST_CASE("proposals are ordered by decreasing area") {
  Heightmap map = testutil::blank_map(64);
  paint_block(map, 2, 2, 6, 6, 100);     // 36
  paint_block(map, 40, 40, 10, 10, 100);  // 100
  paint_block(map, 20, 20, 7, 7, 100);    // 49
  RoiParams params;
  params.min_area = 30;
  const auto rois = propose_rois(map, params);
  REQUIRE(rois.size() == 3);
  CHECK(rois[0].area == 100);
  CHECK(rois[1].area == 49);
  CHECK(rois[2].area == 36);
}

TEST_CASE("proposal count is non-increasing in the area threshold") {
  std::mt19937 rng(7);
  Heightmap map = testutil::blank_map(48);
  std::uniform_int_distribution<int> pos(0, 40);
  std::uniform_int_distribution<int> side(1, 7);
  for (int i = 0; i < 12; ++i)
    paint_block(map, pos(rng), pos(rng), side(rng), side(rng), 100);

  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (int min_area : {1, 5, 10, 20, 40, 80}) {
    RoiParams params;
    params.min_area = min_area;
    const std::size_t n = propose_rois(map, params).size();
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("sub-threshold specks do not change the proposal set") {
  Heightmap map = testutil::blank_map(64);
  paint_block(map, 10, 10, 10, 10, 80);
  const auto base = propose_rois(map);

  Heightmap speckled = map;
  paint(speckled, 40, 40, 10);
  paint(speckled, 50, 5, 10);
  paint(speckled, 5, 50, 10);  // isolated single cells, area < min_area
  const auto with_specks = propose_rois(speckled);
  REQUIRE(with_specks.size() == base.size());
  CHECK(with_specks[0].bbox.row == base[0].bbox.row);
  CHECK(with_specks[0].area == base[0].area);
}

TEST_CASE("patch resampling picks nearest-neighbor sources") {
  Heightmap map = testutil::blank_map(32);
  // 2x2 checkerboard over a 14x14 box: each quadrant maps to a 14x14 patch
  // quadrant under 28-target nearest neighbor.
  paint_block(map, 4, 4, 7, 7, 10);
  paint_block(map, 4, 11, 7, 7, 20);
  paint_block(map, 11, 4, 7, 7, 30);
  paint_block(map, 11, 11, 7, 7, 40);
  const GreyImage patch = crop_resize_patch(map, BBox{4, 4, 14, 14});
  REQUIRE(patch.width == 28);
  CHECK(patch.pixels[0] == 10);
  CHECK(patch.pixels[27] == 20);
  CHECK(patch.pixels[27 * 28] == 30);
  CHECK(patch.pixels[27 * 28 + 27] == 40);
  // Exact source index formula: sr = min(h-1, floor((r+0.5)*h/out)).
  for (int r = 0; r < 28; ++r)
    for (int c = 0; c < 28; ++c) {
      const int sr = std::min(13, static_cast<int>((r + 0.5) * 14 / 28));
      const int sc = std::min(13, static_cast<int>((c + 0.5) * 14 / 28));
      CHECK(patch.pixels[static_cast<std::size_t>(r) * 28 + c] == map.at(4 + sr, 4 + sc));
    }
}

TEST_CASE("patch resampling survives extreme aspect ratios") {
  Heightmap map = testutil::blank_map(64);
  paint_block(map, 0, 0, 1, 64, 123);  // one-cell-tall stripe
  const GreyImage patch = crop_resize_patch(map, BBox{0, 0, 1, 64});
  for (auto px : patch.pixels) CHECK(px == 123);

  CHECK_THROWS_AS(crop_resize_patch(map, BBox{0, 0, 0, 4}), InvalidParams);
  CHECK_THROWS_AS(crop_resize_patch(map, BBox{60, 60, 10, 10}), InvalidParams);
  CHECK_THROWS_AS(crop_resize_patch(map, BBox{-1, 0, 4, 4}), InvalidParams);
}

TEST_CASE("invalid proposal parameters are rejected") {
  const Heightmap map = testutil::blank_map(16);
  RoiParams params;
  params.min_area = 0;
  CHECK_THROWS_AS(propose_rois(map, params), InvalidParams);
  CHECK_THROWS_AS(connected_components(map, -1), InvalidParams);
  CHECK_THROWS_AS(connected_components(map, 256), InvalidParams);
}
