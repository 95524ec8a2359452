#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "casdet/augment.hpp"
#include "casdet/cloud.hpp"
#include "casdet/cnn.hpp"
#include "casdet/errors.hpp"
#include "casdet/heightmap.hpp"
#include "casdet/parallel.hpp"
#include "casdet/plane.hpp"
#include "casdet/rng.hpp"
#include "casdet/roi.hpp"
#include "casdet/serialize.hpp"
#include "casdet/synth.hpp"

namespace casdet {

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

// One emitted sample file. Augmented entries carry provenance; body_boxes are
// the ground-projected boxes of the body's visible connected components in
// heightmap cells under the manifest's raster parameters, used to label
// proposals. A body split by occlusion or point removal yields one box per
// surviving part, so each part can match a proposal on its own.
struct ManifestEntry {
  std::string id;
  std::string split;  // train | val | test | shifted | external
  std::string kind;   // cloud | map
  std::string path;   // relative to the manifest root
  bool casualty = false;
  std::uint64_t scene_seed = 0;
  std::uint64_t raster_seed = 0;
  std::string source_id;  // empty for base samples
  std::string strategy;   // empty for base samples
  AugParams params;
  std::uint64_t op_seed = 0;
  bool has_body = false;
  std::vector<BBox> body_boxes;
};

inline void to_json(nlohmann::json& j, const ManifestEntry& e) {
  j = nlohmann::json{{"id", e.id},
                     {"split", e.split},
                     {"kind", e.kind},
                     {"path", e.path},
                     {"casualty", e.casualty},
                     {"scene_seed", e.scene_seed},
                     {"raster_seed", e.raster_seed},
                     {"source_id", e.source_id},
                     {"strategy", e.strategy},
                     {"params", e.params},
                     {"op_seed", e.op_seed},
                     {"has_body", e.has_body},
                     {"body_boxes", e.body_boxes}};
}

inline void from_json(const nlohmann::json& j, ManifestEntry& e) {
  j.at("id").get_to(e.id);
  j.at("split").get_to(e.split);
  j.at("kind").get_to(e.kind);
  j.at("path").get_to(e.path);
  j.at("casualty").get_to(e.casualty);
  j.at("scene_seed").get_to(e.scene_seed);
  j.at("raster_seed").get_to(e.raster_seed);
  j.at("source_id").get_to(e.source_id);
  j.at("strategy").get_to(e.strategy);
  j.at("params").get_to(e.params);
  j.at("op_seed").get_to(e.op_seed);
  j.at("has_body").get_to(e.has_body);
  j.at("body_boxes").get_to(e.body_boxes);
}

struct Manifest {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<ManifestEntry> entries;
};

inline void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  nlohmann::json j{{"meta", manifest.meta}, {"entries", manifest.entries}};
  std::ofstream out(path);
  if (!out) throw Error("cannot open manifest for writing: " + path.string());
  out << j.dump(1, '\t') << "\n";
  if (!out) throw Error("failed writing manifest: " + path.string());
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError("manifest is not valid JSON: " + path.string());
  Manifest m;
  m.meta = j.value("meta", nlohmann::json::object());
  m.entries = j.at("entries").get<std::vector<ManifestEntry>>();
  return m;
}

inline Manifest filter_split(const Manifest& manifest, std::string_view split) {
  Manifest out;
  out.meta = manifest.meta;
  for (const auto& e : manifest.entries)
    if (e.split == split) out.entries.push_back(e);
  return out;
}

// ---------------------------------------------------------------------------
// Ground-truth projection
// ---------------------------------------------------------------------------

// Clouds, estimated planes and heightmap charts all live in the camera frame;
// scene bodies are built in world coordinates. Re-express the capsules before
// projecting them onto a chart.
inline BodyModel body_in_camera_frame(const BodyModel& body, const CameraModel& camera) {
  BodyModel out = body;
  const Eigen::Isometry3d world_to_cam = camera.pose.inverse();
  for (Capsule& cap : out.primitives) {
    cap.p0 = world_to_cam * cap.p0;
    cap.p1 = world_to_cam * cap.p1;
  }
  out.axis = world_to_cam.linear() * out.axis;
  return out;
}

// Ground-projected body bounding box in heightmap cells (clamped to the
// grid); nullopt when the projection misses the grid entirely.
inline std::optional<BBox> body_ground_bbox(const BodyModel& body, const GroundFrame& frame,
                                            int m, double extent) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const Capsule& cap : body.primitives) {
    for (const Eigen::Vector3d& p : {cap.p0, cap.p1}) {
      const Eigen::Vector2d ab = frame.chart(p);
      amin = std::min(amin, ab.x() - cap.radius);
      amax = std::max(amax, ab.x() + cap.radius);
      bmin = std::min(bmin, ab.y() - cap.radius);
      bmax = std::max(bmax, ab.y() + cap.radius);
    }
  }
  const double half = extent / 2.0;
  const double cell = extent / m;
  const int r0 = std::max(0, static_cast<int>(std::floor((amin + half) / cell)));
  const int c0 = std::max(0, static_cast<int>(std::floor((bmin + half) / cell)));
  const int r1 = std::min(m - 1, static_cast<int>(std::floor((amax + half) / cell)));
  const int c1 = std::min(m - 1, static_cast<int>(std::floor((bmax + half) / cell)));
  if (r0 > r1 || c0 > c1) return std::nullopt;
  return BBox{r0, c0, r1 - r0 + 1, c1 - c0 + 1};
}

// Ground-projected boxes of the body pixels the camera actually sees: pixels
// of the rendered cloud where a body capsule is the nearest scene hit,
// optionally excluding a removed grid window. Cell binning and connectivity
// match the rasterizer and the region finder, so each returned box frames one
// connected blob of cells a body proposal can cover. Empty when no visible
// body pixel survives on the grid.
inline std::vector<BBox> visible_body_boxes(const Scene& scene, const CameraModel& camera,
                                            const PointCloud& rendered, const Plane& plane,
                                            const RasterParams& raster,
                                            const std::optional<GridWindow>& removed = {}) {
  if (!scene.body) return {};
  PointCloud body_px =
      PointCloud::invalid_grid(rendered.width, rendered.height, rendered.frame_id);
  const Eigen::Matrix3d rot = camera.pose.linear();
  const Eigen::Vector3d origin = camera.pose.translation();
  for (int v = 0; v < rendered.height; ++v) {
    for (int u = 0; u < rendered.width; ++u) {
      if (removed && removed->contains(v, u)) continue;
      const std::size_t i = rendered.index(v, u);
      if (!rendered.valid(i)) continue;
      const Eigen::Vector3d dir_cam((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy,
                                    1.0);
      const Eigen::Vector3d dhat_cam = dir_cam.normalized();
      const double s_scene = static_cast<double>(rendered.points[i].z()) / dhat_cam.z();
      const Eigen::Vector3d dhat_world = rot * dhat_cam;
      double s_body = std::numeric_limits<double>::infinity();
      for (const Capsule& cap : scene.body->primitives)
        s_body = std::min(s_body, detail::ray_capsule(origin, dhat_world, cap));
      if (!(s_body <= s_scene + 1e-6 * std::max(1.0, s_scene))) continue;
      body_px.points[i] = rendered.points[i];
    }
  }
  const std::vector<HeightSample> samples =
      project_to_cells(body_px, plane, raster.m, raster.extent, raster.tau);
  if (samples.empty()) return {};
  Heightmap mask;
  mask.m = raster.m;
  mask.extent = raster.extent;
  mask.h_norm = raster.h_norm;
  mask.cells.assign(static_cast<std::size_t>(raster.m) * raster.m, 255);
  for (const HeightSample& s : samples)
    mask.at(s.row, s.col) = 0;
  std::vector<BBox> boxes;
  for (const Region& region : connected_components(mask, 1))
    boxes.push_back(region.bbox);
  return boxes;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct DatasetSizes {
  int train_per_class = 200;
  int val_per_class = 100;
  int test_per_class = 100;
};

inline void to_json(nlohmann::json& j, const DatasetSizes& s) {
  j = nlohmann::json{{"train_per_class", s.train_per_class},
                     {"val_per_class", s.val_per_class},
                     {"test_per_class", s.test_per_class}};
}
inline void from_json(const nlohmann::json& j, DatasetSizes& s) {
  j.at("train_per_class").get_to(s.train_per_class);
  j.at("val_per_class").get_to(s.val_per_class);
  j.at("test_per_class").get_to(s.test_per_class);
}

namespace detail {

inline std::string indexed_id(std::string_view prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "-%05d", i);
  return std::string(prefix) + buf;
}

}  // namespace detail

// Renders one scene to a PCD under root and fills a manifest entry, including
// the ground-truth body box under `raster`.
inline ManifestEntry emit_scene_entry(const std::filesystem::path& root, std::string id,
                                      std::string split, const SampleSpec& spec,
                                      std::uint64_t scene_seed, const RasterParams& raster) {
  auto [cloud, scene] = generate_sample(spec, scene_seed);

  ManifestEntry entry;
  entry.id = std::move(id);
  entry.split = std::move(split);
  entry.kind = "cloud";
  entry.path = "scenes/" + entry.id + ".pcd";
  entry.casualty = scene.label == SceneLabel::casualty;
  entry.scene_seed = scene_seed;
  entry.raster_seed = derive_seed(scene_seed, "raster");
  save_pcd(root / entry.path, cloud);

  if (scene.body) {
    const Plane plane = estimate_ground_plane(cloud, raster.plane_iters, raster.tau,
                                              entry.raster_seed);
    entry.body_boxes = visible_body_boxes(scene, spec.camera, cloud, plane, raster);
    entry.has_body = !entry.body_boxes.empty();
  }
  return entry;
}

// Fixed split/class/index ordering; every scene seed derives from the master,
// so the manifest is reproducible entry by entry.
inline Manifest generate_dataset(const std::filesystem::path& root, const SampleSpec& positive,
                                 const SampleSpec& negative, const DatasetSizes& sizes,
                                 const RasterParams& raster, std::uint64_t master_seed,
                                 int threads = 0) {
  if (sizes.train_per_class < 1 || sizes.val_per_class < 1 || sizes.test_per_class < 1)
    throw InvalidParams("dataset sizes must be >= 1 per class");
  std::filesystem::create_directories(root / "scenes");

  struct Slot {
    std::string split;
    bool positive_class;
    int index;
  };
  std::vector<Slot> slots;
  const auto add = [&](const char* split, int per_class) {
    for (int i = 0; i < per_class; ++i) slots.push_back({split, true, i});
    for (int i = 0; i < per_class; ++i) slots.push_back({split, false, i});
  };
  add("train", sizes.train_per_class);
  add("val", sizes.val_per_class);
  add("test", sizes.test_per_class);

  Manifest manifest;
  manifest.meta = nlohmann::json{{"positive_spec", positive},
                                 {"negative_spec", negative},
                                 {"sizes", sizes},
                                 {"raster", raster},
                                 {"master_seed", master_seed}};
  manifest.entries.resize(slots.size());
  parallel_for(slots.size(), [&](std::size_t i) {
    const Slot& slot = slots[i];
    const std::string stream = slot.split + std::string(slot.positive_class ? "-pos" : "-neg");
    const std::uint64_t scene_seed = derive_seed(master_seed, stream, slot.index);
    const SampleSpec& spec = slot.positive_class ? positive : negative;
    manifest.entries[i] = emit_scene_entry(root, detail::indexed_id(stream, slot.index),
                                           slot.split, spec, scene_seed, raster);
  }, threads);
  return manifest;
}

// ---------------------------------------------------------------------------
// Per-entry processing: file -> heightmap -> labeled proposals
// ---------------------------------------------------------------------------

inline constexpr double kDefaultIouThreshold = 0.3;

struct ProcessedSample {
  Heightmap map;
  std::vector<Roi> rois;
  std::vector<int> roi_labels;  // 1 where IoU(bbox, body box) >= threshold
  int scene_label = 0;
};

inline Heightmap heightmap_from_image(const GreyImage& img, const RasterParams& raster) {
  if (img.width != img.height) throw ShapeError("heightmap images must be square");
  Heightmap map;
  map.m = img.width;
  map.extent = raster.extent;
  map.h_norm = raster.h_norm;
  map.origin = Eigen::Vector2d(-raster.extent / 2.0, -raster.extent / 2.0);
  map.cells = img.pixels;
  return map;
}

inline ProcessedSample process_entry(const std::filesystem::path& root,
                                     const ManifestEntry& entry, const RasterParams& raster,
                                     const RoiParams& roi_params,
                                     double iou_threshold = kDefaultIouThreshold) {
  ProcessedSample out;
  out.scene_label = entry.casualty ? 1 : 0;
  if (entry.kind == "cloud") {
    const PointCloud cloud = load_pcd(root / entry.path);
    const Plane plane = estimate_ground_plane(cloud, raster.plane_iters, raster.tau,
                                              entry.raster_seed);
    out.map = rasterize_heightmap(cloud, plane, raster);
  } else if (entry.kind == "map") {
    out.map = heightmap_from_image(load_pgm(root / entry.path), raster);
  } else {
    throw InvalidParams("unknown manifest entry kind: " + entry.kind);
  }
  out.rois = propose_rois(out.map, roi_params);
  out.roi_labels.reserve(out.rois.size());
  for (const Roi& roi : out.rois) {
    bool hit = false;
    for (const BBox& box : entry.body_boxes)
      hit = hit || iou(roi.region, box) >= iou_threshold;
    out.roi_labels.push_back(hit ? 1 : 0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Patch datasets
// ---------------------------------------------------------------------------

struct PatchDataset {
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
};

inline PatchDataset build_patch_dataset(const std::filesystem::path& root,
                                        const std::vector<ManifestEntry>& entries,
                                        const RasterParams& raster, const RoiParams& roi_params,
                                        double iou_threshold = kDefaultIouThreshold,
                                        int threads = 0) {
  std::vector<PatchDataset> per_entry(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const ProcessedSample sample = process_entry(root, entries[i], raster, roi_params,
                                                 iou_threshold);
    for (std::size_t r = 0; r < sample.rois.size(); ++r) {
      per_entry[i].inputs.push_back(patch_to_input(sample.rois[r].patch));
      per_entry[i].labels.push_back(sample.roi_labels[r]);
    }
  }, threads);

  PatchDataset merged;
  for (auto& part : per_entry) {
    std::move(part.inputs.begin(), part.inputs.end(), std::back_inserter(merged.inputs));
    merged.labels.insert(merged.labels.end(), part.labels.begin(), part.labels.end());
  }
  return merged;
}

// Downsamples the majority class to the minority count (seeded choice of the
// kept samples, original order preserved).
inline PatchDataset balance_dataset(const PatchDataset& data, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    (data.labels[i] == 1 ? pos : neg).push_back(i);
  std::vector<std::size_t>& majority = pos.size() > neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());

  auto rng = make_rng(derive_seed(seed, "class-balance"));
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, majority.size() - 1);
    std::swap(majority[i], majority[d(rng)]);
  }
  majority.resize(keep);

  std::vector<std::size_t> kept;
  kept.reserve(pos.size() + neg.size());
  kept.insert(kept.end(), pos.begin(), pos.end());
  kept.insert(kept.end(), neg.begin(), neg.end());
  std::sort(kept.begin(), kept.end());

  PatchDataset out;
  out.inputs.reserve(kept.size());
  out.labels.reserve(kept.size());
  for (std::size_t i : kept) {
    out.inputs.push_back(data.inputs[i]);
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plan-driven augmentation
// ---------------------------------------------------------------------------

// Expands `input` with plan.count(s) augmented samples per strategy, cycling
// the input entries as sources and drawing per-sample parameters from `sets`.
// Cloud strategies emit corrupted PCDs; image strategies rasterize the source
// and emit corrupted PGMs. Body boxes are recomputed for cloud strategies
// (the corrupted cloud re-estimates its ground frame) and inherited for image
// strategies.
inline Manifest apply_plan(const Manifest& input, const AugPlan& plan, const AugSets& sets,
                           const std::filesystem::path& root, const RasterParams& raster,
                           std::uint64_t seed, int threads = 0) {
  validate(plan);
  if (input.entries.empty()) throw DegenerateDataset("cannot augment an empty dataset");
  for (const auto& e : input.entries)
    if (e.kind != "cloud")
      throw InvalidParams("augmentation sources must be point-cloud entries");

  SampleSpec positive_spec, negative_spec;
  const bool can_rebuild = input.meta.contains("positive_spec");
  if (can_rebuild) {
    input.meta.at("positive_spec").get_to(positive_spec);
    input.meta.at("negative_spec").get_to(negative_spec);
  }
  if (plan.total() > 0) std::filesystem::create_directories(root / "aug");

  Manifest out = input;
  for (AugStrategy strategy : kAllStrategies) {
    const long long count = plan.count(strategy);
    if (count == 0) continue;
    const std::string name(to_string(strategy));
    std::vector<ManifestEntry> produced(static_cast<std::size_t>(count));

    parallel_for(produced.size(), [&](std::size_t i) {
      const ManifestEntry& source = input.entries[i % input.entries.size()];
      const std::uint64_t op_seed =
          derive_seed(seed, "aug-" + name, static_cast<std::uint64_t>(i));
      auto prng = make_rng(derive_seed(op_seed, "params"));
      AugParams params = draw_params(strategy, sets, prng);

      ManifestEntry entry;
      entry.id = detail::indexed_id("aug-" + name, static_cast<int>(i));
      entry.split = source.split;
      entry.casualty = source.casualty;
      entry.scene_seed = source.scene_seed;
      entry.source_id = source.id;
      entry.strategy = name;
      entry.op_seed = op_seed;

      const PointCloud cloud = load_pcd(root / source.path);
      if (strategy == AugStrategy::segment) {
        // A drawn window wider than the grid collapses to the full grid side.
        const int cap = static_cast<int>(std::min(cloud.width, cloud.height));
        if (params.segment_size > cap) params.segment_size = cap;
      }
      entry.params = params;
      if (is_cloud_level(strategy)) {
        const PointCloud corrupted =
            apply_to_cloud(strategy, cloud, params, derive_seed(op_seed, "op"));
        entry.kind = "cloud";
        entry.path = "aug/" + entry.id + ".pcd";
        entry.raster_seed = derive_seed(op_seed, "raster");
        save_pcd(root / entry.path, corrupted);
        if (source.has_body && can_rebuild) {
          const SampleSpec& spec = source.casualty ? positive_spec : negative_spec;
          const Scene scene = build_scene(spec, source.scene_seed);
          const Plane plane = estimate_ground_plane(corrupted, raster.plane_iters, raster.tau,
                                                    entry.raster_seed);
          std::optional<GridWindow> removed;
          if (strategy == AugStrategy::segment && params.segment_size > 0)
            removed = segment_window(cloud.width, cloud.height, params.segment_size,
                                     derive_seed(op_seed, "op"));
          entry.body_boxes =
              visible_body_boxes(scene, spec.camera, cloud, plane, raster, removed);
          entry.has_body = !entry.body_boxes.empty();
        }
      } else {
        const Plane plane = estimate_ground_plane(cloud, raster.plane_iters, raster.tau,
                                                  source.raster_seed);
        const Heightmap map = rasterize_heightmap(cloud, plane, raster);
        const Heightmap corrupted =
            apply_to_map(strategy, map, params, derive_seed(op_seed, "op"));
        entry.kind = "map";
        entry.path = "aug/" + entry.id + ".pgm";
        entry.raster_seed = source.raster_seed;
        entry.has_body = source.has_body;
        entry.body_boxes = source.body_boxes;
        save_pgm(root / entry.path, corrupted);
      }
      produced[i] = std::move(entry);
    }, threads);

    out.entries.insert(out.entries.end(), std::make_move_iterator(produced.begin()),
                       std::make_move_iterator(produced.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct DomainEval {
  Metrics scene;  // casualty iff any proposal classifies as casualty
  Metrics roi;    // per-proposal against IoU ground truth
  int scenes = 0;
  int rois = 0;
  int scenes_without_rois = 0;
};

// Scene rule: a cloud is a casualty when at least one proposed region
// classifies as one; a cloud with no proposals is a non-casualty. Clouds too
// degenerate for plane estimation count as proposal-free.
inline DomainEval evaluate_model(const CnnModel& model, const std::filesystem::path& root,
                                 const std::vector<ManifestEntry>& entries,
                                 const RasterParams& raster, const RoiParams& roi_params,
                                 double iou_threshold = kDefaultIouThreshold,
                                 int threads = 0) {
  struct EntryResult {
    int scene_pred = 0;
    int scene_label = 0;
    bool no_rois = false;
    std::vector<int> roi_preds, roi_labels;
  };
  std::vector<EntryResult> results(entries.size());

  parallel_for(entries.size(), [&](std::size_t i) {
    EntryResult& res = results[i];
    res.scene_label = entries[i].casualty ? 1 : 0;
    ProcessedSample sample;
    try {
      sample = process_entry(root, entries[i], raster, roi_params, iou_threshold);
    } catch (const DegenerateGeometry&) {
      res.no_rois = true;
      return;
    } catch (const InsufficientPoints&) {
      res.no_rois = true;
      return;
    }
    res.no_rois = sample.rois.empty();
    for (std::size_t r = 0; r < sample.rois.size(); ++r) {
      const int pred = predict_label(model, patch_to_input(sample.rois[r].patch));
      res.roi_preds.push_back(pred);
      res.roi_labels.push_back(sample.roi_labels[r]);
      if (pred == 1) res.scene_pred = 1;
    }
  }, threads);

  std::vector<int> scene_preds, scene_labels, roi_preds, roi_labels;
  DomainEval eval;
  for (const EntryResult& res : results) {
    scene_preds.push_back(res.scene_pred);
    scene_labels.push_back(res.scene_label);
    roi_preds.insert(roi_preds.end(), res.roi_preds.begin(), res.roi_preds.end());
    roi_labels.insert(roi_labels.end(), res.roi_labels.begin(), res.roi_labels.end());
    if (res.no_rois) ++eval.scenes_without_rois;
  }
  eval.scene = compute_metrics(scene_preds, scene_labels);
  eval.roi = compute_metrics(roi_preds, roi_labels);
  eval.scenes = static_cast<int>(scene_preds.size());
  eval.rois = static_cast<int>(roi_preds.size());
  return eval;
}

inline void to_json(nlohmann::json& j, const DomainEval& e) {
  j = nlohmann::json{{"scene", e.scene},
                     {"roi", e.roi},
                     {"scenes", e.scenes},
                     {"rois", e.rois},
                     {"scenes_without_rois", e.scenes_without_rois}};
}
inline void from_json(const nlohmann::json& j, DomainEval& e) {
  j.at("scene").get_to(e.scene);
  j.at("roi").get_to(e.roi);
  j.at("scenes").get_to(e.scenes);
  j.at("rois").get_to(e.rois);
  j.at("scenes_without_rois").get_to(e.scenes_without_rois);
}

}  // namespace casdet
