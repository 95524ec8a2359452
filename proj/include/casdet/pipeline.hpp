#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "casdet/augment.hpp"
#include "casdet/bayesopt.hpp"
#include "casdet/cnn.hpp"
#include "casdet/dataset.hpp"
#include "casdet/errors.hpp"
#include "casdet/serialize.hpp"

namespace casdet {

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  DatasetSizes sizes;
  SampleSpec positive;
  SampleSpec negative;
  RasterParams raster;
  RoiParams roi;
  CnnShape shape;
  TrainConfig train;
  AugPlan plan;  // all-zero: no augmentation
  AugSets sets;
  double iou_threshold = kDefaultIouThreshold;
  std::uint64_t master_seed = 1;
  std::filesystem::path out_dir = "out";
  bool eval_shifted = true;
  std::filesystem::path external_dir;  // <dir>/casualty/*.pcd, <dir>/non-casualty/*.pcd
  int threads = 0;

  ExperimentConfig() {
    positive.casualty = true;
    negative.casualty = false;
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"sizes", c.sizes},
                     {"positive", c.positive},
                     {"negative", c.negative},
                     {"raster", c.raster},
                     {"roi", c.roi},
                     {"shape", c.shape},
                     {"train", c.train},
                     {"plan", c.plan},
                     {"sets", c.sets},
                     {"iou_threshold", c.iou_threshold},
                     {"master_seed", c.master_seed},
                     {"out_dir", c.out_dir.string()},
                     {"eval_shifted", c.eval_shifted},
                     {"external_dir", c.external_dir.string()},
                     {"threads", c.threads}};
}

// Missing keys keep their defaults, so config files may be partial.
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (j.contains("sizes")) j.at("sizes").get_to(c.sizes);
  if (j.contains("positive")) j.at("positive").get_to(c.positive);
  if (j.contains("negative")) j.at("negative").get_to(c.negative);
  if (j.contains("raster")) j.at("raster").get_to(c.raster);
  if (j.contains("roi")) j.at("roi").get_to(c.roi);
  if (j.contains("shape")) j.at("shape").get_to(c.shape);
  if (j.contains("train")) j.at("train").get_to(c.train);
  if (j.contains("plan")) j.at("plan").get_to(c.plan);
  if (j.contains("sets")) j.at("sets").get_to(c.sets);
  if (j.contains("iou_threshold")) j.at("iou_threshold").get_to(c.iou_threshold);
  if (j.contains("master_seed")) j.at("master_seed").get_to(c.master_seed);
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("eval_shifted")) j.at("eval_shifted").get_to(c.eval_shifted);
  if (j.contains("external_dir")) c.external_dir = j.at("external_dir").get<std::string>();
  if (j.contains("threads")) j.at("threads").get_to(c.threads);
  c.positive.casualty = true;
  c.negative.casualty = false;
}

// ---------------------------------------------------------------------------
// Shifted-synthetic evaluation domain
// ---------------------------------------------------------------------------

// Fixed corruption applied to every shifted test cloud (mid-range settings of
// each point-cloud strategy).
struct ShiftedCorruption {
  double sensor_sigma = 0.2;
  double downsample_scale = 1.0 / 20.0;
  int segment_size = 100;
};

inline void to_json(nlohmann::json& j, const ShiftedCorruption& s) {
  j = nlohmann::json{{"sensor_sigma", s.sensor_sigma},
                     {"downsample_scale", s.downsample_scale},
                     {"segment_size", s.segment_size}};
}

// Body-shape ranges disjoint from the given spec's: tall/heavy/long-torso
// bodies the training distribution never produces. Tall statures keep the
// body wider than the removed segment window, so corrupted positives retain
// at least a fragment of it.
inline SampleSpec shifted_body_spec(const SampleSpec& base) {
  SampleSpec spec = base;
  spec.stature_mm = {2030.0, 2200.0};
  spec.bmi = {31.0, 38.0};
  spec.shs = {0.61, 0.68};
  return spec;
}

// Held-out-shape scenes whose clouds are corrupted with sensor noise,
// down-sampling and segment removal: a stand-in for the distribution shift a
// real sensor would introduce. Deterministic per (config, seed).
inline Manifest make_shifted_domain(const ExperimentConfig& config, std::uint64_t seed) {
  const std::filesystem::path root = config.out_dir;
  std::filesystem::create_directories(root / "shifted");
  const SampleSpec pos = shifted_body_spec(config.positive);
  const SampleSpec neg = shifted_body_spec(config.negative);
  const ShiftedCorruption corruption;

  const int per_class = config.sizes.test_per_class;
  Manifest manifest;
  manifest.meta = nlohmann::json{{"positive_spec", pos},
                                 {"negative_spec", neg},
                                 {"raster", config.raster},
                                 {"corruption", corruption},
                                 {"seed", seed}};
  manifest.entries.resize(static_cast<std::size_t>(per_class) * 2);

  parallel_for(manifest.entries.size(), [&](std::size_t i) {
    const bool positive_class = i < static_cast<std::size_t>(per_class);
    const int index = static_cast<int>(positive_class ? i : i - per_class);
    const std::string stream = positive_class ? "shifted-pos" : "shifted-neg";
    const std::uint64_t scene_seed = derive_seed(seed, stream, index);
    const SampleSpec& spec = positive_class ? pos : neg;

    const Scene scene = build_scene(spec, scene_seed);
    const PointCloud clean = render_cloud(scene, spec.camera);
    PointCloud cloud =
        sensor_noise(clean, corruption.sensor_sigma, derive_seed(scene_seed, "shift-sensor"));
    cloud = downsample_cloud(cloud, corruption.downsample_scale,
                             derive_seed(scene_seed, "shift-downsample"));
    const std::uint64_t segment_seed = derive_seed(scene_seed, "shift-segment");
    cloud = remove_segment(cloud, corruption.segment_size, segment_seed);

    ManifestEntry entry;
    entry.id = detail::indexed_id(stream, index);
    entry.split = "shifted";
    entry.kind = "cloud";
    entry.path = "shifted/" + entry.id + ".pcd";
    entry.casualty = scene.label == SceneLabel::casualty;
    entry.scene_seed = scene_seed;
    entry.raster_seed = derive_seed(scene_seed, "raster");
    save_pcd(root / entry.path, cloud);

    if (scene.body) {
      const Plane plane = estimate_ground_plane(cloud, config.raster.plane_iters,
                                                config.raster.tau, entry.raster_seed);
      const std::optional<GridWindow> removed =
          corruption.segment_size > 0
              ? std::optional<GridWindow>(segment_window(clean.width, clean.height,
                                                         corruption.segment_size, segment_seed))
              : std::nullopt;
      entry.body_boxes =
          visible_body_boxes(scene, spec.camera, clean, plane, config.raster, removed);
      entry.has_body = !entry.body_boxes.empty();
    }
    manifest.entries[i] = std::move(entry);
  }, config.threads);
  return manifest;
}

// ---------------------------------------------------------------------------
// End-to-end pipeline
// ---------------------------------------------------------------------------

struct PipelineResult {
  DomainEval clean;  // test split
  DomainEval val;
  std::optional<DomainEval> shifted;
  std::optional<DomainEval> external;
  std::vector<double> loss_history;
  std::size_t train_patches = 0;  // after class balancing
  std::filesystem::path model_path;
  std::filesystem::path manifest_path;
  std::filesystem::path report_path;
};

namespace detail {

inline std::vector<ManifestEntry> external_entries(const std::filesystem::path& root) {
  std::vector<ManifestEntry> entries;
  const auto scan = [&](const char* sub, bool casualty) {
    const std::filesystem::path dir = root / sub;
    if (!std::filesystem::is_directory(dir)) return;
    std::vector<std::filesystem::path> files;
    for (const auto& f : std::filesystem::directory_iterator(dir))
      if (f.is_regular_file() && f.path().extension() == ".pcd") files.push_back(f.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      ManifestEntry entry;
      entry.id = "external-" + file.stem().string();
      entry.split = "external";
      entry.kind = "cloud";
      entry.path = file.string();  // absolute; resolves regardless of root
      entry.casualty = casualty;
      entry.raster_seed = derive_seed(hash_str(file.filename().string()), "raster");
      entries.push_back(std::move(entry));
    }
  };
  scan("casualty", true);
  scan("non-casualty", false);
  return entries;
}

}  // namespace detail

// generate -> augment -> rasterize/propose/label -> train -> evaluate per
// domain. Every stage seeds from the master seed, so a rerun with the same
// config reproduces all artifacts and metrics exactly.
inline PipelineResult run_pipeline(const ExperimentConfig& config) {
  const std::filesystem::path root = config.out_dir;
  std::filesystem::create_directories(root);

  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };

  Manifest manifest = stage("synth", [&] {
    return generate_dataset(root, config.positive, config.negative, config.sizes,
                            config.raster, config.master_seed, config.threads);
  });

  std::optional<Manifest> shifted_manifest;
  if (config.eval_shifted) {
    shifted_manifest = stage("shift", [&] {
      return make_shifted_domain(config, derive_seed(config.master_seed, "shifted"));
    });
  }

  std::vector<ManifestEntry> train_entries = filter_split(manifest, "train").entries;
  if (config.plan.total() > 0) {
    const Manifest augmented = stage("augment", [&] {
      Manifest train_manifest = filter_split(manifest, "train");
      return apply_plan(train_manifest, config.plan, config.sets, root, config.raster,
                        derive_seed(config.master_seed, "plan"), config.threads);
    });
    for (std::size_t i = train_entries.size(); i < augmented.entries.size(); ++i) {
      manifest.entries.push_back(augmented.entries[i]);
      train_entries.push_back(augmented.entries[i]);
    }
  }
  if (shifted_manifest)
    manifest.entries.insert(manifest.entries.end(), shifted_manifest->entries.begin(),
                            shifted_manifest->entries.end());

  PipelineResult result;
  const PatchDataset train_patches = stage("train", [&] {
    const PatchDataset raw = build_patch_dataset(root, train_entries, config.raster,
                                                 config.roi, config.iou_threshold,
                                                 config.threads);
    return balance_dataset(raw, derive_seed(config.master_seed, "balance"));
  });
  result.train_patches = train_patches.size();

  CnnModel model = init_model(config.shape, derive_seed(config.master_seed, "init"));
  result.loss_history = stage("train", [&] {
    TrainConfig train_config = config.train;
    train_config.seed = derive_seed(config.master_seed, "train");
    return train(model, train_patches.inputs, train_patches.labels, train_config);
  });

  result.model_path = root / "model.cnn";
  save_model(model, result.model_path);

  const auto eval_split = [&](const std::vector<ManifestEntry>& entries) {
    return evaluate_model(model, root, entries, config.raster, config.roi,
                          config.iou_threshold, config.threads);
  };
  result.val = stage("eval", [&] { return eval_split(filter_split(manifest, "val").entries); });
  result.clean =
      stage("eval", [&] { return eval_split(filter_split(manifest, "test").entries); });
  if (shifted_manifest)
    result.shifted = stage("eval", [&] { return eval_split(shifted_manifest->entries); });
  if (!config.external_dir.empty()) {
    const auto entries = detail::external_entries(config.external_dir);
    if (!entries.empty()) result.external = stage("eval", [&] { return eval_split(entries); });
  }

  result.manifest_path = root / "manifest.json";
  save_manifest(manifest, result.manifest_path);

  nlohmann::json report{{"config", config},
                        {"train_patches", result.train_patches},
                        {"loss_history", result.loss_history},
                        {"domains",
                         {{"val", result.val}, {"clean", result.clean}}}};
  if (result.shifted) report["domains"]["shifted"] = *result.shifted;
  if (result.external) report["domains"]["external"] = *result.external;
  result.report_path = root / "report.json";
  std::ofstream out(result.report_path);
  out << report.dump(1, '\t') << "\n";
  if (!out) throw StageError("report", "failed writing " + result.report_path.string());
  return result;
}

// ---------------------------------------------------------------------------
// Strategy/count ablation sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string strategy;  // "baseline" for the no-augmentation row
  long long count = 0;
  double clean_accuracy = 0.0;
  double shifted_accuracy = 0.0;  // clean accuracy again when shifted eval is off
  double f1 = 0.0;                // scene F1 on the shifted domain (clean when off)
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::filesystem::path csv_path;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string csv = "strategy,count,clean_accuracy,shifted_accuracy,f1\n";
  char line[256];
  for (const SweepRow& row : rows) {
    std::snprintf(line, sizeof(line), "%s,%lld,%.6f,%.6f,%.6f\n", row.strategy.c_str(),
                  row.count, row.clean_accuracy, row.shifted_accuracy, row.f1);
    csv += line;
  }
  return csv;
}

// One pipeline run per (strategy, count) plus a baseline row, all under the
// same master seed so rows share base data and differ only in the plan. Rows
// are flushed to CSV as they finish; a failing cell leaves the completed rows
// on disk.
inline SweepResult run_sweep(const ExperimentConfig& config,
                             const std::vector<AugStrategy>& strategies,
                             const std::vector<long long>& counts) {
  if (counts.empty()) throw InvalidParams("sweep needs a non-empty count list");
  SweepResult result;
  std::filesystem::create_directories(config.out_dir);
  result.csv_path = config.out_dir / "sweep.csv";

  const auto flush = [&] {
    std::ofstream out(result.csv_path);
    out << sweep_csv(result.rows);
  };
  const auto run_cell = [&](const std::string& name, const AugPlan& plan) {
    ExperimentConfig cell = config;
    cell.plan = plan;
    cell.out_dir = config.out_dir / "cells" / (name.empty() ? "baseline" : name);
    try {
      const PipelineResult r = run_pipeline(cell);
      SweepRow row;
      row.strategy = name.empty() ? "baseline" : name.substr(0, name.rfind('-'));
      row.count = plan.budget;
      row.clean_accuracy = r.clean.scene.accuracy;
      const DomainEval& shifted = r.shifted ? *r.shifted : r.clean;
      row.shifted_accuracy = shifted.scene.accuracy;
      row.f1 = shifted.scene.f1;
      result.rows.push_back(row);
      flush();
    } catch (const std::exception& e) {
      flush();
      throw StageError("sweep", "cell '" + (name.empty() ? "baseline" : name) +
                                    "' failed: " + e.what());
    }
  };

  run_cell("", AugPlan{});
  for (const AugStrategy strategy : strategies) {
    for (const long long count : counts) {
      AugPlan plan;
      plan.count(strategy) = count;
      plan.budget = count;
      run_cell(std::string(to_string(strategy)) + "-" + std::to_string(count), plan);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Bayesian optimization over the full pipeline
// ---------------------------------------------------------------------------

struct BoRunResult {
  BoResult bo;
  std::filesystem::path csv_path;
};

inline std::string bo_csv(const SearchSpace& space, const std::vector<BoObservation>& history) {
  std::string csv = "iteration";
  for (const AugStrategy dim : space.dims) csv += "," + std::string(to_string(dim));
  csv += ",accuracy\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    csv += std::to_string(i);
    for (const long long c : history[i].point) csv += "," + std::to_string(c);
    char val[32];
    std::snprintf(val, sizeof(val), ",%.6f", history[i].value);
    csv += val;
    csv += "\n";
  }
  return csv;
}

// Objective: validation-set scene accuracy of a pipeline run with the plan
// under test. Every evaluation lands in its own subdirectory; the trace CSV
// is rewritten after each evaluation.
inline BoRunResult run_bo(const ExperimentConfig& config, const SearchSpace& space, int iters) {
  std::filesystem::create_directories(config.out_dir);
  BoRunResult result;
  result.csv_path = config.out_dir / "bo.csv";

  int eval_counter = 0;
  const auto objective = [&](const AugPlan& plan) {
    ExperimentConfig cell = config;
    cell.plan = plan;
    cell.eval_shifted = config.eval_shifted;
    char sub[32];
    std::snprintf(sub, sizeof(sub), "eval-%03d", eval_counter++);
    cell.out_dir = config.out_dir / sub;
    const PipelineResult r = run_pipeline(cell);
    return r.val.scene.accuracy;
  };

  result.bo = optimize_mix(objective, space, iters, derive_seed(config.master_seed, "bo"));
  std::ofstream out(result.csv_path);
  out << bo_csv(space, result.bo.history);
  return result;
}

// ---------------------------------------------------------------------------
// Single-cloud inference
// ---------------------------------------------------------------------------

struct InferenceRoi {
  BBox bbox;
  int area = 0;
  int label = 0;
  double prob_casualty = 0.0;
};

struct InferenceResult {
  std::vector<InferenceRoi> rois;
  Heightmap map;
};

inline InferenceResult infer_cloud(const CnnModel& model, const PointCloud& cloud,
                                   const RasterParams& raster, const RoiParams& roi_params,
                                   std::uint64_t seed = 0) {
  InferenceResult result;
  const Plane plane = estimate_ground_plane(cloud, raster.plane_iters, raster.tau, seed);
  result.map = rasterize_heightmap(cloud, plane, raster);
  for (const Roi& roi : propose_rois(result.map, roi_params)) {
    const auto probs = forward(model, patch_to_input(roi.patch));
    InferenceRoi out;
    out.bbox = roi.bbox;
    out.area = roi.area;
    out.prob_casualty = probs[1];
    out.label = probs[1] > probs[0] ? 1 : 0;
    result.rois.push_back(out);
  }
  return result;
}

}  // namespace casdet
