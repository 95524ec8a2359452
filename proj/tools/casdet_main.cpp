// Command-line front end: dataset synthesis, plan-driven augmentation,
// training, evaluation, ablation sweeps, augmentation-mix optimization, and
// single-cloud inference.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "casdet/casdet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config JSON file");
  cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "master seed (overrides config)")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--threads", opts.threads, "worker threads (0 = hardware)");
}

// Relative output directories resolve under $CASDET_OUT when it is set.
fs::path resolve_out(const fs::path& dir) {
  if (dir.is_absolute()) return dir;
  if (const char* root = std::getenv("CASDET_OUT")) return fs::path(root) / dir;
  return dir;
}

casdet::ExperimentConfig load_config(const CommonOpts& opts) {
  casdet::ExperimentConfig config;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw casdet::Error("cannot open config file: " + opts.config_path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded())
      throw casdet::ParseError("config file is not valid JSON: " + opts.config_path);
    config = j.get<casdet::ExperimentConfig>();
  }
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  if (opts.seed_set) config.master_seed = opts.seed;
  if (opts.threads >= 0) config.threads = opts.threads;
  config.out_dir = resolve_out(config.out_dir);
  return config;
}

casdet::RasterParams manifest_raster(const casdet::Manifest& manifest,
                                     const casdet::RasterParams& fallback) {
  if (manifest.meta.contains("raster"))
    return manifest.meta.at("raster").get<casdet::RasterParams>();
  return fallback;
}

json metrics_json(const casdet::DomainEval& eval) {
  json j;
  casdet::to_json(j, eval);
  return j;
}

int cmd_synth(const CommonOpts& opts) {
  const casdet::ExperimentConfig config = load_config(opts);
  casdet::Manifest manifest =
      casdet::generate_dataset(config.out_dir, config.positive, config.negative, config.sizes,
                               config.raster, config.master_seed, config.threads);
  std::size_t shifted = 0;
  if (config.eval_shifted) {
    casdet::Manifest sm = casdet::make_shifted_domain(
        config, casdet::derive_seed(config.master_seed, "shifted"));
    shifted = sm.entries.size();
    manifest.entries.insert(manifest.entries.end(), sm.entries.begin(), sm.entries.end());
  }
  casdet::save_manifest(manifest, config.out_dir / "manifest.json");
  std::cout << "wrote " << manifest.entries.size() << " entries (" << shifted
            << " shifted) under " << config.out_dir.string() << "\n";
  return 0;
}

int cmd_augment(const CommonOpts& opts, const std::vector<std::string>& plan_args) {
  const casdet::ExperimentConfig config = load_config(opts);
  casdet::AugPlan plan = config.plan;
  for (const std::string& arg : plan_args) {  // strategy=count pairs
    const auto eq = arg.find('=');
    if (eq == std::string::npos)
      throw casdet::InvalidParams("expected strategy=count, got: " + arg);
    plan.count(casdet::aug_strategy_from_string(arg.substr(0, eq))) =
        std::stoll(arg.substr(eq + 1));
  }
  plan.budget = plan.total();

  const fs::path manifest_path = config.out_dir / "manifest.json";
  casdet::Manifest manifest = casdet::load_manifest(manifest_path);
  const casdet::RasterParams raster = manifest_raster(manifest, config.raster);

  casdet::Manifest train = casdet::filter_split(manifest, "train");
  const std::size_t base = train.entries.size();
  casdet::Manifest augmented =
      casdet::apply_plan(train, plan, config.sets, config.out_dir, raster,
                         casdet::derive_seed(config.master_seed, "plan"), config.threads);
  for (std::size_t i = base; i < augmented.entries.size(); ++i)
    manifest.entries.push_back(augmented.entries[i]);
  casdet::save_manifest(manifest, manifest_path);
  std::cout << "added " << (augmented.entries.size() - base) << " augmented samples\n";
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  const casdet::ExperimentConfig config = load_config(opts);
  const casdet::Manifest manifest = casdet::load_manifest(config.out_dir / "manifest.json");
  const casdet::RasterParams raster = manifest_raster(manifest, config.raster);

  const std::vector<casdet::ManifestEntry> train_entries =
      casdet::filter_split(manifest, "train").entries;
  casdet::PatchDataset patches = casdet::build_patch_dataset(
      config.out_dir, train_entries, raster, config.roi, config.iou_threshold, config.threads);
  patches = casdet::balance_dataset(patches, casdet::derive_seed(config.master_seed, "balance"));

  casdet::CnnModel model =
      casdet::init_model(config.shape, casdet::derive_seed(config.master_seed, "init"));
  casdet::TrainConfig train_config = config.train;
  train_config.seed = casdet::derive_seed(config.master_seed, "train");
  const std::vector<double> losses =
      casdet::train(model, patches.inputs, patches.labels, train_config);

  const fs::path model_path = config.out_dir / "model.cnn";
  casdet::save_model(model, model_path);
  json summary{{"model", model_path.string()},
               {"train_patches", patches.size()},
               {"loss_history", losses}};
  std::ofstream(config.out_dir / "train.json") << summary.dump(1, '\t') << "\n";
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& split, const std::string& model_path,
             const std::string& external_dir) {
  casdet::ExperimentConfig config = load_config(opts);
  if (!external_dir.empty()) config.external_dir = external_dir;
  const casdet::Manifest manifest = casdet::load_manifest(config.out_dir / "manifest.json");
  const casdet::RasterParams raster = manifest_raster(manifest, config.raster);
  const fs::path model_file =
      model_path.empty() ? config.out_dir / "model.cnn" : fs::path(model_path);
  const casdet::CnnModel model = casdet::load_model(model_file);

  json out = json::object();
  std::string tag = split;
  if (!config.external_dir.empty()) {
    // label layout: <dir>/casualty/*.pcd and <dir>/non-casualty/*.pcd
    const std::vector<casdet::ManifestEntry> entries =
        casdet::detail::external_entries(config.external_dir);
    if (entries.empty())
      throw casdet::InvalidParams("no PCD files under: " + config.external_dir.string());
    const casdet::DomainEval eval = casdet::evaluate_model(
        model, config.out_dir, entries, raster, config.roi, config.iou_threshold,
        config.threads);
    tag = "external";
    out[tag] = metrics_json(eval);
  } else {
    const std::vector<casdet::ManifestEntry> entries =
        casdet::filter_split(manifest, split).entries;
    if (entries.empty()) throw casdet::InvalidParams("no manifest entries in split: " + split);
    const casdet::DomainEval eval = casdet::evaluate_model(
        model, config.out_dir, entries, raster, config.roi, config.iou_threshold,
        config.threads);
    out[tag] = metrics_json(eval);
  }
  std::ofstream(config.out_dir / ("eval-" + tag + ".json")) << out.dump(1, '\t') << "\n";
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::vector<std::string>& strategy_names,
              std::vector<long long> counts) {
  const casdet::ExperimentConfig config = load_config(opts);
  std::vector<casdet::AugStrategy> strategies;
  if (strategy_names.empty()) {
    strategies.assign(casdet::kAllStrategies.begin(), casdet::kAllStrategies.end());
  } else {
    for (const std::string& name : strategy_names)
      strategies.push_back(casdet::aug_strategy_from_string(name));
  }
  if (counts.empty())
    for (long long c = 1000; c <= 10000; c += 1000) counts.push_back(c);

  const casdet::SweepResult result = casdet::run_sweep(config, strategies, counts);
  std::cout << casdet::sweep_csv(result.rows) << "-> " << result.csv_path.string() << "\n";
  return 0;
}

int cmd_bo(const CommonOpts& opts, const std::vector<std::string>& dim_names, long long budget,
           long long step, int iters) {
  const casdet::ExperimentConfig config = load_config(opts);
  casdet::SearchSpace space;
  if (!dim_names.empty()) {
    space.dims.clear();
    for (const std::string& name : dim_names)
      space.dims.push_back(casdet::aug_strategy_from_string(name));
  }
  space.budget = budget;
  space.step = step;

  const casdet::BoRunResult result = casdet::run_bo(config, space, iters);
  json best{{"best_value", result.bo.best_value}, {"best_plan", json::object()}};
  for (std::size_t d = 0; d < space.dims.size(); ++d)
    best["best_plan"][std::string(casdet::to_string(space.dims[d]))] =
        result.bo.best_point[d];
  std::cout << best.dump(2) << "\n-> " << result.csv_path.string() << "\n";
  return 0;
}

int cmd_infer(const CommonOpts& opts, const std::string& model_path, const std::string& pcd_path,
              const std::string& map_out) {
  const casdet::ExperimentConfig config = load_config(opts);
  const casdet::CnnModel model = casdet::load_model(model_path);
  const casdet::PointCloud cloud = casdet::load_pcd(pcd_path);
  const casdet::InferenceResult result = casdet::infer_cloud(
      model, cloud, config.raster, config.roi, casdet::derive_seed(config.master_seed, "infer"));

  json rois = json::array();
  for (const casdet::InferenceRoi& roi : result.rois) {
    json jb;
    casdet::to_json(jb, roi.bbox);
    rois.push_back({{"bbox", jb},
                    {"area", roi.area},
                    {"label", roi.label == 1 ? "casualty" : "non-casualty"},
                    {"prob_casualty", roi.prob_casualty}});
  }
  json out{{"cloud", pcd_path}, {"rois", rois}};
  if (!map_out.empty()) {
    casdet::save_pgm(map_out, result.map);
    out["heightmap"] = map_out;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"casualty detection from ground-projected point clouds"};
  app.require_subcommand(1);

  CommonOpts synth_opts, augment_opts, train_opts, eval_opts, sweep_opts, bo_opts, infer_opts;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, synth_opts);

  CLI::App* augment = app.add_subcommand("augment", "apply an augmentation plan to a dataset");
  add_common(augment, augment_opts);
  std::vector<std::string> plan_args;
  augment->add_option("counts", plan_args, "per-strategy counts, e.g. sensor=2000");

  CLI::App* train = app.add_subcommand("train", "train the classifier on a dataset");
  add_common(train, train_opts);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a trained model");
  add_common(eval, eval_opts);
  std::string eval_split = "test", eval_model, eval_external;
  eval->add_option("--split", eval_split, "manifest split to evaluate (default test)");
  eval->add_option("--model", eval_model, "model file (default <out>/model.cnn)");
  eval->add_option("--external-pcd-dir", eval_external,
                   "directory of real PCDs (casualty/ and non-casualty/ subdirs)");

  CLI::App* sweep = app.add_subcommand("sweep", "per-strategy sample-count ablation");
  add_common(sweep, sweep_opts);
  std::vector<std::string> sweep_strategies;
  std::vector<long long> sweep_counts;
  sweep->add_option("--strategies", sweep_strategies, "strategies to sweep (default: all)")
      ->delimiter(',');
  sweep->add_option("--counts", sweep_counts, "augmented sample counts (default: 1000..10000)")
      ->delimiter(',');

  CLI::App* bo = app.add_subcommand("bo", "optimize the augmentation mix");
  add_common(bo, bo_opts);
  std::vector<std::string> bo_dims;
  long long bo_budget = 10000, bo_step = 1000;
  int bo_iters = 25;
  bo->add_option("--dims", bo_dims, "search dimensions (default: sensor,downsample,segment)")
      ->delimiter(',');
  bo->add_option("--budget", bo_budget, "total augmented samples (default 10000)");
  bo->add_option("--step", bo_step, "count granularity (default 1000)");
  bo->add_option("--iters", bo_iters, "optimization iterations (default 25)");

  CLI::App* infer = app.add_subcommand("infer", "classify regions of a single PCD");
  add_common(infer, infer_opts);
  std::string infer_model, infer_pcd, infer_map;
  infer->add_option("--model", infer_model, "model file")->required();
  infer->add_option("--pcd", infer_pcd, "input point cloud")->required();
  infer->add_option("--map-out", infer_map, "write the heightmap as PGM");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_opts);
    if (augment->parsed()) return cmd_augment(augment_opts, plan_args);
    if (train->parsed()) return cmd_train(train_opts);
    if (eval->parsed()) return cmd_eval(eval_opts, eval_split, eval_model, eval_external);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, sweep_strategies, sweep_counts);
    if (bo->parsed()) return cmd_bo(bo_opts, bo_dims, bo_budget, bo_step, bo_iters);
    if (infer->parsed()) return cmd_infer(infer_opts, infer_model, infer_pcd, infer_map);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
