#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "casdet/augment.hpp"
#include "casdet/bayesopt.hpp"
#include "casdet/cnn.hpp"
#include "casdet/heightmap.hpp"
#include "casdet/roi.hpp"
#include "casdet/synth.hpp"

// JSON conversions for config and manifest types (nlohmann ADL pairs).

namespace casdet {

inline void to_json(nlohmann::json& j, const ParamRange& r) {
  j = nlohmann::json{{"lo", r.lo}, {"hi", r.hi}};
}
inline void from_json(const nlohmann::json& j, ParamRange& r) {
  j.at("lo").get_to(r.lo);
  j.at("hi").get_to(r.hi);
}

inline void to_json(nlohmann::json& j, const CameraModel& c) {
  std::vector<double> pose;
  pose.reserve(16);
  const Eigen::Matrix4d m = c.pose.matrix();
  for (int r = 0; r < 4; ++r)
    for (int col = 0; col < 4; ++col) pose.push_back(m(r, col));
  j = nlohmann::json{{"width", c.width},   {"height", c.height},
                     {"fx", c.fx},         {"fy", c.fy},
                     {"cx", c.cx},         {"cy", c.cy},
                     {"pose", pose},       {"min_depth", c.min_depth},
                     {"max_depth", c.max_depth}};
}
inline void from_json(const nlohmann::json& j, CameraModel& c) {
  j.at("width").get_to(c.width);
  j.at("height").get_to(c.height);
  j.at("fx").get_to(c.fx);
  j.at("fy").get_to(c.fy);
  j.at("cx").get_to(c.cx);
  j.at("cy").get_to(c.cy);
  j.at("min_depth").get_to(c.min_depth);
  j.at("max_depth").get_to(c.max_depth);
  const auto pose = j.at("pose").get<std::vector<double>>();
  if (pose.size() != 16) throw ParseError("camera pose must have 16 entries");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int col = 0; col < 4; ++col) m(r, col) = pose[static_cast<std::size_t>(r) * 4 + col];
  c.pose = Eigen::Isometry3d(m);
}

inline void to_json(nlohmann::json& j, const SampleSpec& s) {
  j = nlohmann::json{{"casualty", s.casualty},
                     {"stature_mm", s.stature_mm},
                     {"bmi", s.bmi},
                     {"shs", s.shs},
                     {"age", s.age},
                     {"orientation_deg", s.orientation_deg},
                     {"body_x", s.body_x},
                     {"body_y", s.body_y},
                     {"min_distractors", s.min_distractors},
                     {"max_distractors", s.max_distractors},
                     {"pos_min_distractors", s.pos_min_distractors},
                     {"pos_max_distractors", s.pos_max_distractors},
                     {"distractor_extent", s.distractor_extent},
                     {"distractor_x", s.distractor_x},
                     {"distractor_y", s.distractor_y},
                     {"body_clearance", s.body_clearance},
                     {"camera", s.camera}};
}
inline void from_json(const nlohmann::json& j, SampleSpec& s) {
  j.at("casualty").get_to(s.casualty);
  j.at("stature_mm").get_to(s.stature_mm);
  j.at("bmi").get_to(s.bmi);
  j.at("shs").get_to(s.shs);
  j.at("age").get_to(s.age);
  j.at("orientation_deg").get_to(s.orientation_deg);
  j.at("body_x").get_to(s.body_x);
  j.at("body_y").get_to(s.body_y);
  j.at("min_distractors").get_to(s.min_distractors);
  j.at("max_distractors").get_to(s.max_distractors);
  j.at("pos_min_distractors").get_to(s.pos_min_distractors);
  j.at("pos_max_distractors").get_to(s.pos_max_distractors);
  j.at("distractor_extent").get_to(s.distractor_extent);
  j.at("distractor_x").get_to(s.distractor_x);
  j.at("distractor_y").get_to(s.distractor_y);
  j.at("body_clearance").get_to(s.body_clearance);
  j.at("camera").get_to(s.camera);
}

inline void to_json(nlohmann::json& j, const RasterParams& p) {
  j = nlohmann::json{{"m", p.m},
                     {"extent", p.extent},
                     {"h_norm", p.h_norm},
                     {"tau", p.tau},
                     {"plane_iters", p.plane_iters}};
}
inline void from_json(const nlohmann::json& j, RasterParams& p) {
  j.at("m").get_to(p.m);
  j.at("extent").get_to(p.extent);
  j.at("h_norm").get_to(p.h_norm);
  j.at("tau").get_to(p.tau);
  j.at("plane_iters").get_to(p.plane_iters);
}

inline void to_json(nlohmann::json& j, const RoiParams& p) {
  j = nlohmann::json{{"fg_threshold", p.fg_threshold},
                     {"min_area", p.min_area},
                     {"margin", p.margin}};
}
inline void from_json(const nlohmann::json& j, RoiParams& p) {
  j.at("fg_threshold").get_to(p.fg_threshold);
  j.at("min_area").get_to(p.min_area);
  j.at("margin").get_to(p.margin);
}

inline void to_json(nlohmann::json& j, const CnnShape& s) {
  j = nlohmann::json{{"conv1_channels", s.conv1_channels},
                     {"conv2_channels", s.conv2_channels},
                     {"fc_units", s.fc_units},
                     {"k1", s.k1},
                     {"k2", s.k2}};
}
inline void from_json(const nlohmann::json& j, CnnShape& s) {
  j.at("conv1_channels").get_to(s.conv1_channels);
  j.at("conv2_channels").get_to(s.conv2_channels);
  j.at("fc_units").get_to(s.fc_units);
  j.at("k1").get_to(s.k1);
  j.at("k2").get_to(s.k2);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"momentum", c.momentum},
                     {"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("momentum").get_to(c.momentum);
  j.at("batch_size").get_to(c.batch_size);
  j.at("epochs").get_to(c.epochs);
  j.at("seed").get_to(c.seed);
}

inline void to_json(nlohmann::json& j, const AugParams& p) {
  j = nlohmann::json{{"gaussian_mu", p.gaussian_mu},
                     {"gaussian_sigma", p.gaussian_sigma},
                     {"snp_ratio", p.snp_ratio},
                     {"snp_amount", p.snp_amount},
                     {"periodic_period", p.periodic_period},
                     {"sensor_sigma", p.sensor_sigma},
                     {"downsample_scale", p.downsample_scale},
                     {"segment_size", p.segment_size}};
}
inline void from_json(const nlohmann::json& j, AugParams& p) {
  j.at("gaussian_mu").get_to(p.gaussian_mu);
  j.at("gaussian_sigma").get_to(p.gaussian_sigma);
  j.at("snp_ratio").get_to(p.snp_ratio);
  j.at("snp_amount").get_to(p.snp_amount);
  j.at("periodic_period").get_to(p.periodic_period);
  j.at("sensor_sigma").get_to(p.sensor_sigma);
  j.at("downsample_scale").get_to(p.downsample_scale);
  j.at("segment_size").get_to(p.segment_size);
}

inline void to_json(nlohmann::json& j, const AugSets& s) {
  j = nlohmann::json{{"gaussian_mu", s.gaussian_mu},
                     {"gaussian_sigma", s.gaussian_sigma},
                     {"snp_ratio", s.snp_ratio},
                     {"snp_amount_lo", s.snp_amount_lo},
                     {"snp_amount_hi", s.snp_amount_hi},
                     {"periodic_period", s.periodic_period},
                     {"sensor_sigma", s.sensor_sigma},
                     {"downsample_scale", s.downsample_scale},
                     {"segment_size", s.segment_size}};
}
inline void from_json(const nlohmann::json& j, AugSets& s) {
  j.at("gaussian_mu").get_to(s.gaussian_mu);
  j.at("gaussian_sigma").get_to(s.gaussian_sigma);
  j.at("snp_ratio").get_to(s.snp_ratio);
  j.at("snp_amount_lo").get_to(s.snp_amount_lo);
  j.at("snp_amount_hi").get_to(s.snp_amount_hi);
  j.at("periodic_period").get_to(s.periodic_period);
  j.at("sensor_sigma").get_to(s.sensor_sigma);
  j.at("downsample_scale").get_to(s.downsample_scale);
  j.at("segment_size").get_to(s.segment_size);
}

inline void to_json(nlohmann::json& j, const AugPlan& p) {
  nlohmann::json counts = nlohmann::json::object();
  for (AugStrategy s : kAllStrategies)
    counts[std::string(to_string(s))] = p.count(s);
  j = nlohmann::json{{"counts", counts}, {"budget", p.budget}};
}
inline void from_json(const nlohmann::json& j, AugPlan& p) {
  p = AugPlan{};
  j.at("budget").get_to(p.budget);
  const auto& counts = j.at("counts");
  for (AugStrategy s : kAllStrategies) {
    const std::string name(to_string(s));
    if (counts.contains(name)) p.count(s) = counts.at(name).get<long long>();
  }
}

inline void to_json(nlohmann::json& j, const SearchSpace& s) {
  std::vector<std::string> dims;
  for (AugStrategy d : s.dims) dims.emplace_back(to_string(d));
  j = nlohmann::json{{"dims", dims}, {"budget", s.budget}, {"step", s.step}};
}
inline void from_json(const nlohmann::json& j, SearchSpace& s) {
  s.dims.clear();
  for (const auto& name : j.at("dims"))
    s.dims.push_back(aug_strategy_from_string(name.get<std::string>()));
  j.at("budget").get_to(s.budget);
  j.at("step").get_to(s.step);
}

inline void to_json(nlohmann::json& j, const BBox& b) {
  j = nlohmann::json{{"row", b.row}, {"col", b.col}, {"height", b.height}, {"width", b.width}};
}
inline void from_json(const nlohmann::json& j, BBox& b) {
  j.at("row").get_to(b.row);
  j.at("col").get_to(b.col);
  j.at("height").get_to(b.height);
  j.at("width").get_to(b.width);
}

inline void to_json(nlohmann::json& j, const Metrics& m) {
  j = nlohmann::json{{"tp", m.tp},           {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn},
                     {"accuracy", m.accuracy}, {"f1", m.f1}};
}
inline void from_json(const nlohmann::json& j, Metrics& m) {
  j.at("tp").get_to(m.tp);
  j.at("fp").get_to(m.fp);
  j.at("fn").get_to(m.fn);
  j.at("tn").get_to(m.tn);
  j.at("accuracy").get_to(m.accuracy);
  j.at("f1").get_to(m.f1);
}

}  // namespace casdet
