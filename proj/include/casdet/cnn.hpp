#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "casdet/errors.hpp"
#include "casdet/heightmap.hpp"
#include "casdet/rng.hpp"
#include "casdet/roi.hpp"

namespace casdet {

inline constexpr int kCnnClasses = 2;  // casualty = 1, non-casualty = 0

// conv(k1) -> relu -> 2x2 maxpool -> conv(k2) -> relu -> pool -> fc -> fc ->
// softmax, valid convolutions on a 28x28 single-channel input. Channel and
// unit counts are free; spatial sizes follow from the kernels.
struct CnnShape {
  int conv1_channels = 8;
  int conv2_channels = 16;
  int fc_units = 128;
  int k1 = 5;
  int k2 = 5;

  int input() const { return kRoiPatchSize; }
  int conv1_out() const { return input() - k1 + 1; }
  int pool1_out() const { return conv1_out() / 2; }
  int conv2_out() const { return pool1_out() - k2 + 1; }
  int pool2_out() const { return conv2_out() / 2; }
  int flat() const { return conv2_channels * pool2_out() * pool2_out(); }
};

inline void validate(const CnnShape& s) {
  if (s.conv1_channels < 1 || s.conv2_channels < 1 || s.fc_units < 1)
    throw InvalidParams("network widths must be >= 1");
  if (s.k1 < 1 || s.k2 < 1) throw InvalidParams("kernel sizes must be >= 1");
  if (s.conv1_out() < 2 || s.conv1_out() % 2 != 0)
    throw InvalidParams("first convolution output must be even and >= 2");
  if (s.conv2_out() < 2 || s.conv2_out() % 2 != 0)
    throw InvalidParams("second convolution output must be even and >= 2");
}

struct CnnModel {
  CnnShape shape;
  std::vector<double> conv1_w, conv1_b;  // [c1][k1][k1], [c1]
  std::vector<double> conv2_w, conv2_b;  // [c2][c1][k2][k2], [c2]
  std::vector<double> fc1_w, fc1_b;      // [fc][flat], [fc]
  std::vector<double> fc2_w, fc2_b;      // [classes][fc], [classes]

  std::array<std::vector<double>*, 8> tensors() {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b};
  }
  std::array<const std::vector<double>*, 8> tensors() const {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b};
  }
  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto* t : tensors()) n += t->size();
    return n;
  }
};

// Weights ~ U(-sqrt(3/fan_in), +sqrt(3/fan_in)) per tensor, biases zero.
inline CnnModel init_model(const CnnShape& shape, std::uint64_t seed) {
  validate(shape);
  CnnModel m;
  m.shape = shape;
  const int c1 = shape.conv1_channels, c2 = shape.conv2_channels, fc = shape.fc_units;
  m.conv1_w.resize(static_cast<std::size_t>(c1) * shape.k1 * shape.k1);
  m.conv1_b.assign(c1, 0.0);
  m.conv2_w.resize(static_cast<std::size_t>(c2) * c1 * shape.k2 * shape.k2);
  m.conv2_b.assign(c2, 0.0);
  m.fc1_w.resize(static_cast<std::size_t>(fc) * shape.flat());
  m.fc1_b.assign(fc, 0.0);
  m.fc2_w.resize(static_cast<std::size_t>(kCnnClasses) * fc);
  m.fc2_b.assign(kCnnClasses, 0.0);

  auto rng = make_rng(derive_seed(seed, "cnn-init"));
  auto fill = [&rng](std::vector<double>& w, int fan_in) {
    std::uniform_real_distribution<double> d(-std::sqrt(3.0 / fan_in),
                                             std::sqrt(3.0 / fan_in));
    for (double& x : w) x = d(rng);
  };
  fill(m.conv1_w, shape.k1 * shape.k1);
  fill(m.conv2_w, c1 * shape.k2 * shape.k2);
  fill(m.fc1_w, shape.flat());
  fill(m.fc2_w, fc);
  return m;
}

// Mirrors the model's parameter tensors.
struct CnnGrad {
  std::vector<double> conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b;

  explicit CnnGrad(const CnnModel& m) {
    const auto src = m.tensors();
    auto dst = tensors();
    for (int i = 0; i < 8; ++i) dst[i]->assign(src[i]->size(), 0.0);
  }
  std::array<std::vector<double>*, 8> tensors() {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b};
  }
  void zero() {
    for (auto* t : tensors()) std::fill(t->begin(), t->end(), 0.0);
  }
  void scale(double s) {
    for (auto* t : tensors())
      for (double& x : *t) x *= s;
  }
};

// Everything backward needs; reusable across samples.
struct Activations {
  std::vector<double> input;      // 28*28
  std::vector<double> conv1_pre;  // c1 * a1 * a1
  std::vector<double> pool1;      // c1 * p1 * p1 (post-relu, pooled)
  std::vector<int> pool1_arg;     // flat index into conv1_pre
  std::vector<double> conv2_pre;  // c2 * a2 * a2
  std::vector<double> pool2;      // c2 * p2 * p2
  std::vector<int> pool2_arg;
  std::vector<double> fc1_pre, fc1_post;   // fc
  std::array<double, kCnnClasses> logits{};
  std::array<double, kCnnClasses> probs{};
};

namespace detail {

inline std::array<double, kCnnClasses> softmax(const std::array<double, kCnnClasses>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  std::array<double, kCnnClasses> p{};
  double sum = 0.0;
  for (int i = 0; i < kCnnClasses; ++i) {
    p[i] = std::exp(z[i] - zmax);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

// 2x2 stride-2 max pool of relu(pre); ties keep the first cell in window scan
// order, so the backward pass routes each gradient to exactly one source.
inline void relu_pool(const std::vector<double>& pre, int channels, int side,
                      std::vector<double>& out, std::vector<int>& arg) {
  const int half = side / 2;
  out.resize(static_cast<std::size_t>(channels) * half * half);
  arg.resize(out.size());
  for (int ch = 0; ch < channels; ++ch) {
    const int base = ch * side * side;
    for (int r = 0; r < half; ++r) {
      for (int c = 0; c < half; ++c) {
        double best = -1.0;
        int best_idx = -1;
        for (int dr = 0; dr < 2; ++dr) {
          for (int dc = 0; dc < 2; ++dc) {
            const int idx = base + (2 * r + dr) * side + (2 * c + dc);
            const double v = std::max(0.0, pre[idx]);
            if (v > best) {
              best = v;
              best_idx = idx;
            }
          }
        }
        const int o = (ch * half + r) * half + c;
        out[o] = best;
        arg[o] = best_idx;
      }
    }
  }
}

}  // namespace detail

// input: 28x28 grey values scaled to [0,1], row-major.
inline std::array<double, kCnnClasses> forward(const CnnModel& m,
                                               const std::vector<double>& input,
                                               Activations& acts) {
  const CnnShape& s = m.shape;
  const int in = s.input(), a1 = s.conv1_out(), p1 = s.pool1_out();
  const int a2 = s.conv2_out();
  const int c1 = s.conv1_channels, c2 = s.conv2_channels, fc = s.fc_units;
  if (static_cast<int>(input.size()) != in * in)
    throw ShapeError("classifier input must be a flat 28x28 patch");

  acts.input = input;
  acts.conv1_pre.assign(static_cast<std::size_t>(c1) * a1 * a1, 0.0);
  for (int f = 0; f < c1; ++f) {
    const double* w = &m.conv1_w[static_cast<std::size_t>(f) * s.k1 * s.k1];
    for (int r = 0; r < a1; ++r) {
      for (int c = 0; c < a1; ++c) {
        double acc = m.conv1_b[f];
        for (int i = 0; i < s.k1; ++i) {
          const double* row = &input[(r + i) * in + c];
          const double* wrow = &w[i * s.k1];
          for (int j = 0; j < s.k1; ++j) acc += wrow[j] * row[j];
        }
        acts.conv1_pre[(f * a1 + r) * a1 + c] = acc;
      }
    }
  }
  detail::relu_pool(acts.conv1_pre, c1, a1, acts.pool1, acts.pool1_arg);

  acts.conv2_pre.assign(static_cast<std::size_t>(c2) * a2 * a2, 0.0);
  for (int g = 0; g < c2; ++g) {
    for (int r = 0; r < a2; ++r) {
      for (int c = 0; c < a2; ++c) {
        double acc = m.conv2_b[g];
        for (int f = 0; f < c1; ++f) {
          const double* w = &m.conv2_w[(static_cast<std::size_t>(g) * c1 + f) * s.k2 * s.k2];
          const double* plane = &acts.pool1[static_cast<std::size_t>(f) * p1 * p1];
          for (int i = 0; i < s.k2; ++i) {
            const double* row = &plane[(r + i) * p1 + c];
            const double* wrow = &w[i * s.k2];
            for (int j = 0; j < s.k2; ++j) acc += wrow[j] * row[j];
          }
        }
        acts.conv2_pre[(g * a2 + r) * a2 + c] = acc;
      }
    }
  }
  detail::relu_pool(acts.conv2_pre, c2, a2, acts.pool2, acts.pool2_arg);

  acts.fc1_pre.assign(fc, 0.0);
  acts.fc1_post.assign(fc, 0.0);
  const int flat = s.flat();
  for (int k = 0; k < fc; ++k) {
    double acc = m.fc1_b[k];
    const double* w = &m.fc1_w[static_cast<std::size_t>(k) * flat];
    for (int j = 0; j < flat; ++j) acc += w[j] * acts.pool2[j];
    acts.fc1_pre[k] = acc;
    acts.fc1_post[k] = std::max(0.0, acc);
  }
  for (int o = 0; o < kCnnClasses; ++o) {
    double acc = m.fc2_b[o];
    const double* w = &m.fc2_w[static_cast<std::size_t>(o) * fc];
    for (int k = 0; k < fc; ++k) acc += w[k] * acts.fc1_post[k];
    acts.logits[o] = acc;
  }
  acts.probs = detail::softmax(acts.logits);
  return acts.probs;
}

inline std::array<double, kCnnClasses> forward(const CnnModel& m,
                                               const std::vector<double>& input) {
  Activations acts;
  return forward(m, input, acts);
}

inline std::vector<double> patch_to_input(const GreyImage& patch) {
  if (patch.width != kRoiPatchSize || patch.height != kRoiPatchSize)
    throw ShapeError("classifier patches must be 28x28");
  std::vector<double> input(patch.pixels.size());
  for (std::size_t i = 0; i < patch.pixels.size(); ++i)
    input[i] = patch.pixels[i] / 255.0;
  return input;
}

inline double cross_entropy(const std::array<double, kCnnClasses>& probs, int label) {
  return -std::log(std::max(probs[label], 1e-300));
}

// Accumulates d(cross-entropy)/d(params) for one sample into `grad`.
inline void backward(const CnnModel& m, const Activations& acts, int label, CnnGrad& grad) {
  const CnnShape& s = m.shape;
  const int in = s.input(), a1 = s.conv1_out(), p1 = s.pool1_out();
  const int a2 = s.conv2_out();
  const int c1 = s.conv1_channels, c2 = s.conv2_channels, fc = s.fc_units;
  const int flat = s.flat();

  std::array<double, kCnnClasses> dlogits = acts.probs;
  dlogits[label] -= 1.0;

  std::vector<double> dfc1(fc, 0.0);
  for (int o = 0; o < kCnnClasses; ++o) {
    grad.fc2_b[o] += dlogits[o];
    double* gw = &grad.fc2_w[static_cast<std::size_t>(o) * fc];
    const double* w = &m.fc2_w[static_cast<std::size_t>(o) * fc];
    for (int k = 0; k < fc; ++k) {
      gw[k] += dlogits[o] * acts.fc1_post[k];
      dfc1[k] += dlogits[o] * w[k];
    }
  }
  for (int k = 0; k < fc; ++k)
    if (acts.fc1_pre[k] <= 0.0) dfc1[k] = 0.0;

  std::vector<double> dpool2(flat, 0.0);
  for (int k = 0; k < fc; ++k) {
    const double d = dfc1[k];
    if (d == 0.0) continue;
    grad.fc1_b[k] += d;
    double* gw = &grad.fc1_w[static_cast<std::size_t>(k) * flat];
    const double* w = &m.fc1_w[static_cast<std::size_t>(k) * flat];
    for (int j = 0; j < flat; ++j) {
      gw[j] += d * acts.pool2[j];
      dpool2[j] += d * w[j];
    }
  }

  // pool2 + relu backward into conv2_pre
  std::vector<double> dconv2(static_cast<std::size_t>(c2) * a2 * a2, 0.0);
  for (int o = 0; o < flat; ++o) {
    const int src = acts.pool2_arg[o];
    if (acts.conv2_pre[src] > 0.0) dconv2[src] += dpool2[o];
  }

  std::vector<double> dpool1(static_cast<std::size_t>(c1) * p1 * p1, 0.0);
  for (int g = 0; g < c2; ++g) {
    for (int r = 0; r < a2; ++r) {
      for (int c = 0; c < a2; ++c) {
        const double d = dconv2[(g * a2 + r) * a2 + c];
        if (d == 0.0) continue;
        grad.conv2_b[g] += d;
        for (int f = 0; f < c1; ++f) {
          const std::size_t wbase = (static_cast<std::size_t>(g) * c1 + f) * s.k2 * s.k2;
          const std::size_t pbase = static_cast<std::size_t>(f) * p1 * p1;
          for (int i = 0; i < s.k2; ++i) {
            for (int j = 0; j < s.k2; ++j) {
              const std::size_t pidx = pbase + (r + i) * p1 + (c + j);
              grad.conv2_w[wbase + i * s.k2 + j] += d * acts.pool1[pidx];
              dpool1[pidx] += d * m.conv2_w[wbase + i * s.k2 + j];
            }
          }
        }
      }
    }
  }

  std::vector<double> dconv1(static_cast<std::size_t>(c1) * a1 * a1, 0.0);
  for (std::size_t o = 0; o < dpool1.size(); ++o) {
    const int src = acts.pool1_arg[o];
    if (acts.conv1_pre[src] > 0.0) dconv1[src] += dpool1[o];
  }

  for (int f = 0; f < c1; ++f) {
    for (int r = 0; r < a1; ++r) {
      for (int c = 0; c < a1; ++c) {
        const double d = dconv1[(f * a1 + r) * a1 + c];
        if (d == 0.0) continue;
        grad.conv1_b[f] += d;
        const std::size_t wbase = static_cast<std::size_t>(f) * s.k1 * s.k1;
        for (int i = 0; i < s.k1; ++i)
          for (int j = 0; j < s.k1; ++j)
            grad.conv1_w[wbase + i * s.k1 + j] += d * acts.input[(r + i) * in + (c + j)];
      }
    }
  }
}

// Mean loss over the batch; gradients of the mean accumulate into `grad`
// (caller zeroes it).
inline double batch_loss_grad(const CnnModel& m, const std::vector<std::vector<double>>& inputs,
                              const std::vector<int>& labels, std::size_t begin,
                              std::size_t end, const std::vector<std::size_t>& order,
                              CnnGrad& grad, Activations& scratch) {
  double loss_sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const std::size_t idx = order[i];
    forward(m, inputs[idx], scratch);
    loss_sum += cross_entropy(scratch.probs, labels[idx]);
    backward(m, scratch, labels[idx], grad);
  }
  const double inv = 1.0 / static_cast<double>(end - begin);
  grad.scale(inv);
  return loss_sum * inv;
}

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 20;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate >= 0.0)) throw InvalidParams("learning rate must be >= 0");
  if (c.batch_size < 1) throw InvalidParams("batch size must be >= 1");
  if (c.epochs < 0) throw InvalidParams("epoch count must be >= 0");
}

// Mini-batch SGD with momentum; per-epoch shuffles are seeded, so training is
// a pure function of (model, data, config). Returns per-epoch mean loss.
inline std::vector<double> train(CnnModel& model, const std::vector<std::vector<double>>& inputs,
                                 const std::vector<int>& labels, const TrainConfig& config) {
  validate(config);
  if (inputs.size() != labels.size())
    throw LengthMismatch("training inputs and labels differ in length");
  if (inputs.empty()) throw DegenerateDataset("training set is empty");
  bool seen[kCnnClasses] = {};
  for (int label : labels) {
    if (label < 0 || label >= kCnnClasses) throw InvalidParams("label out of range");
    seen[label] = true;
  }
  for (int cl = 0; cl < kCnnClasses; ++cl)
    if (!seen[cl]) throw DegenerateDataset("training set is missing a class");

  CnnGrad grad(model);
  CnnGrad velocity(model);
  Activations scratch;
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> history;
  history.reserve(config.epochs);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto rng = make_rng(derive_seed(config.seed, "epoch-shuffle", epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      grad.zero();
      const double batch_loss = batch_loss_grad(model, inputs, labels, start, stop, order,
                                                grad, scratch);
      loss_sum += batch_loss * static_cast<double>(stop - start);
      auto vt = velocity.tensors();
      auto gt = grad.tensors();
      auto mt = model.tensors();
      for (int t = 0; t < 8; ++t) {
        std::vector<double>& v = *vt[t];
        const std::vector<double>& g = *gt[t];
        std::vector<double>& w = *mt[t];
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = config.momentum * v[i] - config.learning_rate * g[i];
          w[i] += v[i];
        }
      }
    }
    history.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return history;
}

inline int predict_label(const CnnModel& model, const std::vector<double>& input) {
  const auto probs = forward(model, input);
  return probs[1] > probs[0] ? 1 : 0;
}

// Max relative error between analytic and central finite-difference gradients
// over every parameter, on the mean loss of the given batch. The denominator
// is floored at 1e-6 so dead-relu zeros compare absolutely.
inline double gradient_check(const CnnModel& model,
                             const std::vector<std::vector<double>>& inputs,
                             const std::vector<int>& labels, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidParams("epsilon must be > 0");
  if (inputs.size() != labels.size() || inputs.empty())
    throw LengthMismatch("gradient check needs equal-length, non-empty inputs and labels");

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CnnModel probe = model;
  Activations scratch;

  CnnGrad analytic(probe);
  batch_loss_grad(probe, inputs, labels, 0, inputs.size(), order, analytic, scratch);

  auto mean_loss = [&]() {
    double sum = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      forward(probe, inputs[i], scratch);
      sum += cross_entropy(scratch.probs, labels[i]);
    }
    return sum / static_cast<double>(inputs.size());
  };

  double max_rel = 0.0;
  auto mt = probe.tensors();
  auto at = analytic.tensors();
  for (int t = 0; t < 8; ++t) {
    std::vector<double>& w = *mt[t];
    const std::vector<double>& g = *at[t];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + epsilon;
      const double up = mean_loss();
      w[i] = saved - epsilon;
      const double down = mean_loss();
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double denom = std::max({1e-6, std::abs(numeric), std::abs(g[i])});
      max_rel = std::max(max_rel, std::abs(numeric - g[i]) / denom);
    }
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Metrics {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

// Label 1 (casualty) is the positive class. F1 is 0 when undefined.
inline Metrics compute_metrics(const std::vector<int>& predictions,
                               const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw LengthMismatch("predictions and labels differ in length");
  Metrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == 1, truth = labels[i] == 1;
    if (pred && truth) ++m.tp;
    else if (pred && !truth) ++m.fp;
    else if (!pred && truth) ++m.fn;
    else ++m.tn;
  }
  const long long total = m.tp + m.fp + m.fn + m.tn;
  m.accuracy = total > 0 ? static_cast<double>(m.tp + m.tn) / total : 0.0;
  const double denom = 2.0 * m.tp + m.fp + m.fn;
  m.f1 = denom > 0.0 ? 2.0 * m.tp / denom : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Model file I/O: "CNNM" magic, JSON header, little-endian float32 blob with
// tensors in declared order.
// ---------------------------------------------------------------------------

inline void save_model(const CnnModel& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format_version"] = 1;
  header["shape"] = {{"conv1_channels", model.shape.conv1_channels},
                     {"conv2_channels", model.shape.conv2_channels},
                     {"fc_units", model.shape.fc_units},
                     {"k1", model.shape.k1},
                     {"k2", model.shape.k2}};
  header["tensor_order"] = {"conv1_w", "conv1_b", "conv2_w", "conv2_b",
                            "fc1_w",   "fc1_b",   "fc2_w",   "fc2_b"};
  header["dtype"] = "float32-le";
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open model file for writing: " + path.string());
  out.write("CNNM", 4);
  const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto* tensor : model.tensors()) {
    for (double v : *tensor) {
      const float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
  if (!out) throw Error("failed writing model file: " + path.string());
}

inline CnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "CNNM", 4) != 0)
    throw ParseError("not a model file (bad magic): " + path.string());
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen > (1u << 20)) throw ParseError("corrupt model header length");
  std::string htext(hlen, '\0');
  in.read(htext.data(), hlen);
  if (!in) throw ParseError("truncated model header");

  nlohmann::json header = nlohmann::json::parse(htext, nullptr, false);
  if (header.is_discarded()) throw ParseError("model header is not valid JSON");
  if (header.value("format_version", 0) != 1)
    throw ParseError("unsupported model format version");

  CnnShape shape;
  const auto& js = header.at("shape");
  shape.conv1_channels = js.at("conv1_channels").get<int>();
  shape.conv2_channels = js.at("conv2_channels").get<int>();
  shape.fc_units = js.at("fc_units").get<int>();
  shape.k1 = js.at("k1").get<int>();
  shape.k2 = js.at("k2").get<int>();

  CnnModel model = init_model(shape, 0);
  for (auto* tensor : model.tensors()) {
    for (double& v : *tensor) {
      float f = 0.0f;
      in.read(reinterpret_cast<char*>(&f), sizeof(f));
      if (!in) throw ParseError("truncated model parameter blob");
      v = f;
    }
  }
  char extra;
  if (in.read(&extra, 1)) throw ParseError("trailing bytes after model parameters");
  return model;
}

}  // namespace casdet
