#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "casdet/augment.hpp"
#include "casdet/errors.hpp"
#include "casdet/gp.hpp"
#include "casdet/rng.hpp"

namespace casdet {

// Grid of augmentation plans: per-dimension counts in multiples of `step`,
// summing to `budget`.
struct SearchSpace {
  std::vector<AugStrategy> dims{AugStrategy::sensor, AugStrategy::downsample,
                                AugStrategy::segment};
  long long budget = 10000;
  long long step = 1000;
};

inline void validate(const SearchSpace& space) {
  if (space.dims.empty()) throw InvalidParams("search space needs at least one dimension");
  if (space.step < 1) throw InvalidParams("search step must be >= 1");
  if (space.budget < 0) throw InvalidParams("search budget must be >= 0");
  if (space.budget % space.step != 0)
    throw InvalidParams("search budget must be divisible by the step");
  for (std::size_t i = 0; i < space.dims.size(); ++i)
    for (std::size_t j = i + 1; j < space.dims.size(); ++j)
      if (space.dims[i] == space.dims[j])
        throw InvalidParams("search dimensions must be distinct strategies");
}

// All feasible count vectors in lexicographic order.
inline std::vector<std::vector<long long>> enumerate_feasible(const SearchSpace& space) {
  validate(space);
  std::vector<std::vector<long long>> points;
  std::vector<long long> current(space.dims.size(), 0);
  const auto recurse = [&](auto&& self, std::size_t dim, long long remaining) -> void {
    if (dim + 1 == current.size()) {
      current[dim] = remaining;
      points.push_back(current);
      return;
    }
    for (long long c = 0; c <= remaining; c += space.step) {
      current[dim] = c;
      self(self, dim + 1, remaining - c);
    }
  };
  recurse(recurse, 0, space.budget);
  return points;
}

inline AugPlan plan_from_point(const SearchSpace& space, const std::vector<long long>& point) {
  if (point.size() != space.dims.size())
    throw ShapeError("plan point dimension does not match the search space");
  AugPlan plan;
  plan.budget = space.budget;
  for (std::size_t d = 0; d < point.size(); ++d) plan.count(space.dims[d]) = point[d];
  return plan;
}

struct BoObservation {
  std::vector<long long> point;
  double value = 0.0;
};

struct BoResult {
  std::vector<long long> best_point;
  double best_value = 0.0;
  std::vector<BoObservation> history;  // initial design first, then one per iteration
};

namespace detail {

// GP inputs are measured in grid steps, so the pinned length scale (3.0 in
// thousands-units at the reference step of 1000) carries over to other scales.
inline Eigen::VectorXd to_gp_coords(const std::vector<long long>& point, long long step) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(point.size()));
  for (std::size_t d = 0; d < point.size(); ++d)
    x[static_cast<Eigen::Index>(d)] = static_cast<double>(point[d]) / static_cast<double>(step);
  return x;
}

inline std::string format_point(const std::vector<long long>& point) {
  std::string s = "(";
  for (std::size_t i = 0; i < point.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(point[i]);
  }
  return s + ")";
}

}  // namespace detail

// GP Bayesian optimization over the feasible grid: 5 uniformly sampled initial
// plans, then `iters` rounds of fit -> exhaustive EI argmax (ties to the
// lexicographically lowest point) -> evaluate -> update.
inline BoResult optimize_mix(const std::function<double(const AugPlan&)>& objective,
                             const SearchSpace& space, int iters, std::uint64_t seed) {
  if (iters < 1) throw InvalidParams("optimizer iteration count must be >= 1");
  const std::vector<std::vector<long long>> feasible = enumerate_feasible(space);

  auto evaluate = [&](const std::vector<long long>& point) {
    try {
      return objective(plan_from_point(space, point));
    } catch (const std::exception& e) {
      throw Error("objective failed at plan " + detail::format_point(point) + ": " + e.what());
    }
  };

  BoResult result;
  auto observe = [&](const std::vector<long long>& point) {
    const double value = evaluate(point);
    result.history.push_back({point, value});
    if (result.best_point.empty() || value > result.best_value ||
        (value == result.best_value && point < result.best_point)) {
      result.best_point = point;
      result.best_value = value;
    }
  };

  // Initial design: min(5, grid size) distinct plans, uniform without replacement.
  auto rng = make_rng(derive_seed(seed, "bo-init"));
  std::vector<std::size_t> order(feasible.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t init_n = std::min<std::size_t>(5, feasible.size());
  for (std::size_t i = 0; i < init_n; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, order.size() - 1);
    std::swap(order[i], order[d(rng)]);
    observe(feasible[order[i]]);
  }

  for (int iter = 0; iter < iters; ++iter) {
    GpState state;
    state.kernel.length_scales =
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(space.dims.size()), 3.0);
    state.kernel.noise_var = 1e-4;
    double mean = 0.0;
    for (const auto& obs : result.history) mean += obs.value;
    mean /= static_cast<double>(result.history.size());
    double var = 0.0;
    for (const auto& obs : result.history) var += (obs.value - mean) * (obs.value - mean);
    var /= static_cast<double>(result.history.size());
    state.kernel.signal_var = std::max(var, 1e-12);  // all-equal observations degenerate
    state.prior_mean = mean;
    for (const auto& obs : result.history) {
      state.x.push_back(detail::to_gp_coords(obs.point, space.step));
      state.y.push_back(obs.value);
    }

    const std::vector<long long>* best_candidate = nullptr;
    double best_ei = -1.0;
    for (const auto& point : feasible) {
      const double ei = expected_improvement(state, detail::to_gp_coords(point, space.step),
                                             result.best_value);
      if (ei > best_ei || (ei == best_ei && best_candidate && point < *best_candidate)) {
        best_ei = ei;
        best_candidate = &point;
      }
    }
    observe(*best_candidate);
  }
  return result;
}

}  // namespace casdet
