#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "casdet/errors.hpp"

namespace casdet {

// Squared-exponential kernel with per-dimension length scales.
struct GpKernel {
  Eigen::VectorXd length_scales;  // one per input dimension, > 0
  double signal_var = 1.0;
  double noise_var = 1e-4;
};

struct GpState {
  std::vector<Eigen::VectorXd> x;
  std::vector<double> y;
  GpKernel kernel;
  double prior_mean = 0.0;
};

struct GpPosterior {
  double mean = 0.0;
  double var = 0.0;
};

namespace detail {

inline void check_kernel(const GpKernel& k) {
  if (k.length_scales.size() == 0) throw InvalidParams("kernel needs length scales");
  for (Eigen::Index d = 0; d < k.length_scales.size(); ++d)
    if (!(k.length_scales[d] > 0.0)) throw InvalidParams("length scales must be > 0");
  if (!(k.signal_var > 0.0)) throw InvalidParams("signal variance must be > 0");
  if (!(k.noise_var >= 0.0)) throw InvalidParams("noise variance must be >= 0");
}

inline double se_kernel(const GpKernel& k, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double q = 0.0;
  for (Eigen::Index d = 0; d < k.length_scales.size(); ++d) {
    const double r = (a[d] - b[d]) / k.length_scales[d];
    q += r * r;
  }
  return k.signal_var * std::exp(-0.5 * q);
}

// Cholesky of K + noise I, with a 1e-8 jitter retry and one x10 escalation.
inline Eigen::LLT<Eigen::MatrixXd> factorize(const GpState& state) {
  const auto n = static_cast<Eigen::Index>(state.x.size());
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      gram(i, j) = gram(j, i) = se_kernel(state.kernel, state.x[i], state.x[j]);
  gram.diagonal().array() += state.kernel.noise_var;

  for (const double jitter : {0.0, 1e-8, 1e-7}) {
    Eigen::MatrixXd k = gram;
    k.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw SingularKernel("Gram matrix is numerically singular after jitter retries");
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace detail

// Exact GP regression posterior of the latent function at x.
inline GpPosterior gp_posterior(const GpState& state, const Eigen::VectorXd& x) {
  detail::check_kernel(state.kernel);
  if (x.size() != state.kernel.length_scales.size())
    throw ShapeError("query dimension does not match kernel length scales");
  if (state.x.empty()) return {state.prior_mean, state.kernel.signal_var};
  if (state.y.size() != state.x.size())
    throw LengthMismatch("observation inputs and values differ in length");

  const auto n = static_cast<Eigen::Index>(state.x.size());
  const Eigen::LLT<Eigen::MatrixXd> llt = detail::factorize(state);

  Eigen::VectorXd centered(n);
  for (Eigen::Index i = 0; i < n; ++i) centered[i] = state.y[i] - state.prior_mean;
  Eigen::VectorXd kstar(n);
  for (Eigen::Index i = 0; i < n; ++i)
    kstar[i] = detail::se_kernel(state.kernel, state.x[i], x);

  const Eigen::VectorXd alpha = llt.solve(centered);
  const Eigen::VectorXd v = llt.solve(kstar);
  GpPosterior post;
  post.mean = state.prior_mean + kstar.dot(alpha);
  post.var = std::max(0.0, state.kernel.signal_var - kstar.dot(v));
  return post;
}

// Expected improvement over `best` for maximization.
inline double expected_improvement(const GpState& state, const Eigen::VectorXd& x,
                                   double best) {
  if (state.x.empty())
    throw InvalidParams("expected improvement needs at least one observation");
  const GpPosterior post = gp_posterior(state, x);
  const double sigma = std::sqrt(post.var);
  const double delta = post.mean - best;
  if (sigma < 1e-12) return std::max(delta, 0.0);
  const double z = delta / sigma;
  return delta * detail::normal_cdf(z) + sigma * detail::normal_pdf(z);
}

}  // namespace casdet
