#pragma once

// Diagonal-Gaussian latent heads, reparameterised sampling and closed-form KL.

#include <cmath>
#include <numbers>
#include <random>
#include <span>

#include "vqag/errors.hpp"
#include "vqag/network.hpp"

namespace vqag {

struct GaussianParams {
  Vector mu;
  Vector logvar;

  Eigen::Index dim() const { return mu.size(); }
  Vector sigma() const { return (0.5 * logvar.array()).exp(); }
};

/// Graph handles for the mean and log-variance of one head.
struct GaussianNodes {
  Var mu;
  Var logvar;

  GaussianParams values(const Graph& g) const {
    return {g.value(mu).col(0), g.value(logvar).col(0)};
  }
};

enum class Head { prior_z, post_z, prior_y, post_y };
enum class LatentKind { z, y };
enum class LatentSource { prior, posterior };

struct LatentSample {
  Vector value;
  GaussianParams params;
  Vector epsilon;
  LatentKind which = LatentKind::z;
  LatentSource source = LatentSource::prior;
};

inline bool is_posterior(Head h) { return h == Head::post_z || h == Head::post_y; }

/// Single linear map to the stacked [mu ; logvar]. Prior heads take h^C;
/// posterior heads take h^C and h^A (z) or h^C and h^Q (y).
inline GaussianNodes gaussian_params(Pass& p, Head head, std::span<const Var> inputs) {
  require(inputs.size() == (is_posterior(head) ? 2u : 1u),
          "gaussian_params: wrong number of inputs for head");
  const Weights& w = p.w();
  const LinearWeights& lw = head == Head::prior_z  ? w.prior_z
                            : head == Head::post_z ? w.post_z
                            : head == Head::prior_y ? w.prior_y
                                                    : w.post_y;
  Graph& g = p.g;
  Var x = inputs.size() == 1 ? inputs[0] : g.concat_rows(inputs);
  Var out = g.add(g.matmul(p.P(lw.W), x), p.P(lw.b));
  const Eigen::Index k = p.cfg().latent;
  const double clip = p.cfg().logvar_clamp;
  return {g.slice_rows(out, 0, k), g.clamp(g.slice_rows(out, k, k), -clip, clip)};
}

inline GaussianNodes gaussian_params(Pass& p, Head head, std::initializer_list<Var> inputs) {
  return gaussian_params(p, head, std::span<const Var>(inputs.begin(), inputs.size()));
}

inline LatentSample reparameterize(const GaussianParams& gp, const Vector& epsilon,
                                   LatentKind which = LatentKind::z,
                                   LatentSource source = LatentSource::prior) {
  require(epsilon.size() == gp.dim(), "reparameterize: epsilon has the wrong dimension");
  LatentSample s;
  s.value = gp.mu + gp.sigma().cwiseProduct(epsilon);
  s.params = gp;
  s.epsilon = epsilon;
  s.which = which;
  s.source = source;
  return s;
}

/// value = mu + exp(logvar / 2) * epsilon, differentiable in mu and logvar.
inline Var reparameterize(Graph& g, const GaussianNodes& gp, const Vector& epsilon) {
  Var sigma = g.exp(g.scale(gp.logvar, 0.5));
  return g.add(gp.mu, g.mul(sigma, g.constant(epsilon)));
}

inline Vector standard_normal(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = nd(rng);
  return v;
}

/// KL(q || p) for diagonal Gaussians, summed over dimensions.
inline double kl_diag_gaussians(const GaussianParams& q, const GaussianParams& p) {
  require(q.dim() == p.dim(), "kl_diag_gaussians: dimension mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.dim(); ++i) {
    double d = q.mu(i) - p.mu(i);
    s += std::exp(q.logvar(i) - p.logvar(i)) + d * d * std::exp(-p.logvar(i)) - 1.0 +
         p.logvar(i) - q.logvar(i);
  }
  return 0.5 * s;
}

inline Var kl_diag_gaussians(Graph& g, const GaussianNodes& q, const GaussianNodes& p) {
  require(g.rows(q.mu) == g.rows(p.mu), "kl_diag_gaussians: dimension mismatch");
  Var ratio = g.exp(g.sub(q.logvar, p.logvar));
  Var diff = g.sub(q.mu, p.mu);
  Var maha = g.mul(g.square(diff), g.exp(g.scale(p.logvar, -1.0)));
  Var terms = g.add(g.add(ratio, maha), g.sub(p.logvar, q.logvar));
  return g.scale(g.add_scalar(g.sum(terms), -static_cast<double>(g.rows(q.mu))), 0.5);
}

/// |kl - C|: the capacity-control penalty.
inline double kl_control_penalty(double kl, double capacity) {
  require(capacity >= 0.0, "kl_control_penalty: capacity must be non-negative");
  return std::abs(kl - capacity);
}

inline Var kl_control_penalty(Graph& g, Var kl, double capacity) {
  require(capacity >= 0.0, "kl_control_penalty: capacity must be non-negative");
  return g.abs(g.add_scalar(kl, -capacity));
}

/// log N(x; mu, diag(exp(logvar))).
inline double gaussian_log_density(const Vector& x, const GaussianParams& gp) {
  double s = 0.0;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double d = x(i) - gp.mu(i);
    s += log2pi + gp.logvar(i) + d * d * std::exp(-gp.logvar(i));
  }
  return -0.5 * s;
}

}  // namespace vqag
