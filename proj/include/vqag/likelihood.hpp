#pragma once

// Importance-sampling estimates of -log p(q, a | c), -log p(a | c) and
// -log p(q | a, c) with the posteriors as proposals.

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqag/errors.hpp"
#include "vqag/model.hpp"

namespace vqag {

struct NLLReport {
  double nll = 0.0;
  double nll_a = 0.0;
  double nll_q = 0.0;
  int n_samples = 0;
  double std_err_nll = 0.0;
  double std_err_a = 0.0;
  double std_err_q = 0.0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NLLReport, nll, nll_a, nll_q, n_samples, std_err_nll,
                                   std_err_a, std_err_q)

/// log((1/N) sum exp(lw_i)) and its delta-method standard error.
struct LogMeanExp {
  double value = 0.0;
  double std_err = 0.0;
};

inline LogMeanExp log_mean_exp(std::span<const double> lw) {
  require(!lw.empty(), "log_mean_exp: no samples");
  double m = -std::numeric_limits<double>::infinity();
  for (double x : lw) m = std::max(m, x);
  if (!std::isfinite(m))
    throw NumericalError("importance weights are all zero: the gold pair has zero probability");
  const double n = static_cast<double>(lw.size());
  double s = 0.0, s2 = 0.0;
  for (double x : lw) {
    double w = std::exp(x - m);
    s += w;
    s2 += w * w;
  }
  double mean = s / n;
  double var = lw.size() > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
  return {m + std::log(mean), std::sqrt(var / n) / mean};
}

/// Log importance weights of one example, split by latent.
struct ImportanceWeights {
  std::vector<double> answer;    // log p(a|z,c) + log p(z|c) - log q(z|a,c)
  std::vector<double> question;  // log p(q|y,a,c) + log p(y|c) - log q(y|q,c)
};

inline ImportanceWeights importance_weights(Network& net, const TokenizedExample& ex,
                                            int n_samples, std::mt19937_64& rng) {
  require(n_samples >= 1, "is_nll: n_samples must be at least 1");
  Graph g(false);
  Pass p{g, net, 0.0, nullptr};
  LatentHeads heads = latent_heads(p, ex);
  GaussianParams pz = heads.prior_z.values(g), qz = heads.post_z.values(g);
  GaussianParams py = heads.prior_y.values(g), qy = heads.post_y.values(g);
  Var H_CA = answer_aware_encode(p, heads.context.enc.H, ex.answer_span);
  QuestionMemory qm = make_question_memory(p, H_CA);
  CopyIndex copy(ex.context, net.config().vocab_size);
  const int k = net.config().latent;
  ImportanceWeights w;
  for (int i = 0; i < n_samples; ++i) {
    Vector z = reparameterize(qz, standard_normal(k, rng)).value;
    Vector y = reparameterize(qy, standard_normal(k, rng)).value;
    double la = g.scalar(answer_log_prob(p, heads.context.pointer, g.constant(z), ex.answer_span));
    double lq = g.scalar(
        question_log_prob(p, qm, g.constant(y), ex.question_ids, ex.question.words, copy));
    w.answer.push_back(la + gaussian_log_density(z, pz) - gaussian_log_density(z, qz));
    w.question.push_back(lq + gaussian_log_density(y, py) - gaussian_log_density(y, qy));
  }
  return w;
}

/// Estimates for one example.
inline NLLReport is_nll(Network& net, const TokenizedExample& ex, int n_samples,
                        std::mt19937_64& rng) {
  ImportanceWeights w = importance_weights(net, ex, n_samples, rng);
  std::vector<double> joint(w.answer.size());
  for (std::size_t i = 0; i < joint.size(); ++i) joint[i] = w.answer[i] + w.question[i];
  LogMeanExp j = log_mean_exp(joint), a = log_mean_exp(w.answer), q = log_mean_exp(w.question);
  NLLReport r;
  r.nll = -j.value;
  r.nll_a = -a.value;
  r.nll_q = -q.value;
  r.std_err_nll = j.std_err;
  r.std_err_a = a.std_err;
  r.std_err_q = q.std_err;
  r.n_samples = n_samples;
  return r;
}

/// Dataset mean of the per-example estimates. Each example draws from its
/// own stream keyed by `seed` and its id.
inline NLLReport is_nll(Network& net, std::span<const TokenizedExample> data, int n_samples,
                        std::uint64_t seed) {
  require(!data.empty(), "is_nll: empty dataset");
  NLLReport total;
  double v = 0, va = 0, vq = 0;
  for (const auto& ex : data) {
    auto rng = example_stream(seed, 0, ex.id);
    NLLReport r = is_nll(net, ex, n_samples, rng);
    total.nll += r.nll;
    total.nll_a += r.nll_a;
    total.nll_q += r.nll_q;
    v += r.std_err_nll * r.std_err_nll;
    va += r.std_err_a * r.std_err_a;
    vq += r.std_err_q * r.std_err_q;
  }
  const double n = static_cast<double>(data.size());
  total.nll /= n;
  total.nll_a /= n;
  total.nll_q /= n;
  total.std_err_nll = std::sqrt(v) / n;
  total.std_err_a = std::sqrt(va) / n;
  total.std_err_q = std::sqrt(vq) / n;
  total.n_samples = n_samples;
  return total;
}

/// Mean KL(posterior || prior) of both latents over a dataset.
struct KLReport {
  double kl_z = 0.0;
  double kl_y = 0.0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(KLReport, kl_z, kl_y)

inline KLReport mean_kl(Network& net, std::span<const TokenizedExample> data) {
  KLReport r;
  if (data.empty()) return r;
  for (const auto& ex : data) {
    Graph g(false);
    Pass p{g, net, 0.0, nullptr};
    LatentHeads h = latent_heads(p, ex);
    r.kl_z += kl_diag_gaussians(h.post_z.values(g), h.prior_z.values(g));
    r.kl_y += kl_diag_gaussians(h.post_y.values(g), h.prior_y.values(g));
  }
  r.kl_z /= static_cast<double>(data.size());
  r.kl_y /= static_cast<double>(data.size());
  return r;
}

}  // namespace vqag
