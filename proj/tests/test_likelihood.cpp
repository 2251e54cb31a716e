#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "vqag/likelihood.hpp"
#include "support.hpp"

using namespace vqag;

namespace {

double direct_log_prob(Network& net, const TokenizedExample& ex, double* answer = nullptr,
                       double* question = nullptr) {
  Graph g(false);
  Pass p{g, net, 0.0, nullptr};
  ContextEncoding enc = encode_context(p, ex.context);
  Var zero = g.constant(Vector::Zero(net.config().latent));
  double a = g.scalar(answer_log_prob(p, enc.pointer, zero, ex.answer_span));
  QuestionMemory qm = make_question_memory(p, answer_aware_encode(p, enc.enc.H, ex.answer_span));
  CopyIndex copy(ex.context, net.config().vocab_size);
  double q = g.scalar(question_log_prob(p, qm, zero, ex.question_ids, ex.question.words, copy));
  if (answer) *answer = a;
  if (question) *question = q;
  return a + q;
}

}  // namespace

TEST(LogMeanExp, StableAndExact) {
  std::vector<double> lw = {-700.0, -701.0, -702.0};
  LogMeanExp r = log_mean_exp(lw);
  double expect = -700.0 + std::log((1 + std::exp(-1.0) + std::exp(-2.0)) / 3.0);
  EXPECT_NEAR(r.value, expect, 1e-12);
  EXPECT_TRUE(std::isfinite(r.std_err));
  std::vector<double> same(5, -3.0);
  EXPECT_NEAR(log_mean_exp(same).value, -3.0, 1e-15);
  EXPECT_EQ(log_mean_exp(same).std_err, 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dead = {-inf, -inf};
  EXPECT_THROW(log_mean_exp(dead), NumericalError);
  std::vector<double> partly = {-inf, 0.0};
  EXPECT_NEAR(log_mean_exp(partly).value, std::log(0.5), 1e-15);
}

TEST(IsNll, TiedHeadsAndLatentFreeDecodersGiveDirectNll) {
  auto data = test_support::toy_data(10, 3);
  Network net(test_support::tiny_config(data.vocab), 6);
  test_support::tie_posteriors_to_priors(net);
  net.params().at("ae.init.W").value.setZero();
  net.params().at("qg.init.W").value.setZero();
  for (const auto& ex : data.examples) {
    double a = 0, q = 0;
    double lp = direct_log_prob(net, ex, &a, &q);
    for (int n : {1, 7}) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(n));
      NLLReport r = is_nll(net, ex, n, rng);
      EXPECT_NEAR(r.nll, -lp, 1e-9);
      EXPECT_NEAR(r.nll_a, -a, 1e-9);
      EXPECT_NEAR(r.nll_q, -q, 1e-9);
      EXPECT_EQ(r.n_samples, n);
    }
  }
}

TEST(IsNll, SingleSampleMatchesManualWeight) {
  auto data = test_support::toy_data(6, 3);
  Network net(test_support::tiny_config(data.vocab), 6);
  const auto& ex = data.examples[1];
  std::mt19937_64 r1(21), r2(21);
  NLLReport r = is_nll(net, ex, 1, r1);

  Graph g(false);
  Pass p{g, net, 0.0, nullptr};
  LatentHeads h = latent_heads(p, ex);
  GaussianParams pz = h.prior_z.values(g), qz = h.post_z.values(g);
  GaussianParams py = h.prior_y.values(g), qy = h.post_y.values(g);
  const int k = net.config().latent;
  Vector z = qz.mu + qz.sigma().cwiseProduct(standard_normal(k, r2));
  Vector y = qy.mu + qy.sigma().cwiseProduct(standard_normal(k, r2));
  double la = g.scalar(answer_log_prob(p, h.context.pointer, g.constant(z), ex.answer_span));
  QuestionMemory qm = make_question_memory(p, answer_aware_encode(p, h.context.enc.H, ex.answer_span));
  CopyIndex copy(ex.context, net.config().vocab_size);
  double lq = g.scalar(question_log_prob(p, qm, g.constant(y), ex.question_ids, ex.question.words, copy));
  auto log_normal = [](const Vector& x, const GaussianParams& gp) {
    double s = 0;
    for (int i = 0; i < x.size(); ++i) {
      double v = std::exp(gp.logvar(i));
      s += -0.5 * (std::log(2 * M_PI * v) + (x(i) - gp.mu(i)) * (x(i) - gp.mu(i)) / v);
    }
    return s;
  };
  double wa = la + log_normal(z, pz) - log_normal(z, qz);
  double wq = lq + log_normal(y, py) - log_normal(y, qy);
  EXPECT_NEAR(r.nll_a, -wa, 1e-9);
  EXPECT_NEAR(r.nll_q, -wq, 1e-9);
  EXPECT_NEAR(r.nll, -(wa + wq), 1e-9);
  EXPECT_EQ(r.std_err_nll, 0.0);
}

TEST(IsNll, DeterministicAndStableInSampleCount) {
  auto data = test_support::toy_data(8, 3);
  Network net(test_support::tiny_config(data.vocab), 6);
  NLLReport a = is_nll(net, data.examples, 30, 17);
  NLLReport b = is_nll(net, data.examples, 30, 17);
  EXPECT_EQ(a.nll, b.nll);
  EXPECT_EQ(a.nll_q, b.nll_q);
  NLLReport big = is_nll(net, data.examples, 300, 17);
  double se = std::sqrt(a.std_err_nll * a.std_err_nll + big.std_err_nll * big.std_err_nll);
  EXPECT_LE(big.nll, a.nll + 2.0 * se);
  for (double v : {big.nll, big.nll_a, big.nll_q, big.std_err_nll}) EXPECT_TRUE(std::isfinite(v));
  nlohmann::json j = big;
  for (const char* key : {"nll", "nll_a", "nll_q", "n_samples", "std_err_nll", "std_err_a", "std_err_q"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_THROW(is_nll(net, data.examples, 0, 1), ContractViolation);
}

TEST(MeanKl, MatchesPerExampleAverage) {
  auto data = test_support::toy_data(5, 3);
  Network net(test_support::tiny_config(data.vocab), 6);
  double sz = 0, sy = 0;
  for (const auto& ex : data.examples) {
    Graph g(false);
    Pass p{g, net, 0.0, nullptr};
    LatentHeads h = latent_heads(p, ex);
    sz += kl_diag_gaussians(h.post_z.values(g), h.prior_z.values(g));
    sy += kl_diag_gaussians(h.post_y.values(g), h.prior_y.values(g));
  }
  KLReport r = mean_kl(net, data.examples);
  EXPECT_NEAR(r.kl_z, sz / data.examples.size(), 1e-12);
  EXPECT_NEAR(r.kl_y, sy / data.examples.size(), 1e-12);
  EXPECT_EQ(mean_kl(net, std::span<const TokenizedExample>{}).kl_z, 0.0);
}
