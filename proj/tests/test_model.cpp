#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <filesystem>
#include <fstream>
#include <random>

#include "vqag/likelihood.hpp"
#include "vqag/model.hpp"
#include "support.hpp"

using namespace vqag;
using test_support::tiny_config;
using test_support::toy_data;

namespace {

struct Fixture {
  test_support::ToyData data = toy_data(20, 7);
  Network net{tiny_config(data.vocab), 5};

  const TokenizedExample& example_of_length(int L) {
    for (const auto& ex : data.examples)
      if (ex.context.size() == L) return ex;
    throw std::runtime_error("no example of requested length");
  }
};

Matrix random_rows(int L, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(L, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

GaussianParams random_gaussian(int k, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.7);
  GaussianParams g{Vector(k), Vector(k)};
  for (int i = 0; i < k; ++i) {
    g.mu(i) = nd(rng);
    g.logvar(i) = nd(rng);
  }
  return g;
}

}  // namespace

// ---- neural_core -----------------------------------------------------------------

TEST(NeuralCore, EmbedShapeAndDeterminism) {
  Fixture f;
  const auto& c = f.net.config();
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  std::vector<int> one = {5};
  std::vector<int> chars = f.data.vocab.char_ids("anna", c.word_len);
  Var e = embed(p, one, chars);
  EXPECT_EQ(g.rows(e), 1);
  EXPECT_EQ(g.cols(e), c.word_dim + c.char_filters);
  std::vector<int> two = {5, 5};
  std::vector<int> chars2 = chars;
  chars2.insert(chars2.end(), chars.begin(), chars.end());
  Var e2 = embed(p, two, chars2);
  EXPECT_TRUE(g.value(e2).row(0).isApprox(g.value(e2).row(1)));
  std::vector<int> bad = {f.net.config().vocab_size};
  EXPECT_ANY_THROW(embed(p, bad, chars));
}

TEST(NeuralCore, ContextualEncodeShapesAndDirection) {
  Fixture f;
  const int h = f.net.config().hidden;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    Matrix x = random_rows(5, f.net.config().embed_dim(), rng);
    Graph g(false);
    Pass p{g, f.net, 0.0, nullptr};
    EncodedSequence a = contextual_encode(p, g.constant(x), EncoderKind::context);
    EncodedSequence b = contextual_encode(p, g.constant(x.colwise().reverse()), EncoderKind::context);
    EXPECT_EQ(g.rows(a.H), 5);
    EXPECT_EQ(g.cols(a.H), 2 * h);
    EXPECT_EQ(g.rows(a.h), 2 * h);
    EXPECT_GT((g.value(a.h) - g.value(b.h)).norm(), 1e-9);
  }
}

TEST(NeuralCore, SingleTokenStateEqualsSummary) {
  Fixture f;
  std::mt19937_64 rng(3);
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  EncodedSequence s =
      contextual_encode(p, g.constant(random_rows(1, f.net.config().embed_dim(), rng)),
                        EncoderKind::question);
  EXPECT_TRUE(g.value(s.H).row(0).transpose().isApprox(g.value(s.h)));
  EXPECT_THROW(contextual_encode(p, g.constant(Matrix(0, f.net.config().embed_dim())),
                                 EncoderKind::answer),
               ContractViolation);
}

TEST(NeuralCore, AnswerAwareEncoding) {
  Fixture f;
  const auto& c = f.net.config();
  EXPECT_EQ(f.net.params().at("enc.aware.fw.W").value.cols(), 2 * c.hidden + 2 + c.hidden);
  std::mt19937_64 rng(4);
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  Var H = g.constant(random_rows(6, 2 * c.hidden, rng));
  Var a = answer_aware_encode(p, H, {1, 2});
  Var b = answer_aware_encode(p, H, {3, 3});
  EXPECT_GT((g.value(a) - g.value(b)).norm(), 1e-9);
  Matrix ind = span_indicators(6, {3, 3});
  EXPECT_EQ(ind.col(0).sum(), 1.0);
  EXPECT_EQ(ind(3, 0), 1.0);
  EXPECT_EQ(ind(3, 1), 1.0);
  EXPECT_THROW(answer_aware_encode(p, H, {4, 2}), ContractViolation);
  EXPECT_THROW(answer_aware_encode(p, H, {0, 6}), ContractViolation);
}

TEST(NeuralCore, WordEmbeddingIsFrozen) {
  Fixture f;
  EXPECT_FALSE(f.net.params().at("word_emb").trainable);
  Matrix before = f.net.params().at("word_emb").value;
  Graph g(true);
  Pass p{g, f.net, 0.0, nullptr};
  std::mt19937_64 rng(1);
  ExampleTerms t = example_terms(p, f.data.examples[0], draw_noise(f.net.config().latent, rng));
  g.backward(g.add(t.recon_a, t.recon_q));
  EXPECT_EQ(f.net.params().at("word_emb").grad.norm(), 0.0);
}

// ---- latent ----------------------------------------------------------------------

TEST(Latent, HeadShapesAndZeroWeights) {
  Fixture f;
  const int k = f.net.config().latent;
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  Var hc = g.constant(Matrix::Ones(2 * f.net.config().hidden, 1));
  GaussianNodes n = gaussian_params(p, Head::prior_z, {hc});
  EXPECT_EQ(g.rows(n.mu), k);
  EXPECT_EQ(g.rows(n.logvar), k);
  EXPECT_THROW(gaussian_params(p, Head::post_z, {hc}), ContractViolation);
  EXPECT_THROW(gaussian_params(p, Head::prior_y, {hc, hc}), ContractViolation);

  f.net.params().at("latent.prior_y.W").value.setZero();
  f.net.params().at("latent.prior_y.b").value.setZero();
  Graph g2(false);
  Pass p2{g2, f.net, 0.0, nullptr};
  GaussianParams gp = gaussian_params(p2, Head::prior_y, {g2.constant(Matrix::Ones(2 * f.net.config().hidden, 1))}).values(g2);
  EXPECT_EQ(gp.mu.norm(), 0.0);
  EXPECT_EQ(gp.logvar.norm(), 0.0);
}

TEST(Latent, PosteriorDependsOnSecondInputAndClamps) {
  Fixture f;
  const int d = 2 * f.net.config().hidden;
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  Var hc = g.constant(Matrix::Ones(d, 1));
  auto a = gaussian_params(p, Head::post_z, {hc, g.constant(Matrix::Ones(d, 1))}).values(g);
  auto b = gaussian_params(p, Head::post_z, {hc, g.constant(-Matrix::Ones(d, 1))}).values(g);
  EXPECT_GT((a.mu - b.mu).norm(), 1e-9);
  auto big = gaussian_params(p, Head::post_z, {hc, g.constant(1e4 * Matrix::Ones(d, 1))}).values(g);
  EXPECT_LE(big.logvar.cwiseAbs().maxCoeff(), 8.0);
}

TEST(Latent, Reparameterize) {
  std::mt19937_64 rng(2);
  GaussianParams gp = random_gaussian(4, rng);
  EXPECT_TRUE(reparameterize(gp, Vector::Zero(4)).value.isApprox(gp.mu));
  GaussianParams unit{gp.mu, Vector::Zero(4)};
  Vector e1 = Vector::Zero(4);
  e1(0) = 1.0;
  EXPECT_TRUE(reparameterize(unit, e1).value.isApprox(gp.mu + e1));
  EXPECT_THROW(reparameterize(gp, Vector::Zero(3)), ContractViolation);

  const int N = 100000;
  Vector mean = Vector::Zero(4);
  for (int i = 0; i < N; ++i) mean += reparameterize(gp, standard_normal(4, rng)).value;
  mean /= N;
  Vector sigma = gp.sigma();
  for (int i = 0; i < 4; ++i) EXPECT_LT(std::abs(mean(i) - gp.mu(i)), 3.0 * sigma(i) / std::sqrt(N));
}

TEST(Latent, KlClosedForm) {
  std::mt19937_64 rng(3);
  GaussianParams q = random_gaussian(4, rng), p = random_gaussian(4, rng);
  EXPECT_EQ(kl_diag_gaussians(q, q), 0.0);
  GaussianParams shifted{Vector::Zero(4), Vector::Zero(4)}, standard = shifted;
  shifted.mu(0) = 1.0;
  EXPECT_DOUBLE_EQ(kl_diag_gaussians(shifted, standard), 0.5);
  EXPECT_THROW(kl_diag_gaussians(q, random_gaussian(3, rng)), ContractViolation);

  double prev = 0.0;
  for (double s : {0.1, 0.5, 1.0, 2.0}) {
    GaussianParams far{Vector::Constant(4, s), Vector::Zero(4)};
    double kl = kl_diag_gaussians(standard, far);
    EXPECT_GT(kl, prev);
    prev = kl;
  }
  for (int i = 0; i < 100; ++i)
    EXPECT_GE(kl_diag_gaussians(random_gaussian(5, rng), random_gaussian(5, rng)), 0.0);
}

TEST(Latent, KlMatchesMonteCarlo) {
  std::mt19937_64 rng(4);
  GaussianParams q = random_gaussian(4, rng), p = random_gaussian(4, rng);
  const int N = 1000000;
  double s = 0.0;
  for (int i = 0; i < N; ++i) {
    Vector x = reparameterize(q, standard_normal(4, rng)).value;
    s += gaussian_log_density(x, q) - gaussian_log_density(x, p);
  }
  double mc = s / N, exact = kl_diag_gaussians(q, p);
  EXPECT_LT(std::abs(mc - exact) / exact, 0.01);
}

TEST(Latent, GraphKlMatchesValueKl) {
  std::mt19937_64 rng(5);
  GaussianParams q = random_gaussian(6, rng), p = random_gaussian(6, rng);
  Graph g(false);
  GaussianNodes qn{g.constant(q.mu), g.constant(q.logvar)}, pn{g.constant(p.mu), g.constant(p.logvar)};
  EXPECT_NEAR(g.scalar(kl_diag_gaussians(g, qn, pn)), kl_diag_gaussians(q, p), 1e-12);
}

TEST(Latent, ControlPenalty) {
  EXPECT_NEAR(kl_control_penalty(4.862, 5.0), 0.138, 1e-12);
  EXPECT_EQ(kl_control_penalty(3.0, 3.0), 0.0);
  EXPECT_EQ(kl_control_penalty(1.25, 0.0), 1.25);
  EXPECT_THROW(kl_control_penalty(1.0, -1.0), ContractViolation);
}

TEST(Latent, MeanKlDiagnostic) {
  Fixture f;
  std::vector<TokenizedExample> one = {f.data.examples[0]};
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  LatentHeads h = latent_heads(p, one[0]);
  KLReport r = mean_kl(f.net, one);
  EXPECT_NEAR(r.kl_z, kl_diag_gaussians(h.post_z.values(g), h.prior_z.values(g)), 1e-12);

  test_support::tie_posteriors_to_priors(f.net);
  KLReport tied = mean_kl(f.net, f.data.examples);
  EXPECT_NEAR(tied.kl_z, 0.0, 1e-12);
  EXPECT_NEAR(tied.kl_y, 0.0, 1e-12);
}

// ---- answer decoder ----------------------------------------------------------------

TEST(AnswerDecoder, InitState) {
  Fixture f;
  const int k = f.net.config().latent;
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  Var z1 = g.constant(Vector::Ones(k)), z2 = g.constant(-Vector::Ones(k));
  LstmState a = init_state(p, z1), b = init_state(p, z2);
  EXPECT_EQ(g.rows(a.h), f.net.config().hidden);
  EXPECT_GT((g.value(a.h) - g.value(b.h)).norm(), 1e-9);
  f.net.params().at("ae.init.b").value.setZero();
  Graph g2(false);
  Pass p2{g2, f.net, 0.0, nullptr};
  EXPECT_EQ(g2.value(init_state(p2, g2.constant(Vector::Zero(k))).h).norm(), 0.0);
}

TEST(AnswerDecoder, PointerStepUniformAndMasks) {
  Fixture f;
  f.net.params().at("ae.att.v").value.setZero();
  const auto& ex = f.example_of_length(7);
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  ContextEncoding enc = encode_context(p, ex.context);
  Var z = g.constant(Vector::Zero(f.net.config().latent));
  PointerStep s = start_step(p, z, enc.pointer);
  for (int j = 0; j < 7; ++j) EXPECT_NEAR(g.value(s.probs)(j, 0), 1.0 / 7.0, 1e-12);
  std::vector<bool> only(7, false);
  only[4] = true;
  PointerStep m = pointer_step(p, init_state(p, z), p.P(f.net.w().ae_bos), enc.pointer, only);
  EXPECT_EQ(g.value(m.probs)(4, 0), 1.0);
  EXPECT_EQ(g.value(m.probs).sum(), 1.0);
  EXPECT_ANY_THROW(pointer_step(p, init_state(p, z), p.P(f.net.w().ae_bos), enc.pointer,
                                std::vector<bool>(7, false)));
  EXPECT_NEAR(g.scalar(answer_log_prob(p, enc.pointer, z, {0, 3})), 2.0 * std::log(1.0 / 7.0), 1e-12);
}

TEST(AnswerDecoder, LogProbMatchesBruteForceEnumeration) {
  Fixture f;
  const auto& ex = f.example_of_length(7);
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  ContextEncoding enc = encode_context(p, ex.context);
  std::mt19937_64 rng(8);
  Var z = g.constant(standard_normal(f.net.config().latent, rng));
  PointerStep s1 = start_step(p, z, enc.pointer);
  Matrix ps = g.value(s1.probs);
  double total = 0.0;
  for (int s = 0; s < 7; ++s) {
    Matrix pe = g.value(end_step(p, s1, s, enc.pointer).probs);
    for (int e = 0; e < 7; ++e) {
      double joint = ps(s, 0) * pe(e, 0);
      total += joint;
      if (e < s) {
        EXPECT_EQ(pe(e, 0), 0.0);
        EXPECT_THROW(answer_log_prob(p, enc.pointer, z, {s, e}), ContractViolation);
      } else {
        EXPECT_NEAR(g.scalar(answer_log_prob(p, enc.pointer, z, {s, e})), std::log(joint), 1e-12);
      }
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(AnswerDecoder, EndMaskHonoursMaximumLength) {
  auto m = end_mask(10, 2, 3);
  std::vector<bool> expect = {false, false, true, true, true, false, false, false, false, false};
  EXPECT_EQ(m, expect);
}

TEST(AnswerDecoder, PermutationCovariance) {
  // Positions before the start are shuffled among themselves, positions after
  // it likewise; the start stays put so the end mask keeps the same set.
  Fixture f;
  std::mt19937_64 rng(6);
  const int L = 9, d = 2 * f.net.config().hidden;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix H = random_rows(L, d, rng);
    int start = 2 + static_cast<int>(rng() % 4), end = start + 1 + static_cast<int>(rng() % (L - start - 1));
    std::vector<int> perm(L);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.begin() + start, rng);
    std::shuffle(perm.begin() + start + 1, perm.end(), rng);
    Matrix HP(L, d);
    int new_end = -1;
    for (int i = 0; i < L; ++i) {
      HP.row(i) = H.row(perm[static_cast<std::size_t>(i)]);
      if (perm[static_cast<std::size_t>(i)] == end) new_end = i;
    }
    Graph g(false);
    Pass p{g, f.net, 0.0, nullptr};
    Var z = g.constant(standard_normal(f.net.config().latent, rng));
    double a = g.scalar(answer_log_prob(p, g.constant(H), z, {start, end}));
    double b = g.scalar(answer_log_prob(p, g.constant(HP), z, {start, new_end}));
    EXPECT_NEAR(a, b, 1e-10);
  }
}

TEST(AnswerDecoder, PointerStepIsPermutationCovariant) {
  Fixture f;
  std::mt19937_64 rng(7);
  const int L = 8, d = 2 * f.net.config().hidden;
  Matrix H = random_rows(L, d, rng);
  std::vector<int> perm(L);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix HP(L, d);
  for (int i = 0; i < L; ++i) HP.row(i) = H.row(perm[static_cast<std::size_t>(i)]);
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  Var z = g.constant(standard_normal(f.net.config().latent, rng));
  Matrix a = g.value(start_step(p, z, make_pointer_memory(p, g.constant(H))).probs);
  Matrix b = g.value(start_step(p, z, make_pointer_memory(p, g.constant(HP))).probs);
  for (int i = 0; i < L; ++i) EXPECT_NEAR(b(i, 0), a(perm[static_cast<std::size_t>(i)], 0), 1e-12);
}

TEST(AnswerDecoder, GreedyAndAncestralSampling) {
  Fixture f;
  const auto& ex = f.example_of_length(7);
  // A 5-token context for the frequency check.
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  std::mt19937_64 rng(9);
  Matrix H = random_rows(5, 2 * f.net.config().hidden, rng);
  PointerMemory mem = make_pointer_memory(p, g.constant(H));
  Var z = g.constant(standard_normal(f.net.config().latent, rng));
  PointerStep s1 = start_step(p, z, mem);
  Matrix ps = g.value(s1.probs);
  std::vector<std::vector<double>> joint(5, std::vector<double>(5, 0.0));
  for (int s = 0; s < 5; ++s) {
    Matrix pe = g.value(end_step(p, s1, s, mem).probs);
    for (int e = 0; e < 5; ++e) joint[s][e] = ps(s, 0) * pe(e, 0);
  }
  const int N = 10000;
  std::vector<std::vector<int>> counts(5, std::vector<int>(5, 0));
  for (int i = 0; i < N; ++i) {
    AnswerSpan a = sample_answer(p, mem, z, DecodeMode::ancestral, &rng);
    ASSERT_LE(a.start, a.end);
    ++counts[a.start][a.end];
  }
  for (int s = 0; s < 5; ++s)
    for (int e = 0; e < 5; ++e) {
      double pr = joint[s][e], sd = std::sqrt(N * pr * (1 - pr));
      EXPECT_LE(std::abs(counts[s][e] - N * pr), 3.0 * sd + 1e-9) << s << "," << e;
    }

  // Greedy picks the argmax start, then the argmax end under the mask.
  ContextEncoding enc = encode_context(p, ex.context);
  AnswerSpan gsp = sample_answer(p, enc.pointer, z, DecodeMode::greedy, nullptr);
  PointerStep t1 = start_step(p, z, enc.pointer);
  Eigen::Index best_s, best_e;
  g.value(t1.probs).col(0).maxCoeff(&best_s);
  g.value(end_step(p, t1, static_cast<int>(best_s), enc.pointer).probs).col(0).maxCoeff(&best_e);
  EXPECT_EQ(gsp.start, best_s);
  EXPECT_EQ(gsp.end, best_e);
}

// ---- question decoder ---------------------------------------------------------------

TEST(QuestionDecoder, InitStateAndGate) {
  Fixture f;
  const int k = f.net.config().latent;
  f.net.params().at("qg.gate.W").value.setZero();
  f.net.params().at("qg.init.b").value.setZero();
  const auto& ex = f.data.examples[0];
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  EXPECT_EQ(g.value(init_question_state(p, g.constant(Vector::Zero(k))).h).norm(), 0.0);
  LstmState a = init_question_state(p, g.constant(Vector::Ones(k)));
  LstmState b = init_question_state(p, g.constant(-Vector::Ones(k)));
  EXPECT_GT((g.value(a.h) - g.value(b.h)).norm(), 1e-9);
  EXPECT_EQ(g.rows(a.h), f.net.config().hidden);
  ContextEncoding enc = encode_context(p, ex.context);
  QuestionMemory qm = make_question_memory(p, answer_aware_encode(p, enc.enc.H, ex.answer_span));
  DecoderStep s = decode_step(p, a, Vocabulary::kBos, qm);
  EXPECT_EQ(g.scalar(s.p_s), 0.5);
}

TEST(QuestionDecoder, DistributionsNormaliseAndMaskingZeroesCopy) {
  Fixture f;
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const auto& ex = f.data.examples[static_cast<std::size_t>(trial) % f.data.examples.size()];
    Graph g(false);
    Pass p{g, f.net, 0.0, nullptr};
    ContextEncoding enc = encode_context(p, ex.context);
    std::vector<bool> mask(static_cast<std::size_t>(ex.context.size()), true);
    mask[rng() % mask.size()] = false;
    QuestionMemory qm = make_question_memory(p, answer_aware_encode(p, enc.enc.H, ex.answer_span), mask);
    LstmState st = init_question_state(p, g.constant(standard_normal(f.net.config().latent, rng)));
    int prev = static_cast<int>(rng() % static_cast<unsigned>(f.net.config().vocab_size));
    DecoderStepOutput out = step_values(g, decode_step(p, st, prev, qm));
    EXPECT_NEAR(out.P_vocab.sum(), 1.0, 1e-12);
    EXPECT_NEAR(out.P_copy.sum(), 1.0, 1e-12);
    EXPECT_GE(out.p_s, 0.0);
    EXPECT_LE(out.p_s, 1.0);
    for (std::size_t j = 0; j < mask.size(); ++j)
      if (!mask[j]) EXPECT_EQ(out.P_copy(static_cast<Eigen::Index>(j)), 0.0);
  }
}

TEST(QuestionDecoder, MixtureProbabilityCases) {
  EncodedText ctx;
  ctx.ids = {7, 8, 9, 1, 11, 9};
  ctx.words = {"a", "b", "c", "zork", "e", "c"};
  CopyIndex copy(ctx, 20);
  DecoderStepOutput out;
  out.P_vocab = Vector::Constant(20, 0.05);
  out.P_copy = (Vector(6) << 0.1, 0.2, 0.3, 0.15, 0.05, 0.2).finished();
  out.p_s = 1.0;
  EXPECT_DOUBLE_EQ(mixture_token_prob(out, 9, copy), 0.05);
  out.p_s = 0.0;
  EXPECT_DOUBLE_EQ(mixture_token_prob(out, 9, copy), 0.3 + 0.2);
  int zork = copy.key_for("zork", Vocabulary::kUnk);
  EXPECT_EQ(zork, 20);
  EXPECT_DOUBLE_EQ(mixture_token_prob(out, zork, copy), 0.15);
  EXPECT_EQ(copy.key_for("absent", Vocabulary::kUnk), Vocabulary::kUnk);
  EXPECT_EQ(copy.input_id(zork), Vocabulary::kUnk);
  out.p_s = 0.3;
  Vector ext = extended_distribution(out, copy);
  EXPECT_EQ(ext.size(), 21);
  EXPECT_NEAR(ext.sum(), 1.0, 1e-12);
  for (int key = 0; key < ext.size(); ++key) EXPECT_NEAR(ext(key), mixture_token_prob(out, key, copy), 1e-15);
}

TEST(QuestionDecoder, LogProbEqualsStepwiseRecomputation) {
  Fixture f;
  std::mt19937_64 rng(11);
  for (const auto& ex : f.data.examples) {
    Graph g(false);
    Pass p{g, f.net, 0.0, nullptr};
    ContextEncoding enc = encode_context(p, ex.context);
    QuestionMemory qm = make_question_memory(p, answer_aware_encode(p, enc.enc.H, ex.answer_span));
    CopyIndex copy(ex.context, f.net.config().vocab_size);
    Var y = g.constant(standard_normal(f.net.config().latent, rng));
    double lp = g.scalar(question_log_prob(p, qm, y, ex.question_ids, ex.question.words, copy));
    LstmState s = init_question_state(p, y);
    double manual = 0.0;
    Vector last;
    for (std::size_t t = 1; t < ex.question_ids.size(); ++t) {
      DecoderStep st = decode_step(p, s, ex.question_ids[t - 1], qm);
      s = st.state;
      last = extended_distribution(step_values(g, st), copy);
      int key = t + 1 < ex.question_ids.size() ? copy.key_for(ex.question.words[t - 1], ex.question_ids[t])
                                               : Vocabulary::kEos;
      manual += std::log(last(key));
    }
    EXPECT_NEAR(lp, manual, 1e-10);
    EXPECT_LE(lp, 0.0);

    // One more word before EOS can only lower the prefix log-probability.
    std::vector<int> longer(ex.question_ids.begin(), ex.question_ids.end() - 1);
    longer.push_back(ex.question_ids[1]);
    longer.push_back(Vocabulary::kEos);
    std::vector<std::string> words = ex.question.words;
    words.push_back(ex.question.words[0]);
    double prefix = manual - std::log(last(Vocabulary::kEos));
    double with_extra = g.scalar(question_log_prob(p, qm, y, longer, words, copy));
    EXPECT_LE(with_extra, prefix + 1e-12);
  }
}

TEST(QuestionDecoder, GenerationBoundsDeterminismAndLocalArgmax) {
  Fixture f;
  const auto& ex = f.data.examples[1];
  std::mt19937_64 rng(12);
  Graph g(false);
  Pass p{g, f.net, 0.0, nullptr};
  ContextEncoding enc = encode_context(p, ex.context);
  QuestionMemory qm = make_question_memory(p, answer_aware_encode(p, enc.enc.H, ex.answer_span));
  CopyIndex copy(ex.context, f.net.config().vocab_size);
  Var y = g.constant(standard_normal(f.net.config().latent, rng));
  for (int max_len : {1, 3, 20}) {
    GeneratedQuestion a = generate_question(p, qm, y, copy, DecodeMode::greedy, max_len, nullptr);
    GeneratedQuestion b = generate_question(p, qm, y, copy, DecodeMode::greedy, max_len, nullptr);
    EXPECT_LE(static_cast<int>(a.keys.size()), max_len);
    EXPECT_EQ(a.keys, b.keys);
  }
  for (int i = 0; i < 20; ++i) {
    GeneratedQuestion s = generate_question(p, qm, y, copy, DecodeMode::ancestral, 20, &rng);
    EXPECT_LE(s.keys.size(), 20u);
  }
  // Each greedy token is the argmax of its step's extended distribution.
  GeneratedQuestion q = generate_question(p, qm, y, copy, DecodeMode::greedy, 20, nullptr);
  LstmState s = init_question_state(p, y);
  int prev = Vocabulary::kBos;
  for (int key : q.keys) {
    DecoderStep st = decode_step(p, s, prev, qm);
    s = st.state;
    Vector ext = extended_distribution(step_values(g, st), copy);
    for (int other = 0; other < ext.size(); ++other) EXPECT_GE(ext(key), ext(other));
    prev = copy.input_id(key);
  }
}

TEST(QuestionDecoder, CopiedOovKeysSurfaceTheContextWord) {
  EncodedText ctx;
  ctx.ids = {4, 1, 5};
  ctx.words = {"who", "quux", "?"};
  CopyIndex copy(ctx, 10);
  Vocabulary v;
  for (int i = 0; i < 6; ++i) v.add_word("w" + std::to_string(i));
  GeneratedQuestion q{{copy.key_for("quux", Vocabulary::kUnk), 4}, 0.0};
  auto words = question_words(q, copy, v);
  EXPECT_EQ(words[0], "quux");
  EXPECT_EQ(copy.extended_size(), 11);
}

// ---- full model ------------------------------------------------------------------------

TEST(Model, ForwardIsDeterministicWithoutDropout) {
  Fixture f;
  const auto& ex = f.data.examples[2];
  std::mt19937_64 r1(3), r2(3);
  LatentNoise n1 = draw_noise(f.net.config().latent, r1), n2 = draw_noise(f.net.config().latent, r2);
  Graph g1(false), g2(false);
  Pass p1{g1, f.net, 0.0, nullptr}, p2{g2, f.net, 0.0, nullptr};
  ExampleTerms a = example_terms(p1, ex, n1), b = example_terms(p2, ex, n2);
  EXPECT_EQ(g1.scalar(a.recon_q), g2.scalar(b.recon_q));
  EXPECT_EQ(g1.scalar(a.recon_a), g2.scalar(b.recon_a));
  EXPECT_EQ(g1.scalar(a.kl_z), g2.scalar(b.kl_z));
}

TEST(Model, CheckpointRoundTrip) {
  Fixture f;
  auto path = std::filesystem::temp_directory_path() / "vqag_model_roundtrip.ckpt";
  f.net.save(path);
  Network back = Network::load(path);
  EXPECT_EQ(back.config(), f.net.config());
  for (std::size_t i = 0; i < f.net.params().entries().size(); ++i) {
    const auto& a = f.net.params().entries()[i];
    const auto& b = back.params().entries()[i];
    EXPECT_EQ(a.name, b.name);
    EXPECT_EQ(a.role, b.role);
    EXPECT_TRUE(a.tensor.value == b.tensor.value) << a.name;
  }
  {
    std::ofstream out(path, std::ios::binary);
    out << "garbage";
  }
  EXPECT_THROW(Network::load(path), InputError);
}

TEST(Model, RolesSeparateGenerativeAndInference) {
  Fixture f;
  for (const auto& e : f.net.params().entries()) {
    bool inference = e.name.rfind("enc.question", 0) == 0 || e.name.rfind("enc.answer", 0) == 0 ||
                     e.name.rfind("latent.post", 0) == 0;
    EXPECT_EQ(e.role == Role::inference, inference) << e.name;
  }
}
