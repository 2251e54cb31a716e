#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "vqag/objective.hpp"
#include "support.hpp"

using namespace vqag;

namespace {

std::vector<const TokenizedExample*> pointers(const std::vector<TokenizedExample>& v, std::size_t n) {
  std::vector<const TokenizedExample*> out;
  for (std::size_t i = 0; i < std::min(n, v.size()); ++i) out.push_back(&v[i]);
  return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("vqag_obj_" + name);
  std::filesystem::remove_all(d);
  return d;
}

TrainConfig small_train(int epochs, int batch = 4) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = batch;
  c.lr = 0.01;
  c.seed = 3;
  c.C_a = 0.5;
  c.C_q = 0.5;
  return c;
}

}  // namespace

TEST(TrainConfig, DefaultsAndValidation) {
  TrainConfig c;
  EXPECT_EQ(c.lr, 0.001);
  EXPECT_EQ(c.batch_size, 32);
  EXPECT_EQ(c.epochs, 16);
  EXPECT_EQ(c.dropout, 0.2);
  EXPECT_EQ(c.latent_dim, 200);
  EXPECT_EQ(c.hidden, 300);
  EXPECT_EQ(c.clip_norm, 5.0);
  c.batch_size = 0;
  EXPECT_THROW(validate(c), ContractViolation);
  c = TrainConfig{};
  c.C_a = -1;
  EXPECT_THROW(validate(c), ContractViolation);
  nlohmann::json j = nlohmann::json::parse(R"({"lr": 0.5})");
  TrainConfig parsed = j.get<TrainConfig>();
  EXPECT_EQ(parsed.lr, 0.5);
  EXPECT_EQ(parsed.batch_size, 32);
}

TEST(Loss, BreakdownIdentityAndTiedHeads) {
  auto data = test_support::toy_data(8, 2);
  Network net(test_support::tiny_config(data.vocab), 4);
  auto batch = pointers(data.examples, 4);
  LossBreakdown l = elbo_loss(net, batch, 0.3, 0.7, NoisePolicy{1, 0, 0.0, nullptr});
  EXPECT_NEAR(l.total, -l.recon_q - l.recon_a + l.penalty_z + l.penalty_y, 1e-12);
  EXPECT_NEAR(l.penalty_z, std::abs(l.kl_z - 0.3), 1e-12);
  EXPECT_NEAR(l.penalty_y, std::abs(l.kl_y - 0.7), 1e-12);
  EXPECT_LE(l.recon_q, 0.0);
  EXPECT_LE(l.recon_a, 0.0);

  test_support::tie_posteriors_to_priors(net);
  LossBreakdown t = elbo_loss(net, batch, 0.0, 0.0, NoisePolicy{1, 0, 0.0, nullptr});
  EXPECT_NEAR(t.penalty_z, 0.0, 1e-12);
  EXPECT_NEAR(t.penalty_y, 0.0, 1e-12);
  EXPECT_NEAR(t.total, -(t.recon_q + t.recon_a), 1e-12);
  EXPECT_THROW(elbo_loss(net, {}, 0, 0, {}), ContractViolation);
}

TEST(Loss, InvariantToBatchOrder) {
  auto data = test_support::toy_data(10, 2);
  Network net(test_support::tiny_config(data.vocab), 4);
  auto batch = pointers(data.examples, 6);
  auto reversed = batch;
  std::reverse(reversed.begin(), reversed.end());
  NoisePolicy noise{5, 2, 0.2, nullptr};
  LossBreakdown a = elbo_loss(net, batch, 1.0, 1.0, noise);
  LossBreakdown b = elbo_loss(net, reversed, 1.0, 1.0, noise);
  EXPECT_NEAR(a.total, b.total, 1e-12);
  EXPECT_NEAR(a.kl_z, b.kl_z, 1e-12);
}

TEST(Loss, NonFiniteParameterIsNamed) {
  auto data = test_support::toy_data(4, 2);
  Network net(test_support::tiny_config(data.vocab), 4);
  net.params().at("qg.merge.b").value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    elbo_loss(net, pointers(data.examples, 2), 0, 0, {});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("qg.merge.b"), std::string::npos) << e.what();
  }
}

TEST(Train, ZeroEpochsPersistsInitialParameters) {
  auto data = test_support::toy_data(8, 2);
  Network net(test_support::tiny_config(data.vocab), 4);
  Network before = net;
  auto dir = fresh_dir("zero");
  TrainHooks hooks;
  hooks.checkpoint_dir = dir;
  TrainResult r = train(small_train(0), data.examples, net, hooks);
  ASSERT_EQ(r.checkpoints.size(), 1u);
  EXPECT_EQ(r.checkpoints[0].filename(), "epoch_00.ckpt");
  Network back = Network::load(r.checkpoints[0]);
  for (std::size_t i = 0; i < before.params().entries().size(); ++i)
    EXPECT_TRUE(back.params().entries()[i].tensor.value == before.params().entries()[i].tensor.value);
}

TEST(Train, FixedSeedGivesIdenticalTrajectory) {
  auto data = test_support::toy_data(12, 2);
  auto run = [&] {
    Network net(test_support::tiny_config(data.vocab), 4);
    TrainResult r = train(small_train(3), data.examples, net);
    return std::make_pair(r, net.params().entries()[5].tensor.value);
  };
  auto [a, wa] = run();
  auto [b, wb] = run();
  ASSERT_EQ(a.epochs.size(), 3u);
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    EXPECT_EQ(a.epochs[i].loss.total, b.epochs[i].loss.total);
    EXPECT_EQ(a.epochs[i].loss.kl_z, b.epochs[i].loss.kl_z);
  }
  EXPECT_TRUE(wa == wb);
  nlohmann::json line = epoch_log_json(a.epochs[0]);
  for (const char* k : {"epoch", "recon_q", "recon_a", "kl_z", "kl_y", "total"}) EXPECT_TRUE(line.contains(k));
}

TEST(Train, LossDecreasesOnOverfitSet) {
  auto data = test_support::toy_data(8, 2);
  Network net(test_support::tiny_config(data.vocab, 16, 4), 4);
  TrainConfig c = small_train(200, 8);
  c.dropout = 0.0;
  TrainResult r = train(c, data.examples, net);
  ASSERT_EQ(r.epochs.size(), 200u);
  double first = 0, last = 0;
  for (int i = 0; i < 10; ++i) {
    first += r.epochs[static_cast<std::size_t>(i)].loss.total;
    last += r.epochs[r.epochs.size() - 1 - static_cast<std::size_t>(i)].loss.total;
  }
  EXPECT_LT(last, 0.5 * first);
}

TEST(Train, NanHaltsAndKeepsEarlierCheckpoints) {
  auto data = test_support::toy_data(8, 2);
  Network net(test_support::tiny_config(data.vocab), 4);
  auto dir = fresh_dir("nan");
  TrainHooks hooks;
  hooks.checkpoint_dir = dir;
  hooks.on_epoch = [&](const EpochLog& e) {
    if (e.epoch == 1) net.params().at("ae.bos").value(0, 0) = std::numeric_limits<double>::infinity();
  };
  EXPECT_THROW(train(small_train(3), data.examples, net, hooks), NumericalError);
  EXPECT_TRUE(std::filesystem::exists(checkpoint_path(dir, 1)));
  EXPECT_FALSE(std::filesystem::exists(checkpoint_path(dir, 2)));
  Network good = Network::load(checkpoint_path(dir, 1));
  EXPECT_TRUE(good.params().at("ae.bos").value.allFinite());
}

TEST(Optimizer, ClippingAndAdamStep) {
  auto data = test_support::toy_data(4, 2);
  Network net(test_support::tiny_config(data.vocab), 4);
  auto& store = net.params();
  store.zero_grad();
  store.at("qg.out.b").grad.setConstant(10.0);
  double before = clip_gradients(store, 5.0);
  EXPECT_GT(before, 5.0);
  EXPECT_NEAR(store.grad_norm(), 5.0, 1e-9);
  Matrix w0 = store.at("qg.out.b").value;
  Matrix frozen = store.at("word_emb").value;
  Adam adam(0.01);
  adam.step(store);
  // First Adam step moves each coordinate by lr in the gradient's direction.
  Matrix delta = store.at("qg.out.b").value - w0;
  EXPECT_NEAR(delta.maxCoeff(), -0.01, 1e-6);
  EXPECT_NEAR(delta.minCoeff(), -0.01, 1e-6);
  EXPECT_TRUE(store.at("word_emb").value == frozen);
}
