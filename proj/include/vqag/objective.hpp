#pragma once

// Training objective (negated KL-controlled lower bound), Adam training loop
// and finite-difference gradient verification.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqag/errors.hpp"
#include "vqag/model.hpp"

namespace vqag {

/// Batch-mean loss components. total = -recon_q - recon_a + penalty_z + penalty_y.
struct LossBreakdown {
  double recon_q = 0.0;
  double recon_a = 0.0;
  double kl_z = 0.0;
  double kl_y = 0.0;
  double penalty_z = 0.0;
  double penalty_y = 0.0;
  double total = 0.0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LossBreakdown, recon_q, recon_a, kl_z, kl_y, penalty_z,
                                   penalty_y, total)

struct TrainConfig {
  double lr = 0.001;
  int batch_size = 32;
  int epochs = 16;
  double dropout = 0.2;
  double C_a = 0.0;
  double C_q = 0.0;
  std::uint64_t seed = 0;
  int latent_dim = 200;
  int hidden = 300;
  double clip_norm = 5.0;  // <= 0 disables clipping
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, lr, batch_size, epochs, dropout, C_a,
                                                C_q, seed, latent_dim, hidden, clip_norm)

inline void validate(const TrainConfig& c) {
  require(c.lr > 0 && c.batch_size > 0 && c.epochs >= 0 && c.latent_dim > 0 && c.hidden > 0,
          "train config: sizes and learning rate must be positive");
  require(c.dropout >= 0.0 && c.dropout < 1.0, "train config: dropout must lie in [0, 1)");
  require(c.C_a >= 0.0 && c.C_q >= 0.0, "train config: capacities must be non-negative");
}

/// How posterior noise and dropout masks are drawn for a batch.
struct NoisePolicy {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  double dropout = 0.0;
  const std::vector<LatentNoise>* fixed = nullptr;  // per-example override (tests)
};

struct BatchLoss {
  Var total;
  LossBreakdown values;
};

/// Builds the batch loss on `g`. KLs are averaged over the batch before the
/// |KL - C| penalty is applied.
inline BatchLoss build_batch_loss(Graph& g, Network& net,
                                  std::span<const TokenizedExample* const> batch, double C_a,
                                  double C_q, const NoisePolicy& noise) {
  require(!batch.empty(), "elbo_loss: empty batch");
  const double n = static_cast<double>(batch.size());
  std::vector<Var> rq, ra, kz, ky;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TokenizedExample& ex = *batch[i];
    auto rng = example_stream(noise.seed, noise.step, ex.id);
    LatentNoise eps = noise.fixed ? (*noise.fixed)[i] : draw_noise(net.config().latent, rng);
    Pass p{g, net, noise.dropout, &rng};
    ExampleTerms t;
    try {
      t = example_terms(p, ex, eps);
    } catch (const NumericalError& e) {
      std::string culprit = net.params().first_non_finite();
      throw NumericalError(ex.id + ": " + e.what() +
                           (culprit.empty() ? "" : "; offending tensor: " + culprit));
    }
    rq.push_back(t.recon_q);
    ra.push_back(t.recon_a);
    kz.push_back(t.kl_z);
    ky.push_back(t.kl_y);
  }
  Var recon_q = g.scale(g.add_all(rq), 1.0 / n);
  Var recon_a = g.scale(g.add_all(ra), 1.0 / n);
  Var kl_z = g.scale(g.add_all(kz), 1.0 / n);
  Var kl_y = g.scale(g.add_all(ky), 1.0 / n);
  Var pen_z = kl_control_penalty(g, kl_z, C_a);
  Var pen_y = kl_control_penalty(g, kl_y, C_q);
  Var total = g.add(g.sub(pen_z, g.add(recon_q, recon_a)), pen_y);
  BatchLoss out;
  out.total = total;
  out.values = {g.scalar(recon_q), g.scalar(recon_a), g.scalar(kl_z), g.scalar(kl_y),
                g.scalar(pen_z),   g.scalar(pen_y),   g.scalar(total)};
  if (!std::isfinite(out.values.total)) {
    std::string culprit = net.params().first_non_finite();
    throw NumericalError("non-finite loss (recon_q=" + std::to_string(out.values.recon_q) +
                         ", recon_a=" + std::to_string(out.values.recon_a) +
                         ", kl_z=" + std::to_string(out.values.kl_z) +
                         ", kl_y=" + std::to_string(out.values.kl_y) + ")" +
                         (culprit.empty() ? "" : "; offending tensor: " + culprit));
  }
  return out;
}

/// Evaluates the loss without recording gradients.
inline LossBreakdown elbo_loss(Network& net, std::span<const TokenizedExample* const> batch,
                               double C_a, double C_q, const NoisePolicy& noise) {
  Graph g(false);
  return build_batch_loss(g, net, batch, C_a, C_q, noise).values;
}

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(ParameterStore& store) {
    if (m_.empty()) {
      for (const auto& e : store.entries()) {
        m_.push_back(Matrix::Zero(e.tensor.value.rows(), e.tensor.value.cols()));
        v_.push_back(Matrix::Zero(e.tensor.value.rows(), e.tensor.value.cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    auto& entries = store.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      Tensor& t = entries[i].tensor;
      if (!t.trainable) continue;
      m_[i] = b1_ * m_[i] + (1.0 - b1_) * t.grad;
      v_[i] = b2_ * v_[i] + (1.0 - b2_) * t.grad.cwiseProduct(t.grad);
      t.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
    store.bump_version();
  }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Scales all trainable gradients so their global norm is at most `max_norm`.
inline double clip_gradients(ParameterStore& store, double max_norm) {
  double norm = store.grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    double k = max_norm / norm;
    for (auto& e : store.entries())
      if (e.tensor.trainable) e.tensor.grad *= k;
  }
  return norm;
}

struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<std::filesystem::path> checkpoints;
};

struct TrainHooks {
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::function<void(const EpochLog&)> on_epoch;
};

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%02d.ckpt", epoch);
  return dir / name;
}

/// Adam on shuffled mini-batches. Writes one checkpoint per epoch (or the
/// initial parameters when epochs == 0). A non-finite loss or gradient stops
/// training with NumericalError; checkpoints already written are kept.
inline TrainResult train(const TrainConfig& cfg, std::span<const TokenizedExample> dataset,
                         Network& net, const TrainHooks& hooks = {}) {
  validate(cfg);
  TrainResult result;
  if (!hooks.checkpoint_dir.empty()) std::filesystem::create_directories(hooks.checkpoint_dir);
  if (cfg.epochs == 0) {
    if (!hooks.checkpoint_dir.empty()) {
      auto path = checkpoint_path(hooks.checkpoint_dir, 0);
      net.save(path);
      result.checkpoints.push_back(path);
    }
    return result;
  }
  require(!dataset.empty(), "train: empty dataset");
  Adam adam(cfg.lr);
  std::mt19937_64 shuffle_rng(mix64(cfg.seed ^ 0xA5A5A5A5ULL));
  std::vector<std::size_t> order(dataset.size());
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    LossBreakdown sum;
    double seen = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const TokenizedExample*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size)); ++i)
        batch.push_back(&dataset[order[i]]);
      net.params().zero_grad();
      Graph g(true);
      NoisePolicy noise{cfg.seed, step, cfg.dropout, nullptr};
      BatchLoss bl = build_batch_loss(g, net, batch, cfg.C_a, cfg.C_q, noise);
      g.backward(bl.total);
      std::string bad = net.params().first_non_finite();
      if (!bad.empty()) throw NumericalError("non-finite gradient at step " + std::to_string(step) + " in " + bad);
      clip_gradients(net.params(), cfg.clip_norm);
      adam.step(net.params());
      ++step;
      double w = static_cast<double>(batch.size());
      sum.recon_q += w * bl.values.recon_q;
      sum.recon_a += w * bl.values.recon_a;
      sum.kl_z += w * bl.values.kl_z;
      sum.kl_y += w * bl.values.kl_y;
      sum.penalty_z += w * bl.values.penalty_z;
      sum.penalty_y += w * bl.values.penalty_y;
      sum.total += w * bl.values.total;
      seen += w;
    }
    EpochLog log;
    log.epoch = epoch;
    log.loss = {sum.recon_q / seen, sum.recon_a / seen, sum.kl_z / seen,   sum.kl_y / seen,
                sum.penalty_z / seen, sum.penalty_y / seen, sum.total / seen};
    result.epochs.push_back(log);
    if (!hooks.checkpoint_dir.empty()) {
      auto path = checkpoint_path(hooks.checkpoint_dir, epoch);
      net.save(path);
      result.checkpoints.push_back(path);
    }
    if (hooks.on_epoch) hooks.on_epoch(log);
  }
  return result;
}

/// Training-log line: {epoch, recon_q, recon_a, kl_z, kl_y, total}.
inline nlohmann::json epoch_log_json(const EpochLog& e) {
  return {{"epoch", e.epoch},     {"recon_q", e.loss.recon_q}, {"recon_a", e.loss.recon_a},
          {"kl_z", e.loss.kl_z},  {"kl_y", e.loss.kl_y},       {"total", e.loss.total}};
}

// ---- gradient verification -------------------------------------------------

struct TensorGradError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::vector<TensorGradError> tensors;
  bool skipped_at_kink = false;
};

struct GradCheckOptions {
  double C_a = 3.0;
  double C_q = 3.0;
  double step = 1e-5;
  double tolerance = 1e-4;
  double abs_floor = 1e-5;  // denominators below this are floored
  std::size_t sample_threshold = 10000;
  std::size_t samples_per_tensor = 200;
  std::uint64_t seed = 0;
};

/// Relative error with a floor on the denominator.
inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares backprop against central differences on every trainable tensor
/// (the frozen word vectors are excluded). Dropout is off and the posterior
/// noise is fixed. When either |KL - C| is within 1e-3 of the kink the check
/// is skipped and reported as such.
inline GradCheckReport gradient_check(Network& net, std::span<const TokenizedExample* const> batch,
                                      const GradCheckOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  std::vector<LatentNoise> fixed;
  for (std::size_t i = 0; i < batch.size(); ++i) fixed.push_back(draw_noise(net.config().latent, rng));
  NoisePolicy noise{opt.seed, 0, 0.0, &fixed};

  GradCheckReport report;
  net.params().zero_grad();
  {
    Graph g(true);
    BatchLoss bl = build_batch_loss(g, net, batch, opt.C_a, opt.C_q, noise);
    if (bl.values.penalty_z < 1e-3 || bl.values.penalty_y < 1e-3) {
      report.skipped_at_kink = true;
      return report;
    }
    g.backward(bl.total);
  }
  auto loss_at = [&]() { return elbo_loss(net, batch, opt.C_a, opt.C_q, noise).total; };

  for (auto& e : net.params().entries()) {
    Tensor& t = e.tensor;
    if (!t.trainable) continue;
    TensorGradError te;
    te.name = e.name;
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(t.value.size()));
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() >= opt.sample_threshold) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opt.samples_per_tensor);
    }
    for (Eigen::Index idx : coords) {
      double& x = t.value.data()[idx];
      const double orig = x;
      x = orig + opt.step;
      double up = loss_at();
      x = orig - opt.step;
      double down = loss_at();
      x = orig;
      double numeric = (up - down) / (2.0 * opt.step);
      double analytic = t.grad.data()[idx];
      te.max_rel_error = std::max(te.max_rel_error, relative_error(analytic, numeric, opt.abs_floor));
      ++te.checked;
    }
    if (te.max_rel_error > report.max_rel_error) {
      report.max_rel_error = te.max_rel_error;
      report.worst_tensor = te.name;
    }
    report.tensors.push_back(te);
  }
  return report;
}

}  // namespace vqag
