#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>

#include "vqag/autodiff.hpp"
#include "vqag/params.hpp"

namespace vqag {

struct LstmWeights {
  Tensor* W = nullptr;  // 4h x (input + h), gate order i, f, g, o
  Tensor* b = nullptr;  // 4h x 1
};

struct AttentionWeights {
  Tensor* W_state = nullptr;   // a x state_dim
  Tensor* W_memory = nullptr;  // a x memory_dim
  Tensor* b = nullptr;         // a x 1
  Tensor* v = nullptr;         // a x 1
};

struct LinearWeights {
  Tensor* W = nullptr;
  Tensor* b = nullptr;  // may be null
};

/// Typed view over the parameter store.
struct Weights {
  Tensor* word_emb = nullptr;
  Tensor* char_emb = nullptr;
  LinearWeights char_cnn;
  LstmWeights context_fw, context_bw;
  LstmWeights question_fw, question_bw;
  LstmWeights answer_fw, answer_bw;
  LstmWeights aware_fw, aware_bw;
  LinearWeights prior_z, post_z, prior_y, post_y;
  // answer extraction pointer decoder
  LinearWeights ae_init;
  Tensor* ae_bos = nullptr;
  LstmWeights ae_lstm;
  AttentionWeights ae_att;
  // question decoder
  LinearWeights qg_init;
  LstmWeights qg_lstm;
  AttentionWeights qg_att;
  LinearWeights qg_merge;
  Tensor* qg_out_bias = nullptr;
  AttentionWeights qg_copy;
  Tensor* qg_gate = nullptr;  // 1 x h, no bias
};

/// Parameters of the full model plus typed handles into them.
class Network {
 public:
  Network() = default;

  Network(const ModelConfig& cfg, std::uint64_t seed) : config_(cfg) {
    layout();
    initialize(seed);
  }

  Network(const Network& other) : config_(other.config_), store_(other.store_) { bind(); }
  Network& operator=(const Network& other) {
    if (this != &other) {
      config_ = other.config_;
      store_ = other.store_;
      bind();
    }
    return *this;
  }
  Network(Network&& other) noexcept : config_(other.config_), store_(std::move(other.store_)) {
    bind();
  }
  Network& operator=(Network&& other) noexcept {
    config_ = other.config_;
    store_ = std::move(other.store_);
    bind();
    return *this;
  }

  const ModelConfig& config() const { return config_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  const Weights& w() const { return w_; }

  void save(const std::filesystem::path& path) const { save_checkpoint(path, config_, store_); }

  static Network load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint " + path.string());
    auto header = read_checkpoint_header(in, path.string());
    Network n;
    n.config_ = header.config;
    n.layout();
    read_checkpoint_tensors(in, path.string(), n.store_);
    n.store_.set_version(header.version);
    return n;
  }

  /// Replaces the frozen word vectors (rows follow vocabulary ids).
  void set_word_vectors(const Matrix& vectors) {
    Tensor& t = store_.at("word_emb");
    require(vectors.rows() == t.value.rows() && vectors.cols() == t.value.cols(),
            "word vector matrix has the wrong shape");
    t.value = vectors;
  }

 private:
  void layout() {
    const ModelConfig& c = config_;
    require(c.vocab_size > 0 && c.char_vocab_size > 0, "model config needs vocabulary sizes");
    const int h = c.hidden, d2 = 2 * h, e = c.embed_dim(), k = c.latent;
    const Role G = Role::generative, I = Role::inference;
    auto& s = store_;
    s.add("word_emb", c.vocab_size, c.word_dim, G, /*trainable=*/false);
    s.add("char_emb", c.char_vocab_size, c.char_dim, G);
    s.add("char_cnn.W", c.char_filters, c.char_window * c.char_dim, G);
    s.add("char_cnn.b", c.char_filters, 1, G);
    auto lstm = [&](const std::string& name, int in, Role r) {
      s.add(name + ".W", 4 * h, in + h, r);
      s.add(name + ".b", 4 * h, 1, r);
    };
    lstm("enc.context.fw", e, G);
    lstm("enc.context.bw", e, G);
    lstm("enc.question.fw", e, I);
    lstm("enc.question.bw", e, I);
    lstm("enc.answer.fw", e, I);
    lstm("enc.answer.bw", e, I);
    lstm("enc.aware.fw", d2 + 2, G);
    lstm("enc.aware.bw", d2 + 2, G);
    auto linear = [&](const std::string& name, int out, int in, Role r, bool bias = true) {
      s.add(name + ".W", out, in, r);
      if (bias) s.add(name + ".b", out, 1, r);
    };
    linear("latent.prior_z", 2 * k, d2, G);
    linear("latent.post_z", 2 * k, 2 * d2, I);
    linear("latent.prior_y", 2 * k, d2, G);
    linear("latent.post_y", 2 * k, 2 * d2, I);
    linear("ae.init", h, k, G);
    s.add("ae.bos", d2, 1, G);
    lstm("ae.lstm", d2, G);
    auto attention = [&](const std::string& name, int state, int memory) {
      s.add(name + ".W_state", h, state, G);
      s.add(name + ".W_memory", h, memory, G);
      s.add(name + ".b", h, 1, G);
      s.add(name + ".v", h, 1, G);
    };
    attention("ae.att", h, d2);
    linear("qg.init", h, k, G);
    lstm("qg.lstm", c.word_dim, G);
    attention("qg.att", h, d2);
    linear("qg.merge", c.word_dim, d2 + h, G);
    s.add("qg.out.b", c.vocab_size, 1, G);
    attention("qg.copy", h, d2);
    s.add("qg.gate.W", 1, h, G);
    bind();
  }

  void bind() {
    if (store_.entries().empty()) return;
    auto& s = store_;
    auto T = [&](const std::string& n) { return &s.at(n); };
    auto L = [&](const std::string& n) { return LstmWeights{T(n + ".W"), T(n + ".b")}; };
    auto A = [&](const std::string& n) {
      return AttentionWeights{T(n + ".W_state"), T(n + ".W_memory"), T(n + ".b"), T(n + ".v")};
    };
    auto Lin = [&](const std::string& n) {
      return LinearWeights{T(n + ".W"), s.contains(n + ".b") ? T(n + ".b") : nullptr};
    };
    w_.word_emb = T("word_emb");
    w_.char_emb = T("char_emb");
    w_.char_cnn = Lin("char_cnn");
    w_.context_fw = L("enc.context.fw");
    w_.context_bw = L("enc.context.bw");
    w_.question_fw = L("enc.question.fw");
    w_.question_bw = L("enc.question.bw");
    w_.answer_fw = L("enc.answer.fw");
    w_.answer_bw = L("enc.answer.bw");
    w_.aware_fw = L("enc.aware.fw");
    w_.aware_bw = L("enc.aware.bw");
    w_.prior_z = Lin("latent.prior_z");
    w_.post_z = Lin("latent.post_z");
    w_.prior_y = Lin("latent.prior_y");
    w_.post_y = Lin("latent.post_y");
    w_.ae_init = Lin("ae.init");
    w_.ae_bos = T("ae.bos");
    w_.ae_lstm = L("ae.lstm");
    w_.ae_att = A("ae.att");
    w_.qg_init = Lin("qg.init");
    w_.qg_lstm = L("qg.lstm");
    w_.qg_att = A("qg.att");
    w_.qg_merge = Lin("qg.merge");
    w_.qg_out_bias = T("qg.out.b");
    w_.qg_copy = A("qg.copy");
    w_.qg_gate = T("qg.gate.W");
  }

  /// Xavier for every trainable matrix and vector, zero biases, and standard
  /// random normals for the frozen word vectors.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& e : store_.entries()) {
      Tensor& t = e.tensor;
      const std::string& n = e.name;
      bool is_bias = n.size() >= 2 && n.compare(n.size() - 2, 2, ".b") == 0;
      if (n == "word_emb") {
        std::normal_distribution<double> nd(0.0, 1.0);
        for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = nd(rng);
      } else if (is_bias) {
        t.value.setZero();
      } else {
        xavier_init(t, rng, static_cast<int>(t.value.cols()), static_cast<int>(t.value.rows()));
      }
    }
  }

  ModelConfig config_;
  ParameterStore store_;
  Weights w_;
};

/// One forward computation: graph, network and dropout state.
struct Pass {
  Graph& g;
  Network& net;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  Var P(Tensor* t) { return g.param(*t); }
  const ModelConfig& cfg() const { return net.config(); }
  const Weights& w() const { return net.w(); }

  Var drop(Var v) {
    if (dropout > 0.0 && rng) return g.dropout(v, dropout, *rng);
    return v;
  }
};

}  // namespace vqag
