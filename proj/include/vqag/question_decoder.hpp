#pragma once

// LSTM question decoder with additive attention over H^CA, a copy pointer
// over the context and a generation gate p_s:
//   p(w) = p_s * P_vocab(w) + (1 - p_s) * sum_{j : c_j = w} P_copy(j).

#include <cmath>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "vqag/answer_decoder.hpp"
#include "vqag/corpus/example.hpp"
#include "vqag/corpus/vocabulary.hpp"
#include "vqag/errors.hpp"
#include "vqag/neural_core.hpp"

namespace vqag {

/// Maps context positions and target tokens into one extended id space:
/// vocabulary ids first, then one extra id per distinct OOV context word.
class CopyIndex {
 public:
  CopyIndex() = default;

  CopyIndex(const EncodedText& context, int vocab_size) : vocab_size_(vocab_size) {
    for (int j = 0; j < context.size(); ++j) {
      int id = context.ids[static_cast<std::size_t>(j)];
      if (id != Vocabulary::kUnk) {
        context_keys_.push_back(id);
        continue;
      }
      const std::string& w = context.words[static_cast<std::size_t>(j)];
      auto [it, inserted] = oov_.emplace(w, vocab_size_ + static_cast<int>(oov_words_.size()));
      if (inserted) oov_words_.push_back(w);
      context_keys_.push_back(it->second);
    }
  }

  int vocab_size() const { return vocab_size_; }
  int extended_size() const { return vocab_size_ + static_cast<int>(oov_words_.size()); }
  const std::vector<int>& context_keys() const { return context_keys_; }

  /// In-vocabulary tokens keep their id; OOV tokens found in the context get
  /// their copy key; anything else scores as UNK.
  int key_for(const std::string& surface, int id) const {
    if (id != Vocabulary::kUnk) return id;
    auto it = oov_.find(surface);
    return it == oov_.end() ? Vocabulary::kUnk : it->second;
  }

  std::vector<int> positions_of(int key) const {
    std::vector<int> out;
    for (int j = 0; j < static_cast<int>(context_keys_.size()); ++j)
      if (context_keys_[static_cast<std::size_t>(j)] == key) out.push_back(j);
    return out;
  }

  /// Decoder input id for an extended key.
  int input_id(int key) const { return key < vocab_size_ ? key : Vocabulary::kUnk; }

  std::string surface(int key, const Vocabulary& vocab) const {
    if (key < vocab_size_) return vocab.word(key);
    return oov_words_.at(static_cast<std::size_t>(key - vocab_size_));
  }

 private:
  int vocab_size_ = 0;
  std::vector<int> context_keys_;
  std::vector<std::string> oov_words_;
  std::unordered_map<std::string, int> oov_;
};

struct QuestionMemory {
  Var H;
  Var att_keys;
  Var copy_keys;
  std::vector<bool> mask;
};

inline QuestionMemory make_question_memory(Pass& p, Var H_CA, std::vector<bool> mask = {}) {
  Graph& g = p.g;
  QuestionMemory m;
  m.H = H_CA;
  m.att_keys = g.matmul(H_CA, g.transpose(p.P(p.w().qg_att.W_memory)));
  m.copy_keys = g.matmul(H_CA, g.transpose(p.P(p.w().qg_copy.W_memory)));
  m.mask = std::move(mask);
  return m;
}

/// h_0 = W y + b, memory cell zero.
inline LstmState init_question_state(Pass& p, Var y) {
  Graph& g = p.g;
  Var h0 = g.add(g.matmul(p.P(p.w().qg_init.W), y), p.P(p.w().qg_init.b));
  return {h0, g.constant(Matrix::Zero(g.rows(h0), 1))};
}

struct DecoderStep {
  Var p_vocab;
  Var p_copy;
  Var p_s;
  LstmState state;
};

/// Plain values of one decoder step.
struct DecoderStepOutput {
  Vector P_vocab;
  Vector P_copy;
  double p_s = 0.5;
};

inline DecoderStepOutput step_values(const Graph& g, const DecoderStep& s) {
  return {g.value(s.p_vocab).col(0), g.value(s.p_copy).col(0), g.scalar(s.p_s)};
}

inline DecoderStep decode_step(Pass& p, LstmState state, int prev_token_id,
                               const QuestionMemory& mem) {
  Graph& g = p.g;
  const Weights& w = p.w();
  std::array<int, 1> prev{prev_token_id};
  Var x = g.transpose(g.lookup(*w.word_emb, prev));
  DecoderStep out;
  out.state = lstm_step(p, w.qg_lstm, state, x);
  Var h = p.drop(out.state.h);
  Var att = g.softmax(attention_logits(p, w.qg_att, mem.att_keys, h), mem.mask);
  Var ctx = p.drop(g.matmul(g.transpose(mem.H), att));
  Var merged = g.tanh(g.add(g.matmul(p.P(w.qg_merge.W), g.concat_rows({ctx, h})),
                            p.P(w.qg_merge.b)));
  Var logits = g.add(g.matmul(p.P(w.word_emb), merged), p.P(w.qg_out_bias));
  out.p_vocab = g.softmax(logits);
  out.p_copy = g.softmax(attention_logits(p, w.qg_copy, mem.copy_keys, h), mem.mask);
  out.p_s = g.sigmoid(g.matmul(p.P(w.qg_gate), h));
  return out;
}

inline double mixture_token_prob(const DecoderStepOutput& out, int key, const CopyIndex& copy) {
  double vocab = key < copy.vocab_size() ? out.P_vocab(key) : 0.0;
  double copied = 0.0;
  for (int j : copy.positions_of(key)) copied += out.P_copy(j);
  return out.p_s * vocab + (1.0 - out.p_s) * copied;
}

inline Var mixture_token_prob(Graph& g, const DecoderStep& s, int key, const CopyIndex& copy) {
  std::vector<int> pos = copy.positions_of(key);
  Var copied = g.mul(g.one_minus(s.p_s), g.sum_at(s.p_copy, pos));
  if (key >= copy.vocab_size()) return copied;
  return g.add(g.mul(s.p_s, g.pick(s.p_vocab, key)), copied);
}

/// Extended distribution over vocabulary ids followed by OOV copy keys.
inline Vector extended_distribution(const DecoderStepOutput& out, const CopyIndex& copy) {
  Vector ext = Vector::Zero(copy.extended_size());
  ext.head(copy.vocab_size()) = out.p_s * out.P_vocab;
  const auto& keys = copy.context_keys();
  for (std::size_t j = 0; j < keys.size(); ++j)
    ext(keys[j]) += (1.0 - out.p_s) * out.P_copy(static_cast<Eigen::Index>(j));
  return ext;
}

/// Teacher-forced sum of log mixture probabilities over q_1..q_n and EOS.
/// `question_ids` is bracketed by BOS/EOS; `words` holds the n surfaces.
inline Var question_log_prob(Pass& p, const QuestionMemory& mem, Var y,
                             const std::vector<int>& question_ids,
                             const std::vector<std::string>& words, const CopyIndex& copy) {
  require(question_ids.size() >= 2 && question_ids.front() == Vocabulary::kBos &&
              question_ids.back() == Vocabulary::kEos,
          "question_log_prob: question must be bracketed by BOS/EOS");
  require(words.size() + 2 == question_ids.size(), "question_log_prob: surface count mismatch");
  Graph& g = p.g;
  LstmState s = init_question_state(p, y);
  std::vector<Var> terms;
  for (std::size_t t = 1; t < question_ids.size(); ++t) {
    DecoderStep step = decode_step(p, s, question_ids[t - 1], mem);
    s = step.state;
    int key = t + 1 < question_ids.size() ? copy.key_for(words[t - 1], question_ids[t])
                                          : Vocabulary::kEos;
    Var prob = mixture_token_prob(g, step, key, copy);
    if (!(g.scalar(prob) > 0.0))
      throw NumericalError("question_log_prob: step " + std::to_string(t) +
                           " has non-positive probability");
    terms.push_back(g.log(prob));
  }
  return g.add_all(terms);
}

struct GeneratedQuestion {
  std::vector<int> keys;  // extended ids, EOS excluded
  double log_prob = 0.0;
};

inline GeneratedQuestion generate_question(Pass& p, const QuestionMemory& mem, Var y,
                                           const CopyIndex& copy, DecodeMode mode, int max_len,
                                           std::mt19937_64* rng) {
  Graph& g = p.g;
  GeneratedQuestion out;
  LstmState s = init_question_state(p, y);
  int prev = Vocabulary::kBos;
  while (static_cast<int>(out.keys.size()) < max_len) {
    DecoderStep step = decode_step(p, s, prev, mem);
    s = step.state;
    Vector ext = extended_distribution(step_values(g, step), copy);
    int key = choose(ext, mode, rng);
    out.log_prob += std::log(ext(key));
    if (key == Vocabulary::kEos) break;
    out.keys.push_back(key);
    prev = copy.input_id(key);
  }
  return out;
}

inline std::vector<std::string> question_words(const GeneratedQuestion& q, const CopyIndex& copy,
                                               const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int k : q.keys) out.push_back(copy.surface(k, vocab));
  return out;
}

}  // namespace vqag
