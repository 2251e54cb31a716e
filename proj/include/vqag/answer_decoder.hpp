#pragma once

// Two-step pointer network: p(a|z,c) = p(start|z,c) * p(end|start,z,c).
// Step 1 reads the learned start symbol, step 2 reads H^C at the committed
// start. The end step is restricted to start <= end < start + max_answer_len.

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "vqag/corpus/example.hpp"
#include "vqag/errors.hpp"
#include "vqag/neural_core.hpp"

namespace vqag {

struct AnswerSpan {
  int start = 0;
  int end = 0;
  double log_prob = 0.0;
};

enum class DecodeMode { greedy, ancestral };

/// Context memory shared by both pointer steps. `keys` caches H^C W_memory^T.
struct PointerMemory {
  Var H;
  Var keys;
  std::vector<bool> mask;  // empty: every position live
  int length = 0;
};

inline PointerMemory make_pointer_memory(Pass& p, Var H_C, std::vector<bool> mask = {}) {
  Graph& g = p.g;
  PointerMemory m;
  m.H = H_C;
  m.length = static_cast<int>(g.rows(H_C));
  m.keys = g.matmul(H_C, g.transpose(p.P(p.w().ae_att.W_memory)));
  m.mask = std::move(mask);
  return m;
}

/// h_0 = W z + b, memory cell zero.
inline LstmState init_state(Pass& p, Var z) {
  Graph& g = p.g;
  Var h0 = g.add(g.matmul(p.P(p.w().ae_init.W), z), p.P(p.w().ae_init.b));
  return {h0, g.constant(Matrix::Zero(g.rows(h0), 1))};
}

struct PointerStep {
  Var logits;
  Var probs;
  Var log_probs;
  LstmState state;
};

/// Additive attention over the memory rows: u_j = v^T tanh(W_m H_j + W_s h + b).
inline Var attention_logits(Pass& p, const AttentionWeights& aw, Var keys, Var state_h) {
  Graph& g = p.g;
  Var q = g.add(g.matmul(p.P(aw.W_state), state_h), p.P(aw.b));
  Var act = g.tanh(g.add_row(keys, q));
  return g.matmul(act, p.P(aw.v));
}

inline PointerStep pointer_step(Pass& p, LstmState state, Var input, const PointerMemory& mem,
                                const std::vector<bool>& mask) {
  Graph& g = p.g;
  PointerStep out;
  out.state = lstm_step(p, p.w().ae_lstm, state, input);
  Var h = p.drop(out.state.h);
  out.logits = attention_logits(p, p.w().ae_att, mem.keys, h);
  out.probs = g.softmax(out.logits, mask);
  out.log_probs = g.log_softmax(out.logits, mask);
  return out;
}

inline std::vector<bool> combine_masks(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  std::vector<bool> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] && b[i];
  return out;
}

/// Live end positions for a committed start.
inline std::vector<bool> end_mask(int length, int start, int max_answer_len,
                                  const std::vector<bool>& base = {}) {
  std::vector<bool> m(static_cast<std::size_t>(length), false);
  for (int j = start; j < length && j < start + max_answer_len; ++j) m[static_cast<std::size_t>(j)] = true;
  return combine_masks(base, m);
}

inline PointerStep start_step(Pass& p, Var z, const PointerMemory& mem) {
  LstmState s0 = init_state(p, z);
  return pointer_step(p, s0, p.P(p.w().ae_bos), mem, mem.mask);
}

inline PointerStep end_step(Pass& p, const PointerStep& first, int start, const PointerMemory& mem) {
  Var input = p.g.row(mem.H, start);
  return pointer_step(p, first.state, input, mem,
                      end_mask(mem.length, start, p.cfg().max_answer_len, mem.mask));
}

/// log p(start) + log p(end | start), teacher-forced on the gold start.
inline Var answer_log_prob(Pass& p, const PointerMemory& mem, Var z, AnswerSpanIndex span) {
  require(span.start >= 0 && span.start <= span.end && span.end < mem.length,
          "answer_log_prob: invalid span");
  Graph& g = p.g;
  PointerStep s1 = start_step(p, z, mem);
  PointerStep s2 = end_step(p, s1, span.start, mem);
  Var lp = g.add(g.pick(s1.log_probs, span.start), g.pick(s2.log_probs, span.end));
  if (!std::isfinite(g.scalar(lp)))
    throw ContractViolation("answer_log_prob: span has zero probability under the masks");
  return lp;
}

inline Var answer_log_prob(Pass& p, Var H_C, Var z, AnswerSpanIndex span) {
  PointerMemory mem = make_pointer_memory(p, H_C);
  return answer_log_prob(p, mem, z, span);
}

inline int choose(const Matrix& probs, DecodeMode mode, std::mt19937_64* rng) {
  if (mode == DecodeMode::greedy || !rng) {
    Eigen::Index best = 0;
    probs.col(0).maxCoeff(&best);
    return static_cast<int>(best);
  }
  std::discrete_distribution<int> d(probs.data(), probs.data() + probs.rows());
  return d(*rng);
}

/// Decodes one span. Greedy takes the argmax at each step; ancestral draws
/// from each step's categorical distribution.
inline AnswerSpan sample_answer(Pass& p, const PointerMemory& mem, Var z, DecodeMode mode,
                                std::mt19937_64* rng) {
  Graph& g = p.g;
  PointerStep s1 = start_step(p, z, mem);
  int start = choose(g.value(s1.probs), mode, rng);
  PointerStep s2 = end_step(p, s1, start, mem);
  int end = choose(g.value(s2.probs), mode, rng);
  AnswerSpan out;
  out.start = start;
  out.end = end;
  out.log_prob = g.value(s1.log_probs)(start, 0) + g.value(s2.log_probs)(end, 0);
  return out;
}

}  // namespace vqag
