#pragma once

// Embeddings, BiLSTM encoders and the answer-aware context encoder.

#include <span>
#include <vector>

#include "vqag/corpus/example.hpp"
#include "vqag/errors.hpp"
#include "vqag/network.hpp"

namespace vqag {

struct LstmState {
  Var h;
  Var c;
};

inline LstmState lstm_step(Pass& p, const LstmWeights& lw, LstmState s, Var x) {
  Graph& g = p.g;
  const Eigen::Index h = g.rows(s.h);
  Var gates = g.add(g.matmul(p.P(lw.W), g.concat_rows({x, s.h})), p.P(lw.b));
  Var i = g.sigmoid(g.slice_rows(gates, 0, h));
  Var f = g.sigmoid(g.slice_rows(gates, h, h));
  Var cand = g.tanh(g.slice_rows(gates, 2 * h, h));
  Var o = g.sigmoid(g.slice_rows(gates, 3 * h, h));
  Var c = g.add(g.mul(f, s.c), g.mul(i, cand));
  return {g.mul(o, g.tanh(c)), c};
}

inline LstmState zero_state(Graph& g, int hidden) {
  Var z = g.constant(Matrix::Zero(hidden, 1));
  return {z, z};
}

/// H: per-step concatenated states (L x 2h); h: [last forward ; last backward].
struct EncodedSequence {
  Var H;
  Var h;
};

/// Word vector concatenated with the max-pooled character CNN feature,
/// one row per token: L x (word_dim + char_filters).
inline Var embed(Pass& p, std::span<const int> token_ids, std::span<const int> char_ids) {
  const ModelConfig& c = p.cfg();
  const auto L = static_cast<Eigen::Index>(token_ids.size());
  require(L > 0, "embed: empty sequence");
  require(static_cast<Eigen::Index>(char_ids.size()) == L * c.word_len,
          "embed: char id count does not match word_len");
  Graph& g = p.g;
  Var words = g.lookup(*p.w().word_emb, token_ids);
  Var chars = g.lookup(*p.w().char_emb, char_ids);
  Var pooled = g.char_conv_maxpool(chars, p.P(p.w().char_cnn.W), p.P(p.w().char_cnn.b), L,
                                   c.word_len, c.char_window);
  return g.concat_cols({words, g.tanh(pooled)});
}

inline Var embed(Pass& p, const EncodedText& text) { return embed(p, text.ids, text.char_ids); }

/// Runs forward and backward LSTMs over the rows of `inputs`.
inline EncodedSequence bilstm(Pass& p, const LstmWeights& fw, const LstmWeights& bw, Var inputs) {
  Graph& g = p.g;
  const Eigen::Index L = g.rows(inputs);
  require(L > 0, "bilstm: empty sequence");
  const int h = p.cfg().hidden;
  std::vector<Var> xs;
  xs.reserve(static_cast<std::size_t>(L));
  for (Eigen::Index j = 0; j < L; ++j) xs.push_back(g.row(inputs, j));
  std::vector<Var> f(static_cast<std::size_t>(L)), b(static_cast<std::size_t>(L));
  LstmState s = zero_state(g, h);
  for (Eigen::Index j = 0; j < L; ++j) {
    s = lstm_step(p, fw, s, xs[static_cast<std::size_t>(j)]);
    f[static_cast<std::size_t>(j)] = s.h;
  }
  s = zero_state(g, h);
  for (Eigen::Index j = L - 1; j >= 0; --j) {
    s = lstm_step(p, bw, s, xs[static_cast<std::size_t>(j)]);
    b[static_cast<std::size_t>(j)] = s.h;
  }
  std::vector<Var> rows;
  rows.reserve(static_cast<std::size_t>(L));
  for (std::size_t j = 0; j < f.size(); ++j) rows.push_back(g.concat_rows({f[j], b[j]}));
  Var H = p.drop(g.stack_rows(rows));
  Var last = p.drop(g.concat_rows({f.back(), b.front()}));
  return {H, last};
}

enum class EncoderKind { context, question, answer };

inline EncodedSequence contextual_encode(Pass& p, Var embedded, EncoderKind which) {
  const Weights& w = p.w();
  switch (which) {
    case EncoderKind::context: return bilstm(p, w.context_fw, w.context_bw, embedded);
    case EncoderKind::question: return bilstm(p, w.question_fw, w.question_bw, embedded);
    case EncoderKind::answer: return bilstm(p, w.answer_fw, w.answer_bw, embedded);
  }
  throw ContractViolation("unknown encoder");
}

/// Indicator columns marking the answer start and end rows.
inline Matrix span_indicators(Eigen::Index length, AnswerSpanIndex span) {
  Matrix m = Matrix::Zero(length, 2);
  m(span.start, 0) = 1.0;
  m(span.end, 1) = 1.0;
  return m;
}

/// BiLSTM over rows [H_C_j ; 1{j = start} ; 1{j = end}]; returns H^CA.
inline Var answer_aware_encode(Pass& p, Var H_C, AnswerSpanIndex span) {
  Graph& g = p.g;
  const Eigen::Index L = g.rows(H_C);
  require(span.start >= 0 && span.start <= span.end && span.end < L,
          "answer_aware_encode: invalid span");
  Var inputs = g.concat_cols({H_C, g.constant(span_indicators(L, span))});
  return bilstm(p, p.w().aware_fw, p.w().aware_bw, inputs).H;
}

}  // namespace vqag
