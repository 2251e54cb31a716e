#pragma once

// Answer-extraction overlap scores, BLEU / ROUGE-L recall against a set of
// generated candidates, corpus diversity measures and question types.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqag/corpus/example.hpp"
#include "vqag/corpus/text.hpp"

namespace vqag {

using Tokens = std::vector<std::string>;

// ---- answer extraction -----------------------------------------------------

enum class OverlapSide { precision, recall };

inline int span_length(AnswerSpanIndex s) { return s.end - s.start + 1; }

/// Token overlap divided by |pred| (precision side) or |gold| (recall side).
inline double span_prop_overlap(AnswerSpanIndex pred, AnswerSpanIndex gold, OverlapSide side) {
  int inter = std::max(0, std::min(pred.end, gold.end) - std::max(pred.start, gold.start) + 1);
  int denom = side == OverlapSide::precision ? span_length(pred) : span_length(gold);
  return static_cast<double>(inter) / static_cast<double>(denom);
}

inline double span_exact(AnswerSpanIndex pred, AnswerSpanIndex gold) {
  return pred == gold ? 1.0 : 0.0;
}

struct ContextSpans {
  std::string context_id;
  std::vector<AnswerSpanIndex> preds;
  std::vector<AnswerSpanIndex> golds;
};

struct AEReport {
  double prop_precision = 0.0;
  double prop_recall = 0.0;
  double exact_precision = 0.0;
  double exact_recall = 0.0;
  long long dist = 0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AEReport, prop_precision, prop_recall, exact_precision,
                                   exact_recall, dist)

/// Precision averages, over every predicted span, its best score against the
/// golds of its context; recall averages over gold spans the best score
/// against the predictions. Values are percentages.
inline AEReport ae_scores(std::span<const ContextSpans> contexts) {
  double pp = 0, ep = 0, pr = 0, er = 0;
  std::size_t n_pred = 0, n_gold = 0;
  std::set<std::tuple<std::string, int, int>> distinct;
  for (const auto& c : contexts) {
    for (const auto& p : c.preds) {
      distinct.emplace(c.context_id, p.start, p.end);
      double bp = 0, be = 0;
      for (const auto& g : c.golds) {
        bp = std::max(bp, span_prop_overlap(p, g, OverlapSide::precision));
        be = std::max(be, span_exact(p, g));
      }
      pp += bp;
      ep += be;
      ++n_pred;
    }
    for (const auto& g : c.golds) {
      double bp = 0, be = 0;
      for (const auto& p : c.preds) {
        bp = std::max(bp, span_prop_overlap(p, g, OverlapSide::recall));
        be = std::max(be, span_exact(p, g));
      }
      pr += bp;
      er += be;
      ++n_gold;
    }
  }
  AEReport r;
  if (n_pred) {
    r.prop_precision = 100.0 * pp / static_cast<double>(n_pred);
    r.exact_precision = 100.0 * ep / static_cast<double>(n_pred);
  }
  if (n_gold) {
    r.prop_recall = 100.0 * pr / static_cast<double>(n_gold);
    r.exact_recall = 100.0 * er / static_cast<double>(n_gold);
  }
  r.dist = static_cast<long long>(distinct.size());
  return r;
}

// ---- n-gram helpers ----------------------------------------------------------

inline std::map<Tokens, int> ngram_counts(const Tokens& toks, int n) {
  std::map<Tokens, int> out;
  for (int i = 0; i + n <= static_cast<int>(toks.size()); ++i)
    ++out[Tokens(toks.begin() + i, toks.begin() + i + n)];
  return out;
}

/// Sentence BLEU with uniform weights over orders 1..max_n. Clipping uses the
/// maximum count over references; the brevity penalty uses the reference
/// length closest to the candidate (shorter on ties). Orders above one with
/// no match score 1 / (total + 1); unigram precision is not smoothed.
inline double sentence_bleu(const Tokens& cand, std::span<const Tokens> refs, int max_n) {
  if (cand.empty() || refs.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    auto cc = ngram_counts(cand, n);
    std::map<Tokens, int> best;
    for (const auto& r : refs)
      for (const auto& [g, k] : ngram_counts(r, n)) best[g] = std::max(best[g], k);
    int matched = 0, total = 0;
    for (const auto& [g, k] : cc) {
      total += k;
      auto it = best.find(g);
      if (it != best.end()) matched += std::min(k, it->second);
    }
    double p;
    if (n == 1) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / total;
    } else {
      p = matched == 0 ? 1.0 / (total + 1.0) : static_cast<double>(matched) / total;
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(cand.size());
  double r = static_cast<double>(refs[0].size());
  for (const auto& ref : refs) {
    double len = static_cast<double>(ref.size());
    if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r))
      r = len;
  }
  double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / max_n);
}

inline double sentence_bleu(const Tokens& cand, const Tokens& ref, int max_n) {
  return sentence_bleu(cand, std::span<const Tokens>(&ref, 1), max_n);
}

inline int lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double rouge_l_f1(const Tokens& cand, const Tokens& ref) {
  int l = lcs_length(cand, ref);
  if (l == 0) return 0.0;
  double p = static_cast<double>(l) / cand.size(), r = static_cast<double>(l) / ref.size();
  return 2.0 * p * r / (p + r);
}

// ---- question generation relevance ----------------------------------------------

/// Best smoothed BLEU-n of any candidate against the reference, in percent.
inline double bleu_recall(std::span<const Tokens> candidates, const Tokens& reference, int n) {
  double best = 0.0;
  for (const auto& c : candidates) best = std::max(best, sentence_bleu(c, reference, n));
  return 100.0 * best;
}

inline double rouge_l_recall(std::span<const Tokens> candidates, const Tokens& reference) {
  double best = 0.0;
  for (const auto& c : candidates) best = std::max(best, rouge_l_f1(c, reference));
  return 100.0 * best;
}

/// One reference question and the questions generated for its input.
struct RecallGroup {
  Tokens reference;
  std::vector<Tokens> candidates;
};

inline double corpus_bleu_recall(std::span<const RecallGroup> groups, int n) {
  if (groups.empty()) return 0.0;
  double s = 0.0;
  for (const auto& g : groups) s += bleu_recall(g.candidates, g.reference, n);
  return s / static_cast<double>(groups.size());
}

inline double corpus_rouge_l_recall(std::span<const RecallGroup> groups) {
  if (groups.empty()) return 0.0;
  double s = 0.0;
  for (const auto& g : groups) s += rouge_l_recall(g.candidates, g.reference);
  return s / static_cast<double>(groups.size());
}

// ---- diversity ---------------------------------------------------------------

inline long long token_count(std::span<const Tokens> questions) {
  long long n = 0;
  for (const auto& q : questions) n += static_cast<long long>(q.size());
  return n;
}

/// Number of distinct unigrams.
inline long long dist1(std::span<const Tokens> questions) {
  std::set<std::string> seen;
  for (const auto& q : questions) seen.insert(q.begin(), q.end());
  return static_cast<long long>(seen.size());
}

/// Entropy (nats) of the corpus 4-gram distribution; 0 when there are none.
inline double ent4(std::span<const Tokens> questions, bool* had_ngrams = nullptr) {
  std::map<Tokens, long long> freq;
  long long total = 0;
  for (const auto& q : questions)
    for (const auto& [g, k] : ngram_counts(q, 4)) {
      freq[g] += k;
      total += k;
    }
  if (had_ngrams) *had_ngrams = total > 0;
  double h = 0.0;
  for (const auto& [g, k] : freq) {
    double p = static_cast<double>(k) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

/// Mean BLEU-4 of each member against all other members, in percent.
/// Groups with fewer than two members return a negative value.
inline double self_bleu4(std::span<const Tokens> group) {
  if (group.size() < 2) return -1.0;
  double s = 0.0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    std::vector<Tokens> others;
    for (std::size_t j = 0; j < group.size(); ++j)
      if (j != i) others.push_back(group[j]);
    s += sentence_bleu(group[i], others, 4);
  }
  return 100.0 * s / static_cast<double>(group.size());
}

/// Mean over groups of size >= 2; `excluded` counts the rest.
inline double corpus_self_bleu4(std::span<const std::vector<Tokens>> groups,
                                std::size_t* excluded = nullptr) {
  double s = 0.0;
  std::size_t used = 0, skipped = 0;
  for (const auto& g : groups) {
    double v = self_bleu4(g);
    if (v < 0) {
      ++skipped;
      continue;
    }
    s += v;
    ++used;
  }
  if (excluded) *excluded = skipped;
  return used ? s / static_cast<double>(used) : 0.0;
}

// ---- question types -------------------------------------------------------------

inline const std::array<std::string, 7>& question_types() {
  static const std::array<std::string, 7> kTypes = {"what", "how",   "who", "which",
                                                    "when", "where", "why"};
  return kTypes;
}

/// First interrogative from the type list reading left to right, else "other".
inline std::string question_type(const Tokens& q) {
  for (const auto& w : q)
    for (const auto& t : question_types())
      if (w == t) return t;
  return "other";
}

inline std::map<std::string, double> question_type_histogram(std::span<const Tokens> questions) {
  std::map<std::string, double> h;
  for (const auto& t : question_types()) h[t] = 0.0;
  h["other"] = 0.0;
  for (const auto& q : questions) h[question_type(q)] += 1.0;
  if (!questions.empty())
    for (auto& [k, v] : h) v = 100.0 * v / static_cast<double>(questions.size());
  return h;
}

struct QGReport {
  double b1_r = 0.0;
  double b4_r = 0.0;
  double rl_r = 0.0;
  long long token_count = 0;
  long long dist1 = 0;
  double ent4 = 0.0;
  double self_bleu4 = 0.0;
  std::map<std::string, double> type_histogram;
};

inline void to_json(nlohmann::json& j, const QGReport& r) {
  j = {{"b1_r", r.b1_r},
       {"b4_r", r.b4_r},
       {"me_r", "n/a"},
       {"rl_r", r.rl_r},
       {"token_count", r.token_count},
       {"dist1", r.dist1},
       {"ent4", r.ent4},
       {"self_bleu4", r.self_bleu4},
       {"type_histogram", r.type_histogram}};
}

/// Scores generated question groups; `groups[i]` holds the questions produced
/// for the input whose reference is `references[i]`.
inline QGReport qg_scores(std::span<const Tokens> references,
                          std::span<const std::vector<Tokens>> groups) {
  require(references.size() == groups.size(), "qg_scores: one group per reference");
  std::vector<RecallGroup> rg;
  std::vector<Tokens> all;
  for (std::size_t i = 0; i < references.size(); ++i) {
    rg.push_back({references[i], groups[i]});
    all.insert(all.end(), groups[i].begin(), groups[i].end());
  }
  QGReport r;
  r.b1_r = corpus_bleu_recall(rg, 1);
  r.b4_r = corpus_bleu_recall(rg, 4);
  r.rl_r = corpus_rouge_l_recall(rg);
  r.token_count = token_count(all);
  r.dist1 = dist1(all);
  r.ent4 = ent4(all);
  r.self_bleu4 = corpus_self_bleu4(groups);
  r.type_histogram = question_type_histogram(all);
  return r;
}

}  // namespace vqag
