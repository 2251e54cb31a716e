#pragma once

// QA-pair synthesis from prior draws, heuristic filtering, latent grid
// interpolation and SQuAD-format export.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqag/corpus/squad.hpp"
#include "vqag/corpus/vocabulary.hpp"
#include "vqag/io.hpp"
#include "vqag/metrics.hpp"
#include "vqag/model.hpp"

namespace vqag {

enum class RejectionReason { too_short, too_long, answer_too_long, no_interrogative, ngram_repetition };

inline const char* to_string(RejectionReason r) {
  switch (r) {
    case RejectionReason::too_short: return "too_short";
    case RejectionReason::too_long: return "too_long";
    case RejectionReason::answer_too_long: return "answer_too_long";
    case RejectionReason::no_interrogative: return "no_interrogative";
    case RejectionReason::ngram_repetition: return "ngram_repetition";
  }
  return "unknown";
}

struct QAPairRecord {
  std::string paragraph_id;
  std::string context_text;
  Tokens question_tokens;
  AnswerSpanIndex answer_span;
  std::string answer_text;
  int answer_char_start = 0;  // code points
  std::optional<Vector> z;
  std::optional<Vector> y;
  bool passed_filters = true;
  std::optional<RejectionReason> rejection_reason;
};

struct FilterPolicy {
  int q_len_min = 5;
  int q_len_max = 20;
  int a_len_max = 10;
  std::set<std::string> interrogatives = {"what", "how",   "who", "whom", "whose",
                                          "which", "when", "where", "why"};
  int ngram_rep_n = 3;
};

inline void validate(const FilterPolicy& p) {
  require(p.q_len_min > 0 && p.q_len_min < p.q_len_max && p.a_len_max > 0 && p.ngram_rep_n > 0,
          "filter policy: bounds must be positive with min < max");
}

/// True iff some n-gram occurs at least twice.
inline bool has_ngram_repetition(const Tokens& tokens, int n) {
  require(n >= 1, "has_ngram_repetition: n must be at least 1");
  std::set<Tokens> seen;
  for (int i = 0; i + n <= static_cast<int>(tokens.size()); ++i)
    if (!seen.insert(Tokens(tokens.begin() + i, tokens.begin() + i + n)).second) return true;
  return false;
}

/// The first rule the record breaks, if any.
inline std::optional<RejectionReason> first_failure(const QAPairRecord& r, const FilterPolicy& p) {
  const int len = static_cast<int>(r.question_tokens.size());
  if (len < p.q_len_min) return RejectionReason::too_short;
  if (len > p.q_len_max) return RejectionReason::too_long;
  if (span_length(r.answer_span) > p.a_len_max) return RejectionReason::answer_too_long;
  bool found = false;
  for (const auto& w : r.question_tokens) found = found || p.interrogatives.count(w) > 0;
  if (!found) return RejectionReason::no_interrogative;
  if (has_ngram_repetition(r.question_tokens, p.ngram_rep_n)) return RejectionReason::ngram_repetition;
  return std::nullopt;
}

inline std::vector<QAPairRecord> apply_filters(std::vector<QAPairRecord> records,
                                               const FilterPolicy& policy = {}) {
  validate(policy);
  for (auto& r : records) {
    r.rejection_reason = first_failure(r, policy);
    r.passed_filters = !r.rejection_reason.has_value();
  }
  return records;
}

struct GenerateOptions {
  DecodeMode answer_mode = DecodeMode::ancestral;
  DecodeMode question_mode = DecodeMode::greedy;
  bool keep_latents = true;
};

/// Decodes one (span, question) pair for fixed latent values.
inline QAPairRecord decode_pair(Pass& p, const TokenizedExample& paragraph,
                                const ContextEncoding& enc, const Vector& z, const Vector& y,
                                const Vocabulary& vocab, const GenerateOptions& opt,
                                std::mt19937_64* rng) {
  Graph& g = p.g;
  AnswerSpan span = sample_answer(p, enc.pointer, g.constant(z), opt.answer_mode, rng);
  AnswerSpanIndex idx{span.start, span.end};
  Var H_CA = answer_aware_encode(p, enc.enc.H, idx);
  QuestionMemory qm = make_question_memory(p, H_CA);
  CopyIndex copy(paragraph.context, p.cfg().vocab_size);
  GeneratedQuestion q = generate_question(p, qm, g.constant(y), copy, opt.question_mode,
                                          p.cfg().max_question_len, rng);
  QAPairRecord r;
  r.paragraph_id = paragraph.paragraph_id;
  r.context_text = paragraph.context_text;
  r.question_tokens = question_words(q, copy, vocab);
  r.answer_span = idx;
  r.answer_text = span_text(paragraph.context_text, paragraph.context, idx);
  r.answer_char_start = paragraph.context.offsets[static_cast<std::size_t>(idx.start)].first;
  if (opt.keep_latents) {
    r.z = z;
    r.y = y;
  }
  return r;
}

/// n independent prior draws of z then y for one paragraph. Only the context
/// fields of `paragraph` are read.
inline std::vector<QAPairRecord> generate_pairs(Network& net, const TokenizedExample& paragraph,
                                                const Vocabulary& vocab, int n,
                                                std::mt19937_64& rng,
                                                const GenerateOptions& opt = {}) {
  std::vector<QAPairRecord> out;
  if (n <= 0) return out;
  Graph g(false);
  Pass p{g, net, 0.0, nullptr};
  ContextEncoding enc = encode_context(p, paragraph.context);
  GaussianParams pz = gaussian_params(p, Head::prior_z, {enc.enc.h}).values(g);
  GaussianParams py = gaussian_params(p, Head::prior_y, {enc.enc.h}).values(g);
  const int k = net.config().latent;
  for (int i = 0; i < n; ++i) {
    Vector z = reparameterize(pz, standard_normal(k, rng)).value;
    Vector y = reparameterize(py, standard_normal(k, rng)).value;
    out.push_back(decode_pair(p, paragraph, enc, z, y, vocab, opt, &rng));
  }
  return out;
}

/// n answer spans from prior draws of z, without decoding questions.
inline std::vector<AnswerSpanIndex> sample_answers(Network& net, const TokenizedExample& paragraph,
                                                   int n, std::mt19937_64& rng,
                                                   DecodeMode mode = DecodeMode::ancestral) {
  std::vector<AnswerSpanIndex> out;
  if (n <= 0) return out;
  Graph g(false);
  Pass p{g, net, 0.0, nullptr};
  ContextEncoding enc = encode_context(p, paragraph.context);
  GaussianParams pz = gaussian_params(p, Head::prior_z, {enc.enc.h}).values(g);
  for (int i = 0; i < n; ++i) {
    Vector z = reparameterize(pz, standard_normal(net.config().latent, rng)).value;
    AnswerSpan a = sample_answer(p, enc.pointer, g.constant(z), mode, &rng);
    out.push_back({a.start, a.end});
  }
  return out;
}

/// n questions for the gold answer of `ex`, one prior draw of y each.
inline std::vector<Tokens> sample_questions(Network& net, const TokenizedExample& ex,
                                            const Vocabulary& vocab, int n, std::mt19937_64& rng,
                                            DecodeMode mode = DecodeMode::greedy) {
  std::vector<Tokens> out;
  if (n <= 0) return out;
  Graph g(false);
  Pass p{g, net, 0.0, nullptr};
  ContextEncoding enc = encode_context(p, ex.context);
  GaussianParams py = gaussian_params(p, Head::prior_y, {enc.enc.h}).values(g);
  QuestionMemory qm = make_question_memory(p, answer_aware_encode(p, enc.enc.H, ex.answer_span));
  CopyIndex copy(ex.context, net.config().vocab_size);
  for (int i = 0; i < n; ++i) {
    Vector y = reparameterize(py, standard_normal(net.config().latent, rng)).value;
    GeneratedQuestion q =
        generate_question(p, qm, g.constant(y), copy, mode, net.config().max_question_len, &rng);
    out.push_back(question_words(q, copy, vocab));
  }
  return out;
}

/// Grid of greedy decodes; cell [i][j] uses y_i and z_j on the segments
/// between the posterior means of the two examples.
inline std::vector<std::vector<QAPairRecord>> interpolate(Network& net, const TokenizedExample& a,
                                                          const TokenizedExample& b, int steps,
                                                          const Vocabulary& vocab) {
  require(steps >= 1, "interpolate: steps must be at least 1");
  if (a.context_text != b.context_text || a.context.ids != b.context.ids)
    throw ContractViolation("interpolate: examples " + a.id + " and " + b.id +
                            " do not share a context");
  Graph g(false);
  Pass p{g, net, 0.0, nullptr};
  LatentHeads ha = latent_heads(p, a);
  LatentHeads hb = latent_heads(p, b);
  Vector za = g.value(ha.post_z.mu).col(0), zb = g.value(hb.post_z.mu).col(0);
  Vector ya = g.value(ha.post_y.mu).col(0), yb = g.value(hb.post_y.mu).col(0);
  GenerateOptions opt;
  opt.answer_mode = DecodeMode::greedy;
  opt.question_mode = DecodeMode::greedy;
  std::vector<std::vector<QAPairRecord>> grid(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    double ti = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    Vector y = (1.0 - ti) * ya + ti * yb;
    for (int j = 0; j < steps; ++j) {
      double tj = steps == 1 ? 0.0 : static_cast<double>(j) / (steps - 1);
      Vector z = (1.0 - tj) * za + tj * zb;
      grid[static_cast<std::size_t>(i)].push_back(
          decode_pair(p, a, ha.context, z, y, vocab, opt, nullptr));
    }
  }
  return grid;
}

// ---- export ----------------------------------------------------------------

struct ExportResult {
  std::size_t written = 0;
  std::size_t duplicates = 0;
  std::size_t dropped = 0;
  std::vector<std::string> warnings;
};

inline nlohmann::json provenance_json(const QAPairRecord& r) {
  nlohmann::json j = {{"paragraph_id", r.paragraph_id},
                      {"question", join(r.question_tokens)},
                      {"answer", r.answer_text},
                      {"answer_start", r.answer_char_start},
                      {"span", {r.answer_span.start, r.answer_span.end}},
                      {"passed_filters", r.passed_filters}};
  j["rejection_reason"] = r.rejection_reason ? nlohmann::json(to_string(*r.rejection_reason))
                                             : nlohmann::json(nullptr);
  auto vec = [](const std::optional<Vector>& v) {
    if (!v) return nlohmann::json(nullptr);
    return nlohmann::json(std::vector<double>(v->data(), v->data() + v->size()));
  };
  j["z"] = vec(r.z);
  j["y"] = vec(r.y);
  return j;
}

/// Writes SQuAD v1.1 JSON (accepted records only unless `include_rejected`),
/// removing duplicate (question, answer) pairs per paragraph. When
/// `sidecar` is non-empty every input record is also written there as JSON
/// lines with its latents and filter outcome.
inline ExportResult export_squad(const std::vector<QAPairRecord>& records,
                                 const std::filesystem::path& path,
                                 const std::filesystem::path& sidecar = {},
                                 bool include_rejected = false) {
  ExportResult res;
  std::vector<std::string> order;
  std::map<std::string, nlohmann::json> paragraphs;
  std::map<std::string, std::set<std::pair<std::string, std::string>>> seen;
  for (const auto& r : records) {
    if (!r.passed_filters && !include_rejected) continue;
    std::u32string ctx = utf8_decode(r.context_text);
    if (!answer_matches(ctx, r.answer_text, r.answer_char_start) || r.answer_text.empty()) {
      ++res.dropped;
      res.warnings.push_back("dropped record in " + r.paragraph_id + ": answer offset does not match context");
      continue;
    }
    std::string question = join(r.question_tokens);
    if (!seen[r.paragraph_id].emplace(question, r.answer_text).second) {
      ++res.duplicates;
      continue;
    }
    auto it = paragraphs.find(r.paragraph_id);
    if (it == paragraphs.end()) {
      order.push_back(r.paragraph_id);
      it = paragraphs.emplace(r.paragraph_id, nlohmann::json{{"context", r.context_text},
                                                             {"qas", nlohmann::json::array()}})
               .first;
    }
    auto& qas = it->second["qas"];
    std::string id = r.paragraph_id + "-g" + std::to_string(qas.size());
    qas.push_back({{"id", id},
                   {"question", question},
                   {"answers", {{{"text", r.answer_text}, {"answer_start", r.answer_char_start}}}}});
    ++res.written;
  }
  nlohmann::json doc = {{"version", "1.1"}, {"data", nlohmann::json::array()}};
  if (!order.empty()) {
    nlohmann::json article = {{"title", "generated"}, {"paragraphs", nlohmann::json::array()}};
    for (const auto& id : order) article["paragraphs"].push_back(paragraphs[id]);
    doc["data"].push_back(article);
  }
  write_file_atomic(path, doc.dump(1) + "\n");
  if (!sidecar.empty()) {
    std::string lines;
    for (const auto& r : records) lines += provenance_json(r).dump() + "\n";
    write_file_atomic(sidecar, lines);
  }
  return res;
}

}  // namespace vqag
