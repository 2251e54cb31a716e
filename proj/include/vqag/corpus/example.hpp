#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqag/corpus/squad.hpp"
#include "vqag/corpus/text.hpp"
#include "vqag/corpus/vocabulary.hpp"
#include "vqag/errors.hpp"

namespace vqag {

inline constexpr int kDefaultWordLen = 16;

/// A token sequence in index space. Surfaces are kept for copy scoring and
/// export; OOV words map to UNK in `ids`.
struct EncodedText {
  std::vector<int> ids;
  std::vector<std::string> words;
  std::vector<std::pair<int, int>> offsets;  // code-point [start, end)
  std::vector<int> char_ids;                 // size() * word_len, row-major
  int word_len = kDefaultWordLen;

  int size() const { return static_cast<int>(ids.size()); }
};

struct AnswerSpanIndex {
  int start = 0;
  int end = 0;  // inclusive
  friend bool operator==(const AnswerSpanIndex&, const AnswerSpanIndex&) = default;
};

struct TokenizedExample {
  std::string id;
  std::string paragraph_id;
  std::string context_text;
  EncodedText context;
  EncodedText question;           // words between BOS and EOS
  std::vector<int> question_ids;  // BOS q_1 ... q_n EOS
  AnswerSpanIndex answer_span;
  std::string answer_text;
};

struct EncodeOptions {
  int word_len = kDefaultWordLen;
  int max_context_len = 0;  // 0 keeps the whole context
};

inline EncodedText encode_text(const std::vector<Token>& tokens, const Vocabulary& vocab,
                               int word_len = kDefaultWordLen) {
  EncodedText out;
  out.word_len = word_len;
  for (const auto& t : tokens) {
    out.ids.push_back(vocab.word_id(t.surface));
    out.words.push_back(t.surface);
    out.offsets.emplace_back(t.char_start, t.char_end);
    auto ch = vocab.char_ids(t.surface, word_len);
    out.char_ids.insert(out.char_ids.end(), ch.begin(), ch.end());
  }
  return out;
}

inline EncodedText encode_words(const std::vector<std::string>& words, const Vocabulary& vocab,
                                int word_len = kDefaultWordLen) {
  std::vector<Token> toks;
  int pos = 0;
  for (const auto& w : words) {
    int len = cp_length(w);
    toks.push_back(Token{w, pos, pos + len});
    pos += len + 1;
  }
  return encode_text(toks, vocab, word_len);
}

/// Smallest inclusive token window covering the answer characters.
inline AnswerSpanIndex align_answer_span(const std::vector<Token>& context_tokens,
                                         int answer_char_start, const std::string& answer_text,
                                         const std::string& record_id = "") {
  const int a0 = answer_char_start;
  const int a1 = answer_char_start + cp_length(answer_text);
  int start = -1, end = -1;
  for (int i = 0; i < static_cast<int>(context_tokens.size()); ++i) {
    const Token& t = context_tokens[static_cast<std::size_t>(i)];
    if (t.char_end > a0 && t.char_start < a1) {
      if (start < 0) start = i;
      end = i;
    }
  }
  if (start < 0)
    throw AlignmentError((record_id.empty() ? std::string("answer") : record_id) +
                         ": offset " + std::to_string(answer_char_start) +
                         " does not fall on any token");
  return {start, end};
}

inline TokenizedExample encode_example(const ParagraphRecord& paragraph, const QARecord& qa,
                                       const Vocabulary& vocab, const EncodeOptions& opt = {}) {
  auto ctx_tokens = tokenize(paragraph.context_text);
  auto span = align_answer_span(ctx_tokens, qa.answer_char_start, qa.answer_text, qa.id);
  if (opt.max_context_len > 0 && static_cast<int>(ctx_tokens.size()) > opt.max_context_len) {
    if (span.end >= opt.max_context_len)
      throw AlignmentError(qa.id + ": answer lies beyond max_context_len");
    ctx_tokens.resize(static_cast<std::size_t>(opt.max_context_len));
  }
  TokenizedExample ex;
  ex.id = qa.id;
  ex.paragraph_id = paragraph.id;
  ex.context_text = paragraph.context_text;
  ex.context = encode_text(ctx_tokens, vocab, opt.word_len);
  ex.question = encode_text(tokenize(qa.question_text), vocab, opt.word_len);
  ex.question_ids.push_back(Vocabulary::kBos);
  ex.question_ids.insert(ex.question_ids.end(), ex.question.ids.begin(), ex.question.ids.end());
  ex.question_ids.push_back(Vocabulary::kEos);
  ex.answer_span = span;
  ex.answer_text = qa.answer_text;
  return ex;
}

inline std::vector<std::string> decode_ids(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : ids) out.push_back(vocab.word(id));
  return out;
}

/// Text covered by an inclusive token span, cut from the original context.
inline std::string span_text(const std::string& context_text, const EncodedText& context,
                             AnswerSpanIndex span) {
  int b = context.offsets[static_cast<std::size_t>(span.start)].first;
  int e = context.offsets[static_cast<std::size_t>(span.end)].second;
  return cp_substr(context_text, b, e - b);
}

struct EncodedDataset {
  std::vector<TokenizedExample> examples;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Encodes every QA pair; misaligned answers and answers longer than
/// `max_answer_len` tokens are skipped and counted.
inline EncodedDataset encode_dataset(std::span<const ParagraphRecord> paragraphs,
                                     const Vocabulary& vocab, const EncodeOptions& opt = {},
                                     int max_answer_len = 0) {
  EncodedDataset out;
  for (const auto& p : paragraphs)
    for (const auto& qa : p.qas) {
      try {
        auto ex = encode_example(p, qa, vocab, opt);
        if (max_answer_len > 0 && ex.answer_span.end - ex.answer_span.start + 1 > max_answer_len) {
          ++out.skipped;
          out.warnings.push_back(qa.id + ": answer longer than " + std::to_string(max_answer_len) +
                                 " tokens");
          continue;
        }
        if (ex.question.size() == 0) {
          ++out.skipped;
          out.warnings.push_back(qa.id + ": empty question");
          continue;
        }
        out.examples.push_back(std::move(ex));
      } catch (const AlignmentError& e) {
        ++out.skipped;
        out.warnings.push_back(e.what());
      }
    }
  return out;
}

// ---- JSON-lines cache ------------------------------------------------------
//
// One object per line:
//   id, paragraph_id, context_text,
//   context_ids, context_words, context_offsets ([[start,end],...]),
//   context_char_ids, question_ids (BOS..EOS), question_words,
//   question_char_ids, answer_span ([start,end] inclusive), answer_text,
//   word_len

inline nlohmann::json to_json(const TokenizedExample& ex) {
  nlohmann::json j;
  j["id"] = ex.id;
  j["paragraph_id"] = ex.paragraph_id;
  j["context_text"] = ex.context_text;
  j["context_ids"] = ex.context.ids;
  j["context_words"] = ex.context.words;
  j["context_offsets"] = ex.context.offsets;
  j["context_char_ids"] = ex.context.char_ids;
  j["question_ids"] = ex.question_ids;
  j["question_words"] = ex.question.words;
  j["question_char_ids"] = ex.question.char_ids;
  j["answer_span"] = {ex.answer_span.start, ex.answer_span.end};
  j["answer_text"] = ex.answer_text;
  j["word_len"] = ex.context.word_len;
  return j;
}

inline TokenizedExample example_from_json(const nlohmann::json& j) {
  TokenizedExample ex;
  ex.id = j.at("id").get<std::string>();
  ex.paragraph_id = j.at("paragraph_id").get<std::string>();
  ex.context_text = j.at("context_text").get<std::string>();
  int wl = j.value("word_len", kDefaultWordLen);
  ex.context.word_len = wl;
  ex.question.word_len = wl;
  ex.context.ids = j.at("context_ids").get<std::vector<int>>();
  ex.context.words = j.at("context_words").get<std::vector<std::string>>();
  ex.context.offsets = j.at("context_offsets").get<std::vector<std::pair<int, int>>>();
  ex.context.char_ids = j.at("context_char_ids").get<std::vector<int>>();
  ex.question_ids = j.at("question_ids").get<std::vector<int>>();
  ex.question.words = j.at("question_words").get<std::vector<std::string>>();
  ex.question.char_ids = j.at("question_char_ids").get<std::vector<int>>();
  ex.question.ids.assign(ex.question_ids.begin() + 1, ex.question_ids.end() - 1);
  int qpos = 0;
  for (const auto& w : ex.question.words) {
    int len = cp_length(w);
    ex.question.offsets.emplace_back(qpos, qpos + len);
    qpos += len + 1;
  }
  auto span = j.at("answer_span").get<std::vector<int>>();
  ex.answer_span = {span.at(0), span.at(1)};
  ex.answer_text = j.at("answer_text").get<std::string>();
  return ex;
}

inline void write_examples_jsonl(const std::filesystem::path& path,
                                 const std::vector<TokenizedExample>& examples) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

inline std::vector<TokenizedExample> read_examples_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<TokenizedExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(example_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace vqag
