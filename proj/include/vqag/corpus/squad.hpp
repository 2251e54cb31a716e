#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqag/corpus/text.hpp"
#include "vqag/errors.hpp"

namespace vqag {

struct QARecord {
  std::string id;
  std::string question_text;
  std::string answer_text;
  int answer_char_start = 0;
};

/// One SQuAD paragraph. Invariant: each qa's answer_text is the code-point
/// substring of context_text at answer_char_start.
struct ParagraphRecord {
  std::string id;
  std::string title;
  std::string context_text;
  std::vector<QARecord> qas;
};

struct SquadLoadResult {
  std::vector<ParagraphRecord> paragraphs;
  std::size_t pair_count = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

inline bool answer_matches(const std::u32string& context, const std::string& answer, int start) {
  std::u32string a = utf8_decode(answer);
  if (start < 0 || static_cast<std::size_t>(start) + a.size() > context.size()) return false;
  return context.compare(static_cast<std::size_t>(start), a.size(), a) == 0;
}

/// Parses SQuAD v1.1 JSON text. Only the first answer of each question is
/// kept; questions whose offset does not point at the answer are skipped.
inline SquadLoadResult parse_squad(const nlohmann::json& doc, const std::string& origin = "<memory>") {
  SquadLoadResult out;
  if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array())
    throw InputError(origin + ": not a SQuAD document (missing \"data\" array)");
  std::size_t pidx = 0;
  for (const auto& article : doc["data"]) {
    std::string title = article.value("title", std::string{});
    if (!article.contains("paragraphs")) continue;
    for (const auto& para : article["paragraphs"]) {
      ParagraphRecord rec;
      rec.title = title;
      rec.id = "p" + std::to_string(pidx++);
      rec.context_text = para.at("context").get<std::string>();
      std::u32string ctx = utf8_decode(rec.context_text);
      for (const auto& qa : para.value("qas", nlohmann::json::array())) {
        QARecord q;
        q.id = qa.value("id", rec.id + "_q" + std::to_string(rec.qas.size()));
        q.question_text = qa.at("question").get<std::string>();
        const auto& answers = qa.value("answers", nlohmann::json::array());
        if (answers.empty()) {
          ++out.skipped;
          out.warnings.push_back(q.id + ": no answer annotation");
          continue;
        }
        q.answer_text = answers[0].at("text").get<std::string>();
        q.answer_char_start = answers[0].at("answer_start").get<int>();
        if (!answer_matches(ctx, q.answer_text, q.answer_char_start)) {
          ++out.skipped;
          out.warnings.push_back(q.id + ": answer text does not match context at offset " +
                                 std::to_string(q.answer_char_start));
          continue;
        }
        rec.qas.push_back(std::move(q));
        ++out.pair_count;
      }
      out.paragraphs.push_back(std::move(rec));
    }
  }
  return out;
}

inline SquadLoadResult load_squad_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": JSON parse error: " + e.what());
  }
  try {
    return parse_squad(doc, path.string());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": malformed SQuAD record: " + e.what());
  }
}

}  // namespace vqag
