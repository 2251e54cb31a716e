#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vqag/corpus/squad.hpp"
#include "vqag/corpus/text.hpp"
#include "vqag/errors.hpp"

namespace vqag {

/// Word and character vocabularies. Ids are dense and the special entries take
/// the lowest ids.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;  // the "⇒" start symbol
  static constexpr int kEos = 3;
  static constexpr int kNumSpecials = 4;
  static constexpr int kCharPad = 0;
  static constexpr int kCharUnk = 1;

  Vocabulary() {
    for (const char* w : {"<pad>", "<unk>", "<bos>", "<eos>"}) add_word(w);
    add_char("<pad>");
    add_char("<unk>");
  }

  int size() const { return static_cast<int>(id_to_word_.size()); }
  int char_size() const { return static_cast<int>(id_to_char_.size()); }

  bool contains(const std::string& w) const { return word_to_id_.count(w) > 0; }

  int word_id(const std::string& w) const {
    auto it = word_to_id_.find(w);
    return it == word_to_id_.end() ? kUnk : it->second;
  }

  const std::string& word(int id) const { return id_to_word_.at(static_cast<std::size_t>(id)); }

  int char_id(const std::string& c) const {
    auto it = char_to_id_.find(c);
    return it == char_to_id_.end() ? kCharUnk : it->second;
  }

  const std::string& character(int id) const { return id_to_char_.at(static_cast<std::size_t>(id)); }

  int add_word(const std::string& w) {
    auto [it, inserted] = word_to_id_.emplace(w, size());
    if (inserted) id_to_word_.push_back(w);
    return it->second;
  }

  int add_char(const std::string& c) {
    auto [it, inserted] = char_to_id_.emplace(c, char_size());
    if (inserted) id_to_char_.push_back(c);
    return it->second;
  }

  /// Character ids of one word, padded or truncated to `word_len`.
  std::vector<int> char_ids(const std::string& word, int word_len) const {
    std::vector<int> out(static_cast<std::size_t>(word_len), kCharPad);
    auto chars = split_chars(word);
    for (std::size_t i = 0; i < chars.size() && i < out.size(); ++i) out[i] = char_id(chars[i]);
    return out;
  }

  /// Writes "word<TAB>id" per line, plus a sibling character table.
  void save(const std::filesystem::path& words_path, const std::filesystem::path& chars_path) const {
    std::ofstream w(words_path);
    if (!w) throw InputError("cannot write " + words_path.string());
    for (int i = 0; i < size(); ++i) w << id_to_word_[static_cast<std::size_t>(i)] << '\t' << i << '\n';
    std::ofstream c(chars_path);
    if (!c) throw InputError("cannot write " + chars_path.string());
    for (int i = 0; i < char_size(); ++i) c << id_to_char_[static_cast<std::size_t>(i)] << '\t' << i << '\n';
  }

  static Vocabulary load(const std::filesystem::path& words_path,
                         const std::filesystem::path& chars_path) {
    Vocabulary v;
    v.word_to_id_.clear();
    v.id_to_word_.clear();
    v.char_to_id_.clear();
    v.id_to_char_.clear();
    read_table(words_path, v.id_to_word_, v.word_to_id_);
    read_table(chars_path, v.id_to_char_, v.char_to_id_);
    if (v.size() < kNumSpecials || v.word(kUnk) != "<unk>")
      throw InputError(words_path.string() + ": missing special entries");
    return v;
  }

 private:
  static void read_table(const std::filesystem::path& path, std::vector<std::string>& by_id,
                         std::unordered_map<std::string, int>& by_key) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto tab = line.rfind('\t');
      if (tab == std::string::npos)
        throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected key<TAB>id");
      std::string key = line.substr(0, tab);
      int id = std::stoi(line.substr(tab + 1));
      if (id != static_cast<int>(by_id.size()))
        throw InputError(path.string() + ":" + std::to_string(lineno) + ": ids must be dense");
      by_id.push_back(key);
      by_key.emplace(key, id);
    }
  }

  std::unordered_map<std::string, int> word_to_id_;
  std::vector<std::string> id_to_word_;
  std::unordered_map<std::string, int> char_to_id_;
  std::vector<std::string> id_to_char_;
};

/// Ranks words by frequency (ties: first occurrence wins) and keeps the top
/// `word_cap`. Every character seen enters the character table.
inline Vocabulary build_vocabulary(std::span<const std::vector<std::string>> texts,
                                   int word_cap = 45000) {
  struct Entry {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Entry> stats;
  std::vector<std::string> order;
  Vocabulary vocab;
  for (const auto& words : texts)
    for (const auto& w : words) {
      auto [it, inserted] = stats.try_emplace(w);
      if (inserted) {
        it->second.first = order.size();
        order.push_back(w);
        for (const auto& c : split_chars(w)) vocab.add_char(c);
      }
      ++it->second.count;
    }
  std::vector<std::string> ranked = order;
  std::stable_sort(ranked.begin(), ranked.end(), [&](const std::string& a, const std::string& b) {
    const Entry& ea = stats.at(a);
    const Entry& eb = stats.at(b);
    if (ea.count != eb.count) return ea.count > eb.count;
    return ea.first < eb.first;
  });
  int added = 0;
  for (const auto& w : ranked) {
    if (added >= word_cap) break;
    if (vocab.contains(w)) continue;
    vocab.add_word(w);
    ++added;
  }
  return vocab;
}

/// Vocabulary over the tokenized contexts and questions of a SQuAD split.
inline Vocabulary build_vocabulary(std::span<const ParagraphRecord> paragraphs,
                                   int word_cap = 45000) {
  std::vector<std::vector<std::string>> texts;
  auto surfaces = [](const std::string& t) {
    std::vector<std::string> out;
    for (auto& tok : tokenize(t)) out.push_back(std::move(tok.surface));
    return out;
  };
  for (const auto& p : paragraphs) {
    texts.push_back(surfaces(p.context_text));
    for (const auto& qa : p.qas) texts.push_back(surfaces(qa.question_text));
  }
  return build_vocabulary(std::span<const std::vector<std::string>>(texts), word_cap);
}

}  // namespace vqag
