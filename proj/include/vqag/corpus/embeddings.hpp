#pragma once

// Pretrained word vectors in the whitespace-separated text format
// ("word v_1 ... v_d" per line, optional "count dim" header line).

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "vqag/corpus/vocabulary.hpp"
#include "vqag/errors.hpp"

namespace vqag {

struct WordVectorLoad {
  std::size_t matched = 0;
  std::size_t lines = 0;
};

/// Overwrites the rows of `table` (vocab_size x dim) whose word appears in the
/// file; other rows are left as they are. Lookup is on the lowercased word.
inline WordVectorLoad load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab,
                                        Eigen::MatrixXd& table) {
  require(table.rows() == vocab.size(), "load_word_vectors: table rows must match the vocabulary");
  std::ifstream in(path);
  if (!in) throw InputError("cannot open word vectors " + path.string());
  WordVectorLoad out;
  const Eigen::Index dim = table.cols();
  std::string line;
  std::vector<bool> seen(static_cast<std::size_t>(vocab.size()), false);
  while (std::getline(in, line)) {
    ++out.lines;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (out.lines == 1 && values.size() == 1) continue;  // header
    if (static_cast<Eigen::Index>(values.size()) != dim)
      throw InputError(path.string() + ":" + std::to_string(out.lines) + ": expected " +
                       std::to_string(dim) + " values, found " + std::to_string(values.size()));
    word = lowercase(word);
    if (!vocab.contains(word)) continue;
    int id = vocab.word_id(word);
    if (seen[static_cast<std::size_t>(id)]) continue;
    seen[static_cast<std::size_t>(id)] = true;
    for (Eigen::Index k = 0; k < dim; ++k) table(id, k) = values[static_cast<std::size_t>(k)];
    ++out.matched;
  }
  return out;
}

}  // namespace vqag
