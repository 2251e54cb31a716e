#pragma once

#include <vector>

#include "vqag/corpus/example.hpp"
#include "vqag/corpus/vocabulary.hpp"
#include "vqag/network.hpp"
#include "vqag/toy.hpp"

namespace vqag::test_support {

struct ToyData {
  Vocabulary vocab;
  std::vector<TokenizedExample> examples;
};

inline ToyData toy_data(int n = 200, std::uint64_t seed = 7, int cap = 45000) {
  ToyOptions opt;
  opt.examples = n;
  opt.seed = seed;
  auto paragraphs = make_toy_corpus(opt);
  ToyData d;
  d.vocab = build_vocabulary(std::span<const ParagraphRecord>(paragraphs), cap);
  d.examples = encode_dataset(paragraphs, d.vocab, EncodeOptions{8, 0}, 30).examples;
  return d;
}

inline ModelConfig tiny_config(const Vocabulary& v, int hidden = 8, int latent = 4) {
  ModelConfig c;
  c.vocab_size = v.size();
  c.char_vocab_size = v.char_size();
  c.word_dim = 6;
  c.char_dim = 3;
  c.char_filters = 4;
  c.char_window = 3;
  c.word_len = 8;
  c.hidden = hidden;
  c.latent = latent;
  return c;
}

/// Makes each posterior head reproduce its prior: the extra input columns get
/// zero weight and the shared columns copy the prior weights.
inline void tie_posteriors_to_priors(Network& net) {
  auto& s = net.params();
  for (const char* v : {"z", "y"}) {
    std::string prior = std::string("latent.prior_") + v, post = std::string("latent.post_") + v;
    Matrix& W = s.at(post + ".W").value;
    const Matrix& Wp = s.at(prior + ".W").value;
    W.setZero();
    W.leftCols(Wp.cols()) = Wp;
    s.at(post + ".b").value = s.at(prior + ".b").value;
  }
}

}  // namespace vqag::test_support
