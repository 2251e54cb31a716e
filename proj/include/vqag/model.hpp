#pragma once

// Full VQAG forward computations over one example: context, question and
// answer encoders, the four latent heads, and both decoders.

#include <cstdint>
#include <random>
#include <string_view>

#include "vqag/answer_decoder.hpp"
#include "vqag/corpus/example.hpp"
#include "vqag/latent.hpp"
#include "vqag/network.hpp"
#include "vqag/neural_core.hpp"
#include "vqag/question_decoder.hpp"

namespace vqag {

/// SplitMix64 finaliser; used to derive independent random streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Random stream keyed by (seed, step, example id), independent of batch order.
inline std::mt19937_64 example_stream(std::uint64_t seed, std::uint64_t step, std::string_view id) {
  return std::mt19937_64(mix64(mix64(seed) ^ mix64(step + 0x51ED27ULL) ^ hash_string(id)));
}

struct ContextEncoding {
  Var embedded;
  EncodedSequence enc;
  PointerMemory pointer;
};

inline ContextEncoding encode_context(Pass& p, const EncodedText& context) {
  ContextEncoding c;
  c.embedded = embed(p, context);
  c.enc = contextual_encode(p, c.embedded, EncoderKind::context);
  c.pointer = make_pointer_memory(p, c.enc.H);
  return c;
}

/// All four latent distributions for a gold example.
struct LatentHeads {
  ContextEncoding context;
  GaussianNodes prior_z, post_z, prior_y, post_y;
};

inline LatentHeads latent_heads(Pass& p, const TokenizedExample& ex) {
  Graph& g = p.g;
  LatentHeads out;
  out.context = encode_context(p, ex.context);
  const auto& span = ex.answer_span;
  Var answer_rows =
      g.slice_rows(out.context.embedded, span.start, span.end - span.start + 1);
  EncodedSequence a = contextual_encode(p, answer_rows, EncoderKind::answer);
  EncodedSequence q = contextual_encode(p, embed(p, ex.question), EncoderKind::question);
  Var hc = out.context.enc.h;
  out.prior_z = gaussian_params(p, Head::prior_z, {hc});
  out.post_z = gaussian_params(p, Head::post_z, {hc, a.h});
  out.prior_y = gaussian_params(p, Head::prior_y, {hc});
  out.post_y = gaussian_params(p, Head::post_y, {hc, q.h});
  return out;
}

struct LatentNoise {
  Vector z;
  Vector y;
};

inline LatentNoise draw_noise(int latent, std::mt19937_64& rng) {
  LatentNoise n;
  n.z = standard_normal(latent, rng);
  n.y = standard_normal(latent, rng);
  return n;
}

/// Reconstruction and KL terms of one example with posterior samples.
struct ExampleTerms {
  Var recon_a;
  Var recon_q;
  Var kl_z;
  Var kl_y;
};

inline ExampleTerms example_terms(Pass& p, const TokenizedExample& ex, const LatentNoise& noise) {
  Graph& g = p.g;
  LatentHeads heads = latent_heads(p, ex);
  Var z = reparameterize(g, heads.post_z, noise.z);
  Var y = reparameterize(g, heads.post_y, noise.y);
  ExampleTerms t;
  t.recon_a = answer_log_prob(p, heads.context.pointer, z, ex.answer_span);
  Var H_CA = answer_aware_encode(p, heads.context.enc.H, ex.answer_span);
  QuestionMemory qm = make_question_memory(p, H_CA);
  CopyIndex copy(ex.context, p.cfg().vocab_size);
  t.recon_q = question_log_prob(p, qm, y, ex.question_ids, ex.question.words, copy);
  t.kl_z = kl_diag_gaussians(g, heads.post_z, heads.prior_z);
  t.kl_y = kl_diag_gaussians(g, heads.post_y, heads.prior_y);
  return t;
}

}  // namespace vqag
