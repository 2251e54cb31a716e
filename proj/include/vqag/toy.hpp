#pragma once

// Small templated QA corpus for smoke runs: short person/city/job contexts
// with three answer types and three question phrasings per type.

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vqag/corpus/squad.hpp"
#include "vqag/corpus/text.hpp"

namespace vqag {

struct ToyOptions {
  int examples = 200;
  std::uint64_t seed = 7;
  std::string id_prefix = "toy";
};

namespace detail {

inline const std::array<const char*, 8> kToyNames = {"anna", "boris", "carla", "dmitri",
                                                     "elena", "farid", "greta", "hugo"};
inline const std::array<const char*, 8> kToyCities = {"paris", "lima", "oslo", "cairo",
                                                      "delhi", "quito", "rome", "tokyo"};
inline const std::array<const char*, 6> kToyJobs = {"doctor", "teacher", "pilot",
                                                    "farmer", "painter", "baker"};

}  // namespace detail

/// Builds SQuAD-shaped paragraphs; each paragraph carries one to three
/// questions about distinct slots of its context.
inline std::vector<ParagraphRecord> make_toy_corpus(const ToyOptions& opt = {}) {
  using namespace detail;
  std::mt19937_64 rng(opt.seed);
  auto pick = [&](std::size_t n) {
    return static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  };
  std::vector<ParagraphRecord> out;
  int made = 0;
  while (made < opt.examples) {
    std::string name = kToyNames[pick(kToyNames.size())];
    std::string city = kToyCities[pick(kToyCities.size())];
    std::string job = kToyJobs[pick(kToyJobs.size())];
    ParagraphRecord p;
    p.id = opt.id_prefix + "-p" + std::to_string(out.size());
    p.title = "toy";
    std::string text = pick(2) == 0
                           ? name + " lives in " + city + " and works as a " + job + " ."
                           : name + " is a " + job + " from " + city + " .";
    p.context_text = text;

    std::array<int, 3> slots = {0, 1, 2};
    std::shuffle(slots.begin(), slots.end(), rng);
    int count = std::min<int>(1 + static_cast<int>(pick(3)), opt.examples - made);
    for (int k = 0; k < count; ++k) {
      QARecord qa;
      qa.id = opt.id_prefix + "-q" + std::to_string(made);
      std::size_t phr = pick(3);
      switch (slots[static_cast<std::size_t>(k)]) {
        case 0: {
          const std::array<std::string, 3> qs = {"who lives in " + city + " ?",
                                                 "who works as a " + job + " ?",
                                                 "what is the name of the " + job + " ?"};
          qa.question_text = qs[phr];
          qa.answer_text = name;
          break;
        }
        case 1: {
          const std::array<std::string, 3> qs = {"where does " + name + " live ?",
                                                 "which city is " + name + " from ?",
                                                 "what city does " + name + " live in ?"};
          qa.question_text = qs[phr];
          qa.answer_text = city;
          break;
        }
        default: {
          const std::array<std::string, 3> qs = {"what does " + name + " do ?",
                                                 "what is the job of " + name + " ?",
                                                 "what does " + name + " work as ?"};
          qa.question_text = qs[phr];
          qa.answer_text = job;
          break;
        }
      }
      qa.answer_char_start =
          qa.answer_text == name ? 0 : static_cast<int>(text.find(" " + qa.answer_text + " ")) + 1;
      p.qas.push_back(std::move(qa));
      ++made;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace vqag
