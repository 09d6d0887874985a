#pragma once

// Deterministic synthetic corpus: simple conjoined subject-verb-object facts
// with one gold tuple per fact. Within a sentence all content words are
// distinct, so tuples are word-disjoint and coverage behavior is observable.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "oiekit/core.hpp"

namespace toy {

struct Corpus {
  std::vector<oiekit::Sentence> sentences;
  std::vector<std::vector<oiekit::Extraction>> gold;  // aligned with sentences
};

inline const std::vector<std::string>& subjects() {
  static const std::vector<std::string> v{"alice", "bob",   "carol", "david", "erin",
                                          "frank", "grace", "henry", "irene", "jack"};
  return v;
}

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v{"ate",    "bought", "painted", "carried", "found",
                                          "dropped", "cooked", "borrowed", "sold",  "cleaned"};
  return v;
}

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> v{"apple",  "melon",  "book",   "chair",  "lamp",
                                          "ticket", "hammer", "basket", "violin", "kettle",
                                          "ladder", "mirror", "carpet", "helmet", "candle",
                                          "barrel", "magnet", "pencil", "napkin", "wallet"};
  return v;
}

// fact_count facts joined by "and", e.g. "alice ate the apple and bob sold a
// lamp ." with gold (alice; ate; the apple), (bob; sold; a lamp).
inline Corpus make_corpus(std::size_t sentence_count, std::uint64_t seed) {
  Corpus corpus;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < sentence_count; ++i) {
    const int facts = 1 + static_cast<int>(i % 4);
    std::vector<std::string> subj_pool = subjects();
    std::vector<std::string> verb_pool = verbs();
    std::vector<std::string> noun_pool = nouns();
    std::shuffle(subj_pool.begin(), subj_pool.end(), rng);
    std::shuffle(verb_pool.begin(), verb_pool.end(), rng);
    std::shuffle(noun_pool.begin(), noun_pool.end(), rng);

    oiekit::Sentence sentence;
    sentence.id = "s" + std::to_string(i);
    std::vector<oiekit::Extraction> golds;
    for (int k = 0; k < facts; ++k) {
      const std::string subj = subj_pool[static_cast<std::size_t>(k)];
      const std::string verb = verb_pool[static_cast<std::size_t>(k)];
      const std::string det = (k % 2 == 0) ? "the" : "a";
      const std::string noun = noun_pool[static_cast<std::size_t>(k)];
      if (k > 0) sentence.tokens.push_back("and");
      sentence.tokens.push_back(subj);
      sentence.tokens.push_back(verb);
      sentence.tokens.push_back(det);
      sentence.tokens.push_back(noun);

      oiekit::Extraction gold;
      gold.arg1 = {subj};
      gold.rel = {verb};
      gold.arg2 = {det, noun};
      gold.confidence = 1.0;
      gold.source = "gold";
      golds.push_back(std::move(gold));
    }
    sentence.tokens.push_back(".");
    corpus.sentences.push_back(std::move(sentence));
    corpus.gold.push_back(std::move(golds));
  }
  return corpus;
}

}  // namespace toy
