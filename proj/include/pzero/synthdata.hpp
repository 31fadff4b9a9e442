#pragma once

#include <cstdint>
#include <vector>

#include "pzero/corpus.hpp"
#include "pzero/zar.hpp"

namespace pzero {

// Templated entity-repetition corpus: short phrase-chunked sentences in
// which entity tokens recur across a few-sentence window. Used for the
// desk-scale experiment grid and smoke tests.

struct SynthCorpusSpec {
  int documents = 200;
  int sentences_per_doc = 8;
  int entity_min = 0;   // entity token id range [entity_min, entity_max)
  int entity_max = 120;
  uint64_t seed = 1;
};

std::vector<Document> make_entity_corpus(const SynthCorpusSpec& spec);

struct SynthZarSpec {
  int instances = 256;
  int window_sentences = 4;  // n
  int t_max = 64;
  int entity_min = 0;
  int entity_max = 80;
  uint64_t seed = 7;
};

// Derived ZAR set: the NOM argument of the last-sentence predicate is the
// entity recurring in the window; distractor entities appear once. Kind is
// intra when a gold mention sits in the predicate's sentence, inter
// otherwise. Instances carry distance and voice metadata tags.
std::vector<ZarInstance> make_entity_zar(const SynthZarSpec& spec, const Vocabulary& vocab);

// Vocabulary covering every surface the synthetic templates can emit.
Vocabulary synth_vocabulary(int entity_count);

}  // namespace pzero
