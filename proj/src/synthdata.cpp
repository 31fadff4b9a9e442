#include "pzero/synthdata.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "pzero/datagen.hpp"
#include "pzero/rng.hpp"

namespace pzero {

namespace {

// Large filler/verb pools keep window-internal repetition almost entirely
// to the entity tokens.
constexpr int kFillerNouns = 600;
constexpr int kVerbs = 60;
const char* kParticles[] = {"wa", "wo", "ni", "ga", "no"};
const char* kAdverbs[] = {"then", "also", "soon"};

std::string entity_surface(int index) {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "e%03d", index);
  return buffer;
}

std::string filler_surface(int index) {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "thing%03d", index);
  return buffer;
}

std::string verb_surface(int index) {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "act%02d", index);
  return buffer;
}

Word noun(const std::string& surface) { return {surface, Pos::NOUN}; }
Word verb(const std::string& surface) { return {surface, Pos::VERB}; }
Word particle(const std::string& surface) { return {surface, Pos::PARTICLE}; }
Word other(const std::string& surface) { return {surface, Pos::OTHER}; }

// {E wa} {thing wo} {act}
ParsedSentence entity_subject_sentence(int entity, int filler, int verb_id) {
  ParsedSentence s;
  s.phrases.push_back({{noun(entity_surface(entity)), particle("wa")}});
  s.phrases.push_back({{noun(filler_surface(filler)), particle("wo")}});
  s.phrases.push_back({{verb(verb_surface(verb_id))}});
  return s;
}

// {then} {E ga} {act}
ParsedSentence entity_alt_sentence(int entity, int adverb, int verb_id) {
  ParsedSentence s;
  s.phrases.push_back({{other(kAdverbs[adverb])}});
  s.phrases.push_back({{noun(entity_surface(entity)), particle("ga")}});
  s.phrases.push_back({{verb(verb_surface(verb_id))}});
  return s;
}

// {thing ga} {act}
ParsedSentence filler_sentence(int filler, int verb_id) {
  ParsedSentence s;
  s.phrases.push_back({{noun(filler_surface(filler)), particle("ga")}});
  s.phrases.push_back({{verb(verb_surface(verb_id))}});
  return s;
}

// {E no} {thing wo} {act} ; the subject is omitted
ParsedSentence entity_modifier_sentence(int entity, int filler, int verb_id) {
  ParsedSentence s;
  s.phrases.push_back({{noun(entity_surface(entity)), particle("no")}});
  s.phrases.push_back({{noun(filler_surface(filler)), particle("wo")}});
  s.phrases.push_back({{verb(verb_surface(verb_id))}});
  return s;
}

// {thing wo} {act} ; subject omitted entirely
ParsedSentence predicate_sentence(int filler, int verb_id) {
  ParsedSentence s;
  s.phrases.push_back({{noun(filler_surface(filler)), particle("wo")}});
  s.phrases.push_back({{verb(verb_surface(verb_id))}});
  return s;
}

// Word index of the entity inside the sentence templates above: the entity
// is always the first word of its mention phrase.
int entity_word_index(const ParsedSentence& sentence, const std::string& surface) {
  int index = 0;
  for (const auto& phrase : sentence.phrases) {
    for (const auto& word : phrase.words) {
      if (word.surface == surface) return index;
      ++index;
    }
  }
  return -1;
}

}  // namespace

Vocabulary synth_vocabulary(int entity_count) {
  Vocabulary vocab;
  for (int i = 0; i < entity_count; ++i) vocab.add(entity_surface(i));
  for (int i = 0; i < kFillerNouns; ++i) vocab.add(filler_surface(i));
  for (int i = 0; i < kVerbs; ++i) vocab.add(verb_surface(i));
  for (const char* p : kParticles) vocab.add(p);
  for (const char* a : kAdverbs) vocab.add(a);
  return vocab;
}

std::vector<Document> make_entity_corpus(const SynthCorpusSpec& spec) {
  std::vector<Document> docs;
  docs.reserve(static_cast<size_t>(spec.documents));
  const int entity_span = spec.entity_max - spec.entity_min;
  for (int d = 0; d < spec.documents; ++d) {
    Rng rng(mix64(spec.seed, 0xC0, static_cast<uint64_t>(d)));
    Document doc;
    char id[24];
    std::snprintf(id, sizeof(id), "synth-%05d", d);
    doc.id = id;

    // Small per-document entity pool so the same entity recurs in windows.
    std::vector<int> pool;
    while (pool.size() < 3) {
      const int entity = spec.entity_min + static_cast<int>(rng.below(entity_span));
      if (std::find(pool.begin(), pool.end(), entity) == pool.end()) pool.push_back(entity);
    }

    for (int s = 0; s < spec.sentences_per_doc; ++s) {
      const int filler = static_cast<int>(rng.below(kFillerNouns));
      const int verb_id = static_cast<int>(rng.below(kVerbs));
      const uint64_t shape = rng.below(4);
      if (shape == 0) {
        doc.sentences.push_back(filler_sentence(filler, verb_id));
      } else if (shape == 1) {
        const int entity = pool[rng.below(pool.size())];
        doc.sentences.push_back(entity_alt_sentence(entity, static_cast<int>(rng.below(3)),
                                                    verb_id));
      } else if (shape == 2) {
        const int entity = pool[rng.below(pool.size())];
        doc.sentences.push_back(entity_modifier_sentence(entity, filler, verb_id));
      } else {
        const int entity = pool[rng.below(pool.size())];
        doc.sentences.push_back(entity_subject_sentence(entity, filler, verb_id));
      }
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<ZarInstance> make_entity_zar(const SynthZarSpec& spec, const Vocabulary& vocab) {
  std::vector<ZarInstance> instances;
  instances.reserve(static_cast<size_t>(spec.instances));
  const int entity_span = spec.entity_max - spec.entity_min;
  const int n = spec.window_sentences;

  for (int k = 0; k < spec.instances; ++k) {
    Rng rng(mix64(spec.seed, 0x2a7, static_cast<uint64_t>(k)));

    const int gold_entity = spec.entity_min + static_cast<int>(rng.below(entity_span));
    int distractor = gold_entity;
    while (distractor == gold_entity) {
      distractor = spec.entity_min + static_cast<int>(rng.below(entity_span));
    }

    // The gold entity recurs: two mentions spread over the window. With
    // probability ~0.4 one of them sits in the predicate's sentence (intra).
    const bool intra = rng.uniform() < 0.4;
    const int context_slots = n - 1;
    int first_mention = static_cast<int>(rng.below(context_slots));
    int second_mention;
    if (intra) {
      second_mention = n - 1;
    } else {
      second_mention = first_mention;
      while (second_mention == first_mention) {
        second_mention = static_cast<int>(rng.below(context_slots));
      }
    }
    if (first_mention > second_mention) std::swap(first_mention, second_mention);

    Document doc;
    doc.id = "zar";
    const std::string gold_surface = entity_surface(gold_entity);
    const int predicate_verb = static_cast<int>(rng.below(kVerbs));
    bool distractor_used = false;  // the distractor must not recur
    for (int s = 0; s < n; ++s) {
      const int filler = static_cast<int>(rng.below(kFillerNouns));
      const int verb_id = static_cast<int>(rng.below(kVerbs));
      if (s == n - 1) {
        if (intra && s == second_mention) {
          doc.sentences.push_back(entity_modifier_sentence(gold_entity, filler, predicate_verb));
        } else {
          doc.sentences.push_back(predicate_sentence(filler, predicate_verb));
        }
      } else if (s == first_mention || s == second_mention) {
        if (rng.below(2) == 0) {
          doc.sentences.push_back(entity_subject_sentence(gold_entity, filler, verb_id));
        } else {
          doc.sentences.push_back(entity_alt_sentence(gold_entity,
                                                      static_cast<int>(rng.below(3)), verb_id));
        }
      } else if (!distractor_used && rng.below(2) == 0) {
        doc.sentences.push_back(entity_subject_sentence(distractor, filler, verb_id));
        distractor_used = true;
      } else {
        doc.sentences.push_back(filler_sentence(filler, verb_id));
      }
    }

    const Window window = build_window(doc, n - 1, n, spec.t_max, vocab);
    if (!window.usable) continue;

    ZarInstance instance;
    instance.token_ids = window.token_ids;

    // Predicate: the verb is the last word of the last sentence.
    const ParsedSentence& last = doc.sentences.back();
    const int verb_word = last.word_count() - 1;
    const int verb_pos = window.word_positions.at(n - 1)[static_cast<size_t>(verb_word)];
    instance.p_start = verb_pos;
    instance.p_end = verb_pos;

    ArgumentSlot slot;
    slot.label = CaseLabel::NOM;
    slot.kind = intra ? SlotKind::Intra : SlotKind::Inter;
    for (int s : {first_mention, second_mention}) {
      const int word = entity_word_index(doc.sentences[static_cast<size_t>(s)], gold_surface);
      if (word < 0) continue;
      const int pos = window.word_positions.at(s)[static_cast<size_t>(word)];
      if (pos >= 0) slot.gold_positions.push_back(pos);
    }
    std::sort(slot.gold_positions.begin(), slot.gold_positions.end());
    slot.gold_positions.erase(
        std::unique(slot.gold_positions.begin(), slot.gold_positions.end()),
        slot.gold_positions.end());
    if (slot.gold_positions.empty()) continue;
    instance.slots.push_back(std::move(slot));

    instance.metadata[kVoiceKey] = "active";
    const int nearest_before = intra ? first_mention : second_mention;
    const int distance = (n - 1) - nearest_before;
    if (distance == 1) {
      instance.metadata[kDistanceKey] = "one_before";
    } else if (distance == 2) {
      instance.metadata[kDistanceKey] = "two_before";
    } else {
      instance.metadata[kDistanceKey] = "more_than_two_before";
    }

    validate_zar_instance(instance);
    instances.push_back(std::move(instance));
  }
  return instances;
}

}  // namespace pzero
