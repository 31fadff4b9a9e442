// Test-only brute-force oracles, kept independent of the library's
// implementation paths they check.
#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "pzero/corpus.hpp"
#include "pzero/datagen.hpp"
#include "pzero/rng.hpp"

namespace oracles {

using namespace pzero;

// Literal four-step noun-phrase rule, slice-based.
inline std::optional<std::pair<int, int>> reference_np_span(const std::vector<Word>& words) {
  bool has_noun = false;
  bool has_verb = false;
  for (const auto& word : words) {
    has_noun = has_noun || word.pos == Pos::NOUN;
    has_verb = has_verb || word.pos == Pos::VERB;
  }
  if (!has_noun || has_verb) return std::nullopt;
  int end = -1;
  for (int i = static_cast<int>(words.size()) - 1; i >= 0; --i) {
    if (words[static_cast<size_t>(i)].pos == Pos::NOUN) {
      end = i;
      break;
    }
  }
  int start = end;
  for (int i = 0; i <= end; ++i) {
    if (words[static_cast<size_t>(i)].pos != Pos::SYMBOL) {
      start = i;
      break;
    }
  }
  return std::make_pair(start, end);
}

struct RefNP {
  int sentence = 0;
  int word_start = 0;
  int word_end = 0;
  std::string key;
};

inline std::vector<RefNP> reference_nps(const ParsedSentence& sentence, int sentence_index) {
  std::vector<RefNP> nps;
  int offset = 0;
  for (const auto& phrase : sentence.phrases) {
    const auto span = reference_np_span(phrase.words);
    if (span) {
      RefNP np;
      np.sentence = sentence_index;
      np.word_start = offset + span->first;
      np.word_end = offset + span->second;
      for (int i = span->first; i <= span->second; ++i) {
        np.key += phrase.words[static_cast<size_t>(i)].surface;
      }
      nps.push_back(std::move(np));
    }
    offset += static_cast<int>(phrase.words.size());
  }
  return nps;
}

// Brute-force instance generation: literal splice-based windowing and
// masking, with answers located by tag scans.
inline std::vector<PZeroInstance> brute_force_pzero(const Document& doc, int n, int t_max,
                                                    const Vocabulary& vocab) {
  std::vector<PZeroInstance> instances;
  const int num_sentences = static_cast<int>(doc.sentences.size());

  for (int last = 0; last < num_sentences; ++last) {
    const int first = std::max(0, last - n + 1);
    std::vector<TokenId> tokens;
    std::vector<std::pair<int, int>> tags;  // (sentence, word); (-1,-1) special
    for (int s = first; s <= last; ++s) {
      const ParsedSentence& sentence = doc.sentences[static_cast<size_t>(s)];
      for (int word = 0; word < sentence.word_count(); ++word) {
        tokens.push_back(vocab.id_of(sentence.word(word).surface));
        tags.emplace_back(s, word);
      }
      tokens.push_back(special::kSep);
      tags.emplace_back(s, -1);
    }
    while (static_cast<int>(tokens.size()) > t_max - 1) {
      tokens.erase(tokens.begin());
      tags.erase(tags.begin());
    }
    tokens.insert(tokens.begin(), special::kCls);
    tags.insert(tags.begin(), {-1, -1});

    const bool last_survives =
        std::any_of(tags.begin(), tags.end(), [last](const std::pair<int, int>& tag) {
          return tag.first == last && tag.second >= 0;
        });
    if (!last_survives) continue;

    std::vector<std::vector<RefNP>> nps;
    for (int s = 0; s < num_sentences; ++s) {
      nps.push_back(reference_nps(doc.sentences[static_cast<size_t>(s)], s));
    }

    auto find_tag = [&tags](int sentence, int word) {
      for (size_t i = 0; i < tags.size(); ++i) {
        if (tags[i].first == sentence && tags[i].second == word) return static_cast<int>(i);
      }
      return -1;
    };

    for (const RefNP& target : nps[static_cast<size_t>(last)]) {
      bool intact = true;
      for (int word = target.word_start; word <= target.word_end; ++word) {
        intact = intact && find_tag(last, word) >= 0;
      }
      if (!intact) continue;

      std::vector<std::pair<int, int>> matches;  // (sentence, last word)
      for (int s = first; s <= last; ++s) {
        for (const RefNP& other : nps[static_cast<size_t>(s)]) {
          if (s == last && other.word_start == target.word_start) continue;
          if (other.key != target.key) continue;
          if (find_tag(s, other.word_end) >= 0) matches.emplace_back(s, other.word_end);
        }
      }
      if (matches.empty()) continue;

      // Splice: replace the target NP's tokens with one [MASK].
      std::vector<TokenId> masked_tokens;
      std::vector<std::pair<int, int>> masked_tags;
      int mask_index = -1;
      for (size_t i = 0; i < tokens.size(); ++i) {
        const auto [s, word] = tags[i];
        if (s == last && word >= target.word_start && word <= target.word_end) {
          if (word == target.word_start) {
            mask_index = static_cast<int>(masked_tokens.size());
            masked_tokens.push_back(special::kMask);
            masked_tags.emplace_back(-2, -2);
          }
          continue;
        }
        masked_tokens.push_back(tokens[i]);
        masked_tags.push_back(tags[i]);
      }

      PZeroInstance instance;
      instance.doc_id = doc.id;
      instance.token_ids = masked_tokens;
      instance.mask_index = mask_index;
      for (const auto& [s, word] : matches) {
        for (size_t i = 0; i < masked_tags.size(); ++i) {
          if (masked_tags[i].first == s && masked_tags[i].second == word) {
            instance.answer_positions.push_back(static_cast<int>(i));
          }
        }
      }
      std::sort(instance.answer_positions.begin(), instance.answer_positions.end());
      instances.push_back(std::move(instance));
    }
  }
  return instances;
}

// Random corpora over a small surface pool so same-surface NPs recur.
inline Document random_document(Rng& rng, int max_sentences, int max_total_words) {
  const Pos alphabet[] = {Pos::NOUN, Pos::VERB,     Pos::SYMBOL,
                          Pos::PARTICLE, Pos::ALPHANUM, Pos::OTHER};
  const char* surfaces[] = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  Document doc;
  doc.id = "rand";
  const int sentences = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(max_sentences)));
  int budget = max_total_words;
  for (int s = 0; s < sentences; ++s) {
    ParsedSentence sentence;
    const int phrases = 1 + static_cast<int>(rng.below(3));
    for (int p = 0; p < phrases && budget > 0; ++p) {
      Phrase phrase;
      const int words = 1 + static_cast<int>(rng.below(3));
      for (int word = 0; word < words && budget > 0; ++word, --budget) {
        phrase.words.push_back(Word{surfaces[rng.below(10)], alphabet[rng.below(6)]});
      }
      if (!phrase.words.empty()) sentence.phrases.push_back(std::move(phrase));
    }
    if (sentence.phrases.empty()) {
      sentence.phrases.push_back(Phrase{{Word{surfaces[rng.below(10)], Pos::OTHER}}});
    }
    doc.sentences.push_back(std::move(sentence));
  }
  return doc;
}

inline std::string instance_key(const PZeroInstance& instance) {
  std::string key = instance.doc_id + "|m" + std::to_string(instance.mask_index) + "|t";
  for (TokenId id : instance.token_ids) key += std::to_string(id) + ",";
  key += "|a";
  for (int pos : instance.answer_positions) key += std::to_string(pos) + ",";
  return key;
}

}  // namespace oracles
