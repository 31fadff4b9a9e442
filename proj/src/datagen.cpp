#include "pzero/datagen.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "pzero/rng.hpp"

namespace pzero {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

}  // namespace

Window build_window(const Document& doc, int last_sentence_index, int n, int t_max,
                    const Vocabulary& vocab) {
  const int num_sentences = static_cast<int>(doc.sentences.size());
  if (last_sentence_index < 0 || last_sentence_index >= num_sentences) {
    fail("last_sentence_index out of range");
  }
  if (n < 1) fail("window size n must be >= 1");
  if (t_max < 2) fail("t_max too small for [CLS] plus content");

  const int first = std::max(0, last_sentence_index - n + 1);

  // Raw sequence: words with a [SEP] closing each sentence.
  std::vector<TokenId> raw;
  // (sentence, word) for each raw position; word == -1 marks a [SEP].
  std::vector<std::pair<int, int>> origin;
  for (int s = first; s <= last_sentence_index; ++s) {
    const ParsedSentence& sentence = doc.sentences[static_cast<size_t>(s)];
    const int words = sentence.word_count();
    for (int w = 0; w < words; ++w) {
      raw.push_back(vocab.id_of(sentence.word(w).surface));
      origin.emplace_back(s, w);
    }
    raw.push_back(special::kSep);
    origin.emplace_back(s, -1);
  }

  const int keep = t_max - 1;  // room for the prepended [CLS]
  const int drop = std::max(0, static_cast<int>(raw.size()) - keep);

  Window window;
  window.first_sentence = first;
  window.token_ids.push_back(special::kCls);
  for (int s = first; s <= last_sentence_index; ++s) {
    window.word_positions[s].assign(
        static_cast<size_t>(doc.sentences[static_cast<size_t>(s)].word_count()), -1);
  }
  for (size_t i = static_cast<size_t>(drop); i < raw.size(); ++i) {
    const int pos = static_cast<int>(window.token_ids.size());
    window.token_ids.push_back(raw[i]);
    const auto [s, w] = origin[i];
    if (w < 0) {
      window.sentence_boundaries.push_back(pos);
    } else {
      window.word_positions[s][static_cast<size_t>(w)] = pos;
    }
  }

  const auto& last_positions = window.word_positions[last_sentence_index];
  window.usable = std::any_of(last_positions.begin(), last_positions.end(),
                              [](int pos) { return pos >= 0; });
  return window;
}

std::vector<PZeroInstance> emit_pzero_instances(const Document& doc, int n, int t_max,
                                                const Vocabulary& vocab) {
  std::vector<PZeroInstance> instances;
  const int num_sentences = static_cast<int>(doc.sentences.size());

  std::vector<std::vector<NPSpan>> nps_by_sentence;
  nps_by_sentence.reserve(static_cast<size_t>(num_sentences));
  for (int s = 0; s < num_sentences; ++s) {
    nps_by_sentence.push_back(extract_noun_phrases(doc.sentences[static_cast<size_t>(s)], s));
  }

  for (int last = 0; last < num_sentences; ++last) {
    const Window window = build_window(doc, last, n, t_max, vocab);
    if (!window.usable) continue;

    for (const NPSpan& target : nps_by_sentence[static_cast<size_t>(last)]) {
      const auto& target_positions = window.word_positions.at(last);
      bool intact = true;
      for (int w = target.word_start; w <= target.word_end; ++w) {
        intact &= target_positions[static_cast<size_t>(w)] >= 0;
      }
      if (!intact) continue;
      const int span_start = target_positions[static_cast<size_t>(target.word_start)];
      const int span_end = target_positions[static_cast<size_t>(target.word_end)];

      // Same-surface NPs anywhere in the window, before or after the target.
      std::vector<int> answers;
      for (int s = window.first_sentence; s <= last; ++s) {
        for (const NPSpan& candidate : nps_by_sentence[static_cast<size_t>(s)]) {
          if (s == last && candidate.word_start == target.word_start) continue;
          if (candidate.surface_key != target.surface_key) continue;
          const int pos = window.word_positions.at(s)[static_cast<size_t>(candidate.word_end)];
          if (pos >= 0) answers.push_back(pos);
        }
      }
      if (answers.empty()) continue;

      PZeroInstance instance;
      instance.doc_id = doc.id;
      instance.token_ids.assign(window.token_ids.begin(),
                                window.token_ids.begin() + span_start);
      instance.token_ids.push_back(special::kMask);
      instance.token_ids.insert(instance.token_ids.end(),
                                window.token_ids.begin() + span_end + 1,
                                window.token_ids.end());
      instance.mask_index = span_start;
      const int shift = span_end - span_start;
      for (int pos : answers) {
        instance.answer_positions.push_back(pos > span_end ? pos - shift : pos);
      }
      std::sort(instance.answer_positions.begin(), instance.answer_positions.end());
      instances.push_back(std::move(instance));
    }
  }
  return instances;
}

GoldDistribution gold_distribution(const std::vector<int>& answer_positions, int t) {
  if (answer_positions.empty()) fail("gold_distribution: empty answer set");
  GoldDistribution gold;
  gold.probs.assign(static_cast<size_t>(t), 0.0);
  const double mass = 1.0 / static_cast<double>(answer_positions.size());
  for (int pos : answer_positions) {
    if (pos < 0 || pos >= t) fail("gold_distribution: position out of range");
    gold.probs[static_cast<size_t>(pos)] = mass;
  }
  return gold;
}

ClozeInstance cloze_mask(const std::vector<TokenId>& token_ids, double mask_rate,
                         uint64_t rng_seed) {
  if (mask_rate <= 0.0 || mask_rate >= 1.0) fail("mask_rate must be in (0,1)");
  std::vector<int> maskable;
  for (size_t i = 0; i < token_ids.size(); ++i) {
    if (!special::is_special(token_ids[i])) maskable.push_back(static_cast<int>(i));
  }
  if (maskable.empty()) fail("cloze_mask: sequence has no maskable position");

  Rng rng(rng_seed);
  ClozeInstance instance;
  while (instance.masked_positions.empty()) {
    for (int pos : maskable) {
      if (rng.uniform() < mask_rate) instance.masked_positions.push_back(pos);
    }
  }
  instance.token_ids = token_ids;
  for (int pos : instance.masked_positions) {
    instance.original_ids[pos] = token_ids[static_cast<size_t>(pos)];
    instance.token_ids[static_cast<size_t>(pos)] = special::kMask;
  }
  return instance;
}

void validate(const PZeroInstance& instance) {
  const int t = static_cast<int>(instance.token_ids.size());
  if (t == 0 || instance.token_ids[0] != special::kCls) fail("instance must start with [CLS]");
  int masks = 0;
  for (TokenId id : instance.token_ids) masks += id == special::kMask;
  if (masks != 1 || instance.mask_index < 0 || instance.mask_index >= t ||
      instance.token_ids[static_cast<size_t>(instance.mask_index)] != special::kMask) {
    fail("instance must carry exactly one [MASK] at mask_index");
  }
  if (instance.answer_positions.empty()) fail("instance with no answer positions");
  for (int pos : instance.answer_positions) {
    if (pos <= 0 || pos >= t || pos == instance.mask_index) {
      fail("answer position out of range: " + std::to_string(pos));
    }
  }
}

std::vector<TokenId> cloze_original_sequence(const ClozeInstance& instance) {
  std::vector<TokenId> ids = instance.token_ids;
  for (const auto& [pos, id] : instance.original_ids) ids[static_cast<size_t>(pos)] = id;
  return ids;
}

void write_pzero_instances(const std::string& path,
                           const std::vector<PZeroInstance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write instance file: " + path);
  for (const auto& instance : instances) {
    json answers = json::array();
    for (int pos : instance.answer_positions) answers.push_back(pos + 1);
    const json j{{"doc", instance.doc_id},
                 {"t", instance.token_ids},
                 {"m", instance.mask_index + 1},
                 {"a", std::move(answers)}};
    out << j.dump() << '\n';
  }
}

std::vector<PZeroInstance> read_pzero_instances(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read instance file: " + path);
  std::vector<PZeroInstance> instances;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      PZeroInstance instance;
      instance.doc_id = j.at("doc").get<std::string>();
      instance.token_ids = j.at("t").get<std::vector<TokenId>>();
      instance.mask_index = j.at("m").get<int>() - 1;
      for (const auto& pos : j.at("a")) instance.answer_positions.push_back(pos.get<int>() - 1);
      std::sort(instance.answer_positions.begin(), instance.answer_positions.end());
      validate(instance);
      instances.push_back(std::move(instance));
    } catch (const std::exception& e) {
      fail(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return instances;
}

void write_cloze_instances(const std::string& path,
                           const std::vector<ClozeInstance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write cloze file: " + path);
  for (const auto& instance : instances) {
    json positions = json::array();
    json originals = json::object();
    for (int pos : instance.masked_positions) {
      positions.push_back(pos + 1);
      originals[std::to_string(pos + 1)] = instance.original_ids.at(pos);
    }
    const json j{{"t", instance.token_ids}, {"mp", std::move(positions)},
                 {"orig", std::move(originals)}};
    out << j.dump() << '\n';
  }
}

std::vector<ClozeInstance> read_cloze_instances(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read cloze file: " + path);
  std::vector<ClozeInstance> instances;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      ClozeInstance instance;
      instance.token_ids = j.at("t").get<std::vector<TokenId>>();
      for (const auto& pos : j.at("mp")) instance.masked_positions.push_back(pos.get<int>() - 1);
      std::sort(instance.masked_positions.begin(), instance.masked_positions.end());
      for (const auto& [key, value] : j.at("orig").items()) {
        instance.original_ids[std::stoi(key) - 1] = value.get<TokenId>();
      }
      instances.push_back(std::move(instance));
    } catch (const std::exception& e) {
      fail(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return instances;
}

}  // namespace pzero
