#include "pzero/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace pzero {

using nlohmann::json;

namespace {

const char* kPosNames[] = {"NOUN", "VERB", "SYMBOL", "PARTICLE", "ALPHANUM", "OTHER"};

const char* kSpecialNames[] = {"[PAD]", "[CLS]", "[SEP]", "[MASK]",
                               "[UNK]", "[NOM]", "[ACC]", "[DAT]"};

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

}  // namespace

const char* pos_name(Pos pos) { return kPosNames[static_cast<int>(pos)]; }

Pos pos_from_name(const std::string& name) {
  for (int i = 0; i < 6; ++i) {
    if (name == kPosNames[i]) return static_cast<Pos>(i);
  }
  fail("unknown POS tag: " + name);
}

namespace special {
const char* name(TokenId id) { return kSpecialNames[id]; }
}  // namespace special

int ParsedSentence::word_count() const {
  int n = 0;
  for (const auto& phrase : phrases) n += static_cast<int>(phrase.words.size());
  return n;
}

const Word& ParsedSentence::word(int index) const {
  for (const auto& phrase : phrases) {
    if (index < static_cast<int>(phrase.words.size())) return phrase.words[index];
    index -= static_cast<int>(phrase.words.size());
  }
  fail("word index out of range");
}

Vocabulary::Vocabulary() {
  for (TokenId id = 0; id < special::kCount; ++id) {
    surfaces_.emplace_back(special::name(id));
  }
}

TokenId Vocabulary::add(const std::string& surface) {
  auto it = ids_.find(surface);
  if (it != ids_.end()) return it->second;
  for (TokenId id = 0; id < special::kCount; ++id) {
    if (surface == special::name(id)) return special::kUnk;
  }
  const TokenId id = static_cast<TokenId>(surfaces_.size());
  ids_.emplace(surface, id);
  surfaces_.push_back(surface);
  return id;
}

TokenId Vocabulary::id_of(const std::string& surface) const {
  auto it = ids_.find(surface);
  return it == ids_.end() ? special::kUnk : it->second;
}

const std::string& Vocabulary::surface_of(TokenId id) const {
  if (id < 0 || id >= size()) fail("token id out of range: " + std::to_string(id));
  return surfaces_[static_cast<size_t>(id)];
}

bool Vocabulary::contains(const std::string& surface) const {
  return ids_.count(surface) != 0;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write vocabulary file: " + path);
  for (TokenId id = 0; id < size(); ++id) {
    out << id << '\t' << surfaces_[static_cast<size_t>(id)] << '\n';
  }
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read vocabulary file: " + path);
  Vocabulary vocab;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      fail("vocabulary file " + path + ": missing tab on line " + std::to_string(line_no));
    }
    const TokenId id = static_cast<TokenId>(std::stol(line.substr(0, tab)));
    const std::string surface = line.substr(tab + 1);
    if (id < special::kCount) {
      if (surface != special::name(id)) {
        fail("vocabulary file " + path + ": special id mismatch on line " +
             std::to_string(line_no));
      }
      continue;
    }
    if (id != vocab.size()) {
      fail("vocabulary file " + path + ": ids not contiguous on line " +
           std::to_string(line_no));
    }
    vocab.ids_.emplace(surface, id);
    vocab.surfaces_.push_back(surface);
  }
  return vocab;
}

namespace {

Word word_from_json(const json& j, int line_no) {
  if (!j.contains("s") || !j.contains("p")) {
    fail("line " + std::to_string(line_no) + ": word record missing \"s\" or \"p\"");
  }
  Word word;
  word.surface = j.at("s").get<std::string>();
  word.pos = pos_from_name(j.at("p").get<std::string>());
  if (word.surface.empty()) {
    fail("line " + std::to_string(line_no) + ": empty word surface");
  }
  return word;
}

json word_to_json(const Word& word) {
  return json{{"s", word.surface}, {"p", pos_name(word.pos)}};
}

}  // namespace

std::vector<Document> load_parsed_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read corpus file: " + path);
  std::vector<Document> docs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    Document doc;
    if (!j.contains("id") || !j.contains("sentences")) {
      fail("line " + std::to_string(line_no) + ": document missing \"id\" or \"sentences\"");
    }
    doc.id = j.at("id").get<std::string>();
    for (const auto& js : j.at("sentences")) {
      if (!js.contains("phrases")) {
        fail("line " + std::to_string(line_no) + ": sentence missing \"phrases\"");
      }
      ParsedSentence sentence;
      for (const auto& jp : js.at("phrases")) {
        if (!jp.contains("words")) {
          fail("line " + std::to_string(line_no) + ": phrase missing \"words\"");
        }
        Phrase phrase;
        for (const auto& jw : jp.at("words")) phrase.words.push_back(word_from_json(jw, line_no));
        if (phrase.words.empty()) {
          fail("line " + std::to_string(line_no) + ": empty phrase");
        }
        sentence.phrases.push_back(std::move(phrase));
      }
      if (sentence.phrases.empty()) {
        fail("line " + std::to_string(line_no) + ": sentence with no phrases");
      }
      doc.sentences.push_back(std::move(sentence));
    }
    if (doc.sentences.empty()) {
      fail("line " + std::to_string(line_no) + ": document with no sentences");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_parsed_corpus(const std::string& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write corpus file: " + path);
  for (const auto& doc : docs) {
    json sentences = json::array();
    for (const auto& sentence : doc.sentences) {
      json phrases = json::array();
      for (const auto& phrase : sentence.phrases) {
        json words = json::array();
        for (const auto& word : phrase.words) words.push_back(word_to_json(word));
        phrases.push_back(json{{"words", std::move(words)}});
      }
      sentences.push_back(json{{"phrases", std::move(phrases)}});
    }
    out << json{{"id", doc.id}, {"sentences", std::move(sentences)}}.dump() << '\n';
  }
}

Vocabulary build_vocabulary(const std::vector<Document>& docs, int min_count) {
  if (min_count < 1) fail("min_count must be >= 1");
  // std::map keeps surfaces sorted, which settles frequency ties.
  std::map<std::string, long> counts;
  for (const auto& doc : docs) {
    for (const auto& sentence : doc.sentences) {
      for (const auto& phrase : sentence.phrases) {
        for (const auto& word : phrase.words) ++counts[word.surface];
      }
    }
  }
  std::vector<std::pair<std::string, long>> entries;
  entries.reserve(counts.size());
  for (const auto& [surface, count] : counts) {
    if (count >= min_count) entries.emplace_back(surface, count);
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (const auto& [surface, count] : entries) vocab.add(surface);
  return vocab;
}

std::string surface_key(const ParsedSentence& sentence, int word_start, int word_end) {
  std::string key;
  for (int i = word_start; i <= word_end; ++i) key += sentence.word(i).surface;
  return key;
}

std::vector<NPSpan> extract_noun_phrases(const ParsedSentence& sentence, int sentence_index) {
  std::vector<NPSpan> spans;
  int offset = 0;
  for (const auto& phrase : sentence.phrases) {
    const int n = static_cast<int>(phrase.words.size());
    bool has_noun = false;
    bool has_verb = false;
    for (const auto& word : phrase.words) {
      has_noun |= word.pos == Pos::NOUN;
      has_verb |= word.pos == Pos::VERB;
    }
    if (has_noun && !has_verb) {
      int end = n - 1;
      while (phrase.words[static_cast<size_t>(end)].pos != Pos::NOUN) --end;
      int start = 0;
      while (start < end && phrase.words[static_cast<size_t>(start)].pos == Pos::SYMBOL) ++start;
      NPSpan span;
      span.sentence_index = sentence_index;
      span.word_start = offset + start;
      span.word_end = offset + end;
      span.surface_key = surface_key(sentence, span.word_start, span.word_end);
      spans.push_back(std::move(span));
    }
    offset += n;
  }
  return spans;
}

}  // namespace pzero
