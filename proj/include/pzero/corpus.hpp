#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace pzero {

// Closed 6-way POS tagset. Upstream parsers map their native tags onto this
// alphabet at ingestion time.
enum class Pos : uint8_t { NOUN, VERB, SYMBOL, PARTICLE, ALPHANUM, OTHER };

const char* pos_name(Pos pos);
Pos pos_from_name(const std::string& name);  // throws on unknown tag

struct Word {
  std::string surface;  // non-empty
  Pos pos = Pos::OTHER;
};

struct Phrase {
  std::vector<Word> words;  // non-empty
};

struct ParsedSentence {
  std::vector<Phrase> phrases;  // non-empty

  int word_count() const;
  // Flattened word access; index runs over phrases in order.
  const Word& word(int index) const;
};

struct Document {
  std::string id;
  std::vector<ParsedSentence> sentences;  // non-empty
};

using TokenId = int32_t;

// Fixed special-token ids. Stable across runs by construction.
namespace special {
constexpr TokenId kPad = 0;
constexpr TokenId kCls = 1;
constexpr TokenId kSep = 2;
constexpr TokenId kMask = 3;
constexpr TokenId kUnk = 4;
constexpr TokenId kNom = 5;
constexpr TokenId kAcc = 6;
constexpr TokenId kDat = 7;
constexpr int kCount = 8;

constexpr bool is_special(TokenId id) { return id >= 0 && id < kCount; }
const char* name(TokenId id);
}  // namespace special

// Surface <-> id map. Ids 0..7 are the specials; normal entries start at 8
// and are assigned deterministically (descending frequency, ties by
// lexicographically smaller surface). A surface that collides with a special
// token name is never entered; tokenizing it yields [UNK].
class Vocabulary {
 public:
  Vocabulary();

  // Adds a surface if absent; returns its id either way.
  TokenId add(const std::string& surface);

  // [UNK] for unknown surfaces and for surfaces spelled like special tokens.
  TokenId id_of(const std::string& surface) const;
  const std::string& surface_of(TokenId id) const;  // throws on bad id

  bool contains(const std::string& surface) const;
  int size() const { return static_cast<int>(surfaces_.size()); }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::unordered_map<std::string, TokenId> ids_;
  std::vector<std::string> surfaces_;
};

// Word span of one noun phrase. Word indices are 0-based offsets into the
// flattened word list of the sentence, end inclusive.
struct NPSpan {
  int sentence_index = 0;
  int word_start = 0;
  int word_end = 0;
  std::string surface_key;

  bool operator==(const NPSpan& other) const = default;
};

// Reads a line-delimited JSON corpus (one document per line). Malformed
// lines raise std::runtime_error naming the line number. An empty file is an
// empty corpus, not an error.
std::vector<Document> load_parsed_corpus(const std::string& path);

void save_parsed_corpus(const std::string& path, const std::vector<Document>& docs);

// Every surface with frequency >= min_count gets an id; the rest fall back
// to [UNK] at tokenization time.
Vocabulary build_vocabulary(const std::vector<Document>& docs, int min_count);

// Noun-phrase heuristic: a phrase qualifies if it contains at least one
// NOUN and no VERB; words are stripped from the end until a NOUN is last and
// SYMBOLs are stripped from the front. At most one span per phrase. The
// remainder is kept even if it is symbol/alphanumeric-only.
std::vector<NPSpan> extract_noun_phrases(const ParsedSentence& sentence,
                                         int sentence_index = 0);

// Concatenated word surfaces; the corpus is expected to be NFC-normalized
// upstream, so matching is exact byte equality.
std::string surface_key(const ParsedSentence& sentence, int word_start, int word_end);

}  // namespace pzero
