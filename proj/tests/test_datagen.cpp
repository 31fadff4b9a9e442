#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "pzero/datagen.hpp"
#include "pzero/rng.hpp"

using namespace pzero;

namespace {

Word w(const char* surface, Pos pos) { return Word{surface, pos}; }

// doc with two short sentences: "teachers wa meet . / teachers ga sing ."
Document teachers_doc() {
  Document doc;
  doc.id = "fig2";
  ParsedSentence s1;
  s1.phrases.push_back({{w("teachers", Pos::NOUN), w("wa", Pos::PARTICLE)}});
  s1.phrases.push_back({{w("meet", Pos::VERB)}});
  ParsedSentence s2;
  s2.phrases.push_back({{w("teachers", Pos::NOUN), w("ga", Pos::PARTICLE)}});
  s2.phrases.push_back({{w("sing", Pos::VERB)}});
  doc.sentences = {s1, s2};
  return doc;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("window holds both sentences when the document is shorter than n") {
  const Document doc = teachers_doc();
  const Vocabulary vocab = build_vocabulary({doc}, 1);
  const Window window = build_window(doc, 1, 4, 128, vocab);
  REQUIRE(window.usable);
  CHECK(window.first_sentence == 0);
  // [CLS] teachers wa meet [SEP] teachers ga sing [SEP]
  REQUIRE(window.token_ids.size() == 9);
  CHECK(window.token_ids[0] == special::kCls);
  CHECK(window.token_ids[4] == special::kSep);
  CHECK(window.token_ids[8] == special::kSep);
  CHECK(window.sentence_boundaries == std::vector<int>{4, 8});
  CHECK(window.word_positions.at(0)[0] == 1);
  CHECK(window.word_positions.at(1)[0] == 5);
  CHECK(window.token_ids[1] == window.token_ids[5]);  // same surface
}

TEST_CASE("window prunes from the beginning to fit T_max with [CLS]") {
  // One sentence of 20 words -> with its [SEP], raw length 21. Together with
  // [CLS] the total is 22; at T_max 17 five leading tokens must go.
  Document doc;
  doc.id = "long";
  ParsedSentence s;
  Phrase phrase;
  for (int i = 0; i < 20; ++i) {
    phrase.words.push_back(Word{"w" + std::to_string(i), Pos::OTHER});
  }
  s.phrases.push_back(phrase);
  doc.sentences.push_back(s);
  const Vocabulary vocab = build_vocabulary({doc}, 1);

  const Window window = build_window(doc, 0, 4, 17, vocab);
  REQUIRE(window.usable);
  CHECK(window.token_ids.size() == 17);
  CHECK(window.token_ids[0] == special::kCls);
  // words 0..4 pruned
  for (int i = 0; i < 5; ++i) CHECK(window.word_positions.at(0)[i] == -1);
  CHECK(window.word_positions.at(0)[5] == 1);
}

TEST_CASE("window that loses the whole last sentence is unusable") {
  Document doc;
  doc.id = "d";
  ParsedSentence s1;
  Phrase p1;
  for (int i = 0; i < 6; ++i) p1.words.push_back(Word{"x" + std::to_string(i), Pos::OTHER});
  s1.phrases.push_back(p1);
  ParsedSentence s2;
  Phrase p2;
  for (int i = 0; i < 20; ++i) p2.words.push_back(Word{"y" + std::to_string(i), Pos::OTHER});
  s2.phrases.push_back(p2);
  doc.sentences = {s2, s1};
  const Vocabulary vocab = build_vocabulary({doc}, 1);
  // Keep so little that only sentence 1's tail and separators survive.
  const Window window = build_window(doc, 1, 4, 8, vocab);
  CHECK(window.usable);
  const Window tiny = build_window(doc, 1, 4, 2, vocab);
  CHECK_FALSE(tiny.usable);
}

TEST_CASE("repeated NP in the last sentence is masked with the first as answer") {
  const Document doc = teachers_doc();
  const Vocabulary vocab = build_vocabulary({doc}, 1);
  const auto instances = emit_pzero_instances(doc, 4, 128, vocab);
  REQUIRE(instances.size() == 1);
  const PZeroInstance& instance = instances[0];
  CHECK(instance.doc_id == "fig2");
  CHECK(instance.mask_index == 5);
  CHECK(instance.token_ids[5] == special::kMask);
  CHECK(instance.answer_positions == std::vector<int>{1});
  validate(instance);
}

TEST_CASE("an NP occurring once in the window yields no instance") {
  Document doc;
  doc.id = "single";
  ParsedSentence s;
  s.phrases.push_back({{w("school", Pos::NOUN), w("to", Pos::PARTICLE)}});
  s.phrases.push_back({{w("go", Pos::VERB)}});
  doc.sentences.push_back(s);
  const Vocabulary vocab = build_vocabulary({doc}, 1);
  CHECK(emit_pzero_instances(doc, 4, 128, vocab).empty());
}

TEST_CASE("masking a 3-word NP shortens the sequence by 2") {
  Document doc;
  doc.id = "multi";
  ParsedSentence s1;
  s1.phrases.push_back({{w("new", Pos::NOUN), w("york", Pos::NOUN), w("city", Pos::NOUN)}});
  ParsedSentence s2;
  s2.phrases.push_back({{w("new", Pos::NOUN), w("york", Pos::NOUN), w("city", Pos::NOUN)}});
  doc.sentences = {s1, s2};
  const Vocabulary vocab = build_vocabulary({doc}, 1);
  const Window window = build_window(doc, 1, 4, 128, vocab);
  const auto instances = emit_pzero_instances(doc, 4, 128, vocab);
  // last = 0 gives no match (window is sentence 0 alone); last = 1 gives one.
  REQUIRE(instances.size() == 1);
  CHECK(instances[0].token_ids.size() == window.token_ids.size() - 2);
  // answer is the last token of the first occurrence: [CLS] new york city ...
  CHECK(instances[0].answer_positions == std::vector<int>{3});
}

TEST_CASE("postcedent matches after the mask are answers too") {
  Document doc;
  doc.id = "post";
  ParsedSentence s;
  s.phrases.push_back({{w("dog", Pos::NOUN), w("wa", Pos::PARTICLE)}});
  s.phrases.push_back({{w("dog", Pos::NOUN), w("wo", Pos::PARTICLE)}});
  doc.sentences.push_back(s);
  const Vocabulary vocab = build_vocabulary({doc}, 1);
  const auto instances = emit_pzero_instances(doc, 4, 128, vocab);
  REQUIRE(instances.size() == 2);
  // First instance masks the first "dog"; the answer lies after the mask.
  CHECK(instances[0].mask_index == 1);
  REQUIRE(instances[0].answer_positions.size() == 1);
  CHECK(instances[0].answer_positions[0] > instances[0].mask_index);
  // Second instance masks the second "dog"; the answer precedes the mask.
  CHECK(instances[1].answer_positions[0] < instances[1].mask_index);
}

TEST_CASE("gold distribution spreads equal mass over answers") {
  const GoldDistribution gold = gold_distribution({2, 6}, 10);
  REQUIRE(gold.probs.size() == 10);
  CHECK(gold.probs[2] == doctest::Approx(0.5));
  CHECK(gold.probs[6] == doctest::Approx(0.5));
  double sum = 0;
  for (double p : gold.probs) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  const GoldDistribution one = gold_distribution({4}, 8);
  CHECK(one.probs[4] == doctest::Approx(1.0));

  CHECK_THROWS_AS(gold_distribution({}, 8), std::runtime_error);
}

TEST_CASE("cloze masking is deterministic and never empty") {
  std::vector<TokenId> ids{special::kCls};
  for (int i = 0; i < 20; ++i) ids.push_back(special::kCount + i);
  ids.push_back(special::kSep);

  const ClozeInstance a = cloze_mask(ids, 0.15, 99);
  const ClozeInstance b = cloze_mask(ids, 0.15, 99);
  CHECK(a == b);
  CHECK_FALSE(a.masked_positions.empty());
  for (int pos : a.masked_positions) {
    CHECK(a.token_ids[static_cast<size_t>(pos)] == special::kMask);
    CHECK(a.original_ids.at(pos) == ids[static_cast<size_t>(pos)]);
  }
  CHECK(cloze_original_sequence(a) == ids);

  // Tiny rate: the resample floor leaves exactly one mask.
  const ClozeInstance tiny = cloze_mask(ids, 1e-6, 5);
  CHECK(tiny.masked_positions.size() == 1);

  const std::vector<TokenId> unmaskable{special::kCls, special::kSep};
  CHECK_THROWS_AS(cloze_mask(unmaskable, 0.15, 1), std::runtime_error);
}

TEST_CASE("cloze mask count matches the binomial mean over many seeds") {
  std::vector<TokenId> ids;
  for (int i = 0; i < 100; ++i) ids.push_back(special::kCount + i);
  double total = 0;
  const int seeds = 10000;
  for (int seed = 0; seed < seeds; ++seed) {
    total += static_cast<double>(cloze_mask(ids, 0.15, static_cast<uint64_t>(seed))
                                     .masked_positions.size());
  }
  const double mean = total / seeds;
  CHECK(mean > 14.0);
  CHECK(mean < 16.0);
}

TEST_CASE("instance files round trip and are byte-stable") {
  const Document doc = teachers_doc();
  const Vocabulary vocab = build_vocabulary({doc}, 1);
  const auto instances = emit_pzero_instances(doc, 4, 128, vocab);
  const std::string path = "/tmp/pzero_datagen_instances.jsonl";
  write_pzero_instances(path, instances);
  const auto loaded = read_pzero_instances(path);
  CHECK(loaded == instances);

  const std::string again = path + ".2";
  write_pzero_instances(again, loaded);
  CHECK(file_bytes(path) == file_bytes(again));

  // 1-based positions on disk
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line.find("\"m\":6") != std::string::npos);
  CHECK(line.find("\"a\":[2]") != std::string::npos);
}

TEST_CASE("cloze files round trip") {
  std::vector<TokenId> ids{special::kCls, 9, 10, 11, 12, special::kSep};
  const ClozeInstance instance = cloze_mask(ids, 0.5, 3);
  const std::string path = "/tmp/pzero_datagen_cloze.jsonl";
  write_cloze_instances(path, {instance});
  const auto loaded = read_cloze_instances(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0] == instance);
}

TEST_CASE("generated instances satisfy the type invariants") {
  Rng rng(4242);
  for (int trial = 0; trial < 100; ++trial) {
    const Document doc = oracles::random_document(rng, 5, 30);
    const Vocabulary vocab = build_vocabulary({doc}, 1);
    for (const auto& instance : emit_pzero_instances(doc, 4, 24, vocab)) {
      validate(instance);
      CHECK(instance.token_ids.size() <= 24);
    }
  }
}

TEST_CASE("instance generation matches the brute-force oracle") {
  Rng rng(31337);
  for (int trial = 0; trial < 200; ++trial) {
    const Document doc = oracles::random_document(rng, 5, 30);
    const Vocabulary vocab = build_vocabulary({doc}, 1);
    const auto fast = emit_pzero_instances(doc, 4, 24, vocab);
    const auto slow = oracles::brute_force_pzero(doc, 4, 24, vocab);

    std::vector<std::string> fast_keys, slow_keys;
    for (const auto& instance : fast) fast_keys.push_back(oracles::instance_key(instance));
    for (const auto& instance : slow) slow_keys.push_back(oracles::instance_key(instance));
    std::sort(fast_keys.begin(), fast_keys.end());
    std::sort(slow_keys.begin(), slow_keys.end());
    CHECK(fast_keys == slow_keys);
  }
}
