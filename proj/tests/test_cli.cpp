#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/stat.h>

#include "pzero/corpus.hpp"
#include "pzero/synthdata.hpp"
#include "pzero/zar.hpp"

using namespace pzero;

namespace {

std::string cli_path() {
  const char* env = std::getenv("PZERO_CLI");
  REQUIRE(env != nullptr);
  return env;
}

int run(const std::string& args) {
  const std::string command = cli_path() + " " + args + " >/tmp/pzero_cli_stdout.txt 2>/tmp/pzero_cli_stderr.txt";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

const std::string kDir = "/tmp/pzero_cli_test";

void setup_dir() { mkdir(kDir.c_str(), 0755); }

std::string corpus_file() {
  setup_dir();
  const std::string path = kDir + "/corpus.jsonl";
  const std::vector<Document> docs = make_entity_corpus(
      {.documents = 10, .sentences_per_doc = 6, .entity_min = 0, .entity_max = 12, .seed = 5});
  save_parsed_corpus(path, docs);
  return path;
}

// Shared vocabulary so corpus windows and ZAR files agree on token ids.
std::string shared_vocab_file() {
  setup_dir();
  const std::string path = kDir + "/shared_vocab.tsv";
  synth_vocabulary(12).save(path);
  return path;
}

std::string zar_file(const std::string& name, int instances, uint64_t seed) {
  setup_dir();
  const std::string path = kDir + "/" + name;
  const Vocabulary vocab = synth_vocabulary(12);
  const auto data = make_entity_zar({.instances = instances,
                                     .window_sentences = 4,
                                     .t_max = 48,
                                     .entity_min = 0,
                                     .entity_max = 12,
                                     .seed = seed},
                                    vocab);
  write_zar_instances(path, data);
  return path;
}

}  // namespace

TEST_CASE("gen-pzero emits deterministic instances and stats") {
  const std::string corpus = corpus_file();
  REQUIRE(run("gen-pzero --corpus " + corpus + " --out " + kDir + "/inst_a.jsonl --vocab-out " +
              kDir + "/vocab.tsv --set T_max=48 --set seed=3") == 0);
  REQUIRE(run("gen-pzero --corpus " + corpus + " --out " + kDir + "/inst_b.jsonl --set T_max=48" +
              " --set seed=3") == 0);
  const std::string a = slurp(kDir + "/inst_a.jsonl");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(kDir + "/inst_b.jsonl"));

  const std::string stats = slurp(kDir + "/inst_a.jsonl.stats.json");
  CHECK(stats.find("\"instances\"") != std::string::npos);
  CHECK(stats.find("\"mean_answers\"") != std::string::npos);
  CHECK(stats.find("\"config_hash\"") != std::string::npos);
}

TEST_CASE("gen-pzero without recurring NPs exits nonzero with a diagnostic") {
  setup_dir();
  const std::string path = kDir + "/norepeat.jsonl";
  Document doc;
  doc.id = "solo";
  ParsedSentence s;
  s.phrases.push_back({{Word{"unique", Pos::NOUN}}});
  s.phrases.push_back({{Word{"runs", Pos::VERB}}});
  doc.sentences.push_back(s);
  save_parsed_corpus(path, {doc});
  CHECK(run("gen-pzero --corpus " + path + " --out " + kDir + "/none.jsonl") == 1);
  CHECK(slurp("/tmp/pzero_cli_stderr.txt").find("no instances") != std::string::npos);
}

TEST_CASE("evaluate without a predictions file is a usage error") {
  const std::string instances = zar_file("eval_only.jsonl", 4, 11);
  CHECK(run("evaluate --instances " + instances) != 0);
}

TEST_CASE("pipeline runs end to end and artifacts are byte-identical across runs") {
  const std::string corpus = corpus_file();
  const std::string vocab = shared_vocab_file();
  const std::string train = zar_file("train.jsonl", 24, 21);
  const std::string dev = zar_file("dev.jsonl", 8, 22);
  const std::string test = zar_file("test.jsonl", 8, 23);
  const std::string common =
      " --set T_max=48 --set D=32 --set ff_dim=64 --set seed=9 --set updates=6"
      " --set batch=8 --set eval_every=2 --set warmup_steps=4 --set epochs=2"
      " --set patience=2 --set threads=2";

  REQUIRE(run("gen-pzero --corpus " + corpus + " --out " + kDir + "/pz.jsonl --cloze-out " +
              kDir + "/cl.jsonl --vocab " + vocab + " --vocab-out " + kDir + "/vocab.tsv" +
              common) == 0);

  for (const char* tag : {"1", "2"}) {
    REQUIRE(run(std::string("pretrain --task pzero --instances ") + kDir + "/pz.jsonl" +
                " --vocab " + kDir + "/vocab.tsv --out " + kDir + "/ckpt_pz_" + tag +
                ".bin --metrics " + kDir + "/metrics_pz_" + tag + ".jsonl" + common) == 0);
    REQUIRE(run(std::string("finetune --model as-pzero --init-checkpoint ") + kDir +
                "/ckpt_pz_" + tag + ".bin --train " + train + " --dev " + dev + " --out " +
                kDir + "/ckpt_ft_" + tag + ".bin --metrics " + kDir + "/metrics_ft_" + tag +
                ".jsonl --predict " + test + " --predictions-out " + kDir + "/preds_" + tag +
                ".jsonl" + common) == 0);
    REQUIRE(run(std::string("evaluate --instances ") + test + " --predictions " + kDir +
                "/preds_" + tag + ".jsonl --report-out " + kDir + "/report_" + tag + common) ==
            0);
  }

  CHECK(slurp(kDir + "/ckpt_pz_1.bin") == slurp(kDir + "/ckpt_pz_2.bin"));
  CHECK(slurp(kDir + "/metrics_pz_1.jsonl") == slurp(kDir + "/metrics_pz_2.jsonl"));
  CHECK(slurp(kDir + "/ckpt_ft_1.bin") == slurp(kDir + "/ckpt_ft_2.bin"));
  CHECK(slurp(kDir + "/preds_1.jsonl") == slurp(kDir + "/preds_2.jsonl"));
  CHECK(slurp(kDir + "/report_1.json") == slurp(kDir + "/report_2.json"));
  CHECK_FALSE(slurp(kDir + "/report_1.json").empty());

  SUBCASE("cloze pretraining also runs") {
    REQUIRE(run(std::string("pretrain --task cloze --instances ") + kDir + "/cl.jsonl" +
                " --vocab " + kDir + "/vocab.tsv --out " + kDir + "/ckpt_cl.bin" + common) == 0);
  }

  SUBCASE("analyze renders all three axes") {
    for (const char* axis : {"antecedents", "distance", "voice"}) {
      REQUIRE(run(std::string("analyze --axis ") + axis + " --instances " + test +
                  " --predictions " + kDir + "/preds_1.jsonl --out " + kDir + "/bd_" + axis +
                  ".json") == 0);
      CHECK_FALSE(slurp(kDir + "/bd_" + std::string(axis) + ".json").empty());
    }
  }

  SUBCASE("evaluate enforces required categories") {
    CHECK(run(std::string("evaluate --instances ") + test + " --predictions " + kDir +
              "/preds_1.jsonl --require-categories intra,inter" + common) == 0);
    CHECK(run(std::string("evaluate --instances ") + test + " --predictions " + kDir +
              "/preds_1.jsonl --require-categories exophoric" + common) == 4);
  }

  SUBCASE("mismatched checkpoint and instances fail cleanly") {
    // A checkpoint built on a different vocabulary size cannot score these ids.
    const std::string tiny_vocab = kDir + "/tiny_vocab.tsv";
    synth_vocabulary(2).save(tiny_vocab);
    CHECK(run(std::string("pretrain --task pzero --instances ") + kDir + "/pz.jsonl" +
              " --vocab " + tiny_vocab + " --out " + kDir + "/bad.bin" + common) == 1);
  }
}

TEST_CASE("grid emits six labeled reports plus significance") {
  const std::string corpus = corpus_file();
  const std::string train = zar_file("gtrain.jsonl", 16, 31);
  const std::string dev = zar_file("gdev.jsonl", 6, 32);
  const std::string test = zar_file("gtest.jsonl", 6, 33);
  const std::string out_dir = kDir + "/grid";
  mkdir(out_dir.c_str(), 0755);

  REQUIRE(run("grid --corpus " + corpus + " --vocab " + shared_vocab_file() + " --zar-train " +
              train + " --zar-dev " + dev + " --zar-test " + test + " --out-dir " + out_dir +
              " --set T_max=48 --set D=16 --set ff_dim=32 --set heads=2 --set layers=1" +
              " --set seed=2 --set updates=4 --set batch=8 --set epochs=1 --set patience=1" +
              " --set warmup_steps=2 --set eval_every=2 --set threads=2") == 0);

  for (char id : {'f', 'g', 'h', 'i', 'j', 'k'}) {
    const std::string report = slurp(out_dir + "/report_" + std::string(1, id) + ".json");
    CHECK_FALSE(report.empty());
    CHECK(report.find("\"zar-all\"") != std::string::npos);
  }
  const std::string significance = slurp(out_dir + "/significance.json");
  CHECK(significance.find("\"p_value\"") != std::string::npos);
  CHECK(significance.find("k_vs_h") != std::string::npos);
}
