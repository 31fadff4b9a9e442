// Generates a small entity-repetition demo dataset: a parsed corpus, a
// shared vocabulary, and ZAR train/dev/test splits with held-out test
// entities.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "pzero/corpus.hpp"
#include "pzero/synthdata.hpp"
#include "pzero/zar.hpp"

int main(int argc, char** argv) {
  CLI::App app{"entity-repetition demo data generator"};
  std::string out_dir = ".";
  int documents = 300;
  int entities = 120;
  int train_entities = 80;
  int train_instances = 256;
  int dev_instances = 64;
  int test_instances = 192;
  int t_max = 48;
  uint64_t seed = 101;
  app.add_option("--out-dir", out_dir, "output directory (must exist)");
  app.add_option("--documents", documents, "corpus documents");
  app.add_option("--entities", entities, "entity vocabulary size");
  app.add_option("--train-entities", train_entities, "entities reserved for train/dev");
  app.add_option("--train", train_instances, "ZAR training instances");
  app.add_option("--dev", dev_instances, "ZAR development instances");
  app.add_option("--test", test_instances, "ZAR test instances (held-out entities)");
  app.add_option("--t-max", t_max, "window token budget");
  app.add_option("--seed", seed, "generation seed");
  CLI11_PARSE(app, argc, argv);

  try {
    using namespace pzero;
    const Vocabulary vocab = synth_vocabulary(entities);
    vocab.save(out_dir + "/vocab.tsv");
    save_parsed_corpus(out_dir + "/corpus.jsonl",
                       make_entity_corpus({.documents = documents,
                                           .sentences_per_doc = 8,
                                           .entity_min = 0,
                                           .entity_max = entities,
                                           .seed = seed}));
    write_zar_instances(out_dir + "/zar_train.jsonl",
                        make_entity_zar({.instances = train_instances,
                                         .window_sentences = 4,
                                         .t_max = t_max,
                                         .entity_min = 0,
                                         .entity_max = train_entities,
                                         .seed = seed + 100},
                                        vocab));
    write_zar_instances(out_dir + "/zar_dev.jsonl",
                        make_entity_zar({.instances = dev_instances,
                                         .window_sentences = 4,
                                         .t_max = t_max,
                                         .entity_min = 0,
                                         .entity_max = train_entities,
                                         .seed = seed + 101},
                                        vocab));
    write_zar_instances(out_dir + "/zar_test.jsonl",
                        make_entity_zar({.instances = test_instances,
                                         .window_sentences = 4,
                                         .t_max = t_max,
                                         .entity_min = train_entities,
                                         .entity_max = entities,
                                         .seed = seed + 102},
                                        vocab));
    std::printf("wrote corpus.jsonl, vocab.tsv, zar_{train,dev,test}.jsonl under %s\n",
                out_dir.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
