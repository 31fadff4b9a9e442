// Command-line driver wiring corpus ingestion, pseudo-data generation,
// pretraining, finetuning, evaluation, analysis, and the experiment grid.

#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pzero/backprop.hpp"
#include "pzero/config.hpp"
#include "pzero/corpus.hpp"
#include "pzero/datagen.hpp"
#include "pzero/eval.hpp"
#include "pzero/model.hpp"
#include "pzero/synthdata.hpp"
#include "pzero/train.hpp"
#include "pzero/zar.hpp"

namespace {

using namespace pzero;
using nlohmann::json;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;

  RunConfig load() const {
    RunConfig config;
    if (!config_path.empty()) config.merge_file(config_path);
    for (const auto& pair : overrides) {
      const auto eq = pair.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error("--set expects key=value, got: " + pair);
      }
      config.set(pair.substr(0, eq), pair.substr(eq + 1));
    }
    return config;
  }
};

void add_common(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--config", options.config_path, "flat key=value config file");
  cmd->add_option("--set", options.overrides, "override config entries (key=value; flags win)");
}

int run_gen_pzero(const CommonOptions& common, const std::string& corpus_path,
                  const std::string& out_path, const std::string& cloze_out,
                  const std::string& vocab_in, const std::string& vocab_out) {
  const RunConfig config = common.load();
  const int n = static_cast<int>(config.get_int("n", 4));
  const int t_max = static_cast<int>(config.get_int("T_max", 128));
  const int min_count = static_cast<int>(config.get_int("min_count", 1));
  const uint64_t seed = config.seed();

  const std::vector<Document> docs = load_parsed_corpus(corpus_path);
  const Vocabulary vocab =
      vocab_in.empty() ? build_vocabulary(docs, min_count) : Vocabulary::load(vocab_in);
  if (!vocab_out.empty()) vocab.save(vocab_out);

  std::vector<PZeroInstance> instances;
  for (const auto& doc : docs) {
    const auto emitted = emit_pzero_instances(doc, n, t_max, vocab);
    instances.insert(instances.end(), emitted.begin(), emitted.end());
  }
  if (instances.empty()) {
    std::fprintf(stderr,
                 "gen-pzero: no instances generated (no NP in the corpus recurs within a "
                 "%d-sentence window)\n",
                 n);
    return 1;
  }
  write_pzero_instances(out_path, instances);

  if (!cloze_out.empty()) {
    std::vector<ClozeInstance> cloze;
    const double mask_rate = config.get_double("mask_rate", 0.15);
    size_t window_index = 0;
    for (const auto& doc : docs) {
      for (size_t s = 0; s < doc.sentences.size(); ++s, ++window_index) {
        const Window window = build_window(doc, static_cast<int>(s), n, t_max, vocab);
        if (!window.usable) continue;
        cloze.push_back(cloze_mask(window.token_ids, mask_rate, mix64(seed, 0xC102e, window_index)));
      }
    }
    write_cloze_instances(cloze_out, cloze);
  }

  size_t total_answers = 0;
  for (const auto& instance : instances) total_answers += instance.answer_positions.size();
  const json stats{{"config_hash", config.hash_hex()},
                   {"seed", seed},
                   {"instances", instances.size()},
                   {"mean_answers",
                    static_cast<double>(total_answers) / static_cast<double>(instances.size())},
                   {"documents", docs.size()},
                   {"vocab_size", vocab.size()}};
  std::ofstream stats_out(out_path + ".stats.json", std::ios::binary);
  stats_out << stats.dump(2) << '\n';
  std::printf("%s\n", stats.dump().c_str());
  return 0;
}

int run_pretrain(const CommonOptions& common, const std::string& task_name,
                 const std::string& instances_path, const std::string& vocab_path,
                 const std::string& out_path, const std::string& metrics_path,
                 const std::string& init_checkpoint) {
  const RunConfig config = common.load();
  const Vocabulary vocab = Vocabulary::load(vocab_path);
  const ModelConfig model_config = config.model_config(vocab.size());
  const TrainOptions options = config.train_options(Schedule::Kind::InverseSqrt);

  PretrainTask task;
  PretrainData data;
  if (task_name == "pzero") {
    task = PretrainTask::PZero;
    data.pzero = read_pzero_instances(instances_path);
  } else if (task_name == "cloze") {
    task = PretrainTask::Cloze;
    data.cloze = read_cloze_instances(instances_path);
  } else {
    throw std::runtime_error("unknown pretraining task: " + task_name);
  }

  Parameters<float> initial;
  const Parameters<float>* initial_ptr = nullptr;
  if (!init_checkpoint.empty()) {
    initial = load_checkpoint(init_checkpoint);
    initial_ptr = &initial;
  }

  const TrainResult result = pretrain(task, data, model_config, options, initial_ptr);
  save_checkpoint(out_path, result.params, options.seed, config.hash());
  if (!metrics_path.empty()) {
    write_metrics(metrics_path, result.metrics, config.hash_hex(), options.seed);
  }
  std::printf("pretrain %s: %lld updates, final loss %.6f acc %.4f\n", task_name.c_str(),
              static_cast<long long>(options.updates), result.metrics.back().loss,
              result.metrics.back().acc);
  return 0;
}

int run_finetune(const CommonOptions& common, const std::string& model_name,
                 const std::string& init_checkpoint, const std::string& train_path,
                 const std::string& dev_path, const std::string& out_path,
                 const std::string& metrics_path, const std::string& predict_path,
                 const std::string& predictions_out) {
  const RunConfig config = common.load();
  const TrainOptions options = config.train_options(Schedule::Kind::FinetuneDefault);

  FinetuneModel model;
  if (model_name == "as") {
    model = FinetuneModel::AS;
  } else if (model_name == "as-pzero") {
    model = FinetuneModel::ASPZero;
  } else {
    throw std::runtime_error("unknown finetuning model: " + model_name);
  }

  const Parameters<float> initial = load_checkpoint(init_checkpoint);
  const std::vector<ZarInstance> train_instances = read_zar_instances(train_path);
  std::vector<ZarInstance> dev_instances;
  if (!dev_path.empty()) dev_instances = read_zar_instances(dev_path);

  const TrainResult result = finetune(model, initial, train_instances,
                                      dev_path.empty() ? nullptr : &dev_instances, options);
  save_checkpoint(out_path, result.params, options.seed, config.hash());
  if (!metrics_path.empty()) {
    write_metrics(metrics_path, result.metrics, config.hash_hex(), options.seed);
  }
  if (!predict_path.empty()) {
    if (predictions_out.empty()) {
      throw std::runtime_error("--predict requires --predictions-out");
    }
    const std::vector<ZarInstance> targets = read_zar_instances(predict_path);
    write_predictions(predictions_out, predict(model, result.params, targets));
  }
  std::printf("finetune %s: %zu epochs logged, final loss %.6f acc %.4f\n", model_name.c_str(),
              result.metrics.size(),
              result.metrics.empty() ? 0.0 : result.metrics.back().loss,
              result.metrics.empty() ? 0.0 : result.metrics.back().acc);
  return 0;
}

int run_evaluate(const CommonOptions& common, const std::string& instances_path,
                 const std::string& predictions_path, const std::string& report_prefix,
                 const std::string& require_categories) {
  const RunConfig config = common.load();
  const std::vector<ZarInstance> instances = read_zar_instances(instances_path);
  const std::vector<Prediction> predictions = read_predictions(predictions_path);
  const EvalReport report = score(predictions, instances);

  const std::string json_text = report_to_json(report, config.hash_hex(), config.seed());
  if (!report_prefix.empty()) {
    std::ofstream out(report_prefix + ".json", std::ios::binary);
    out << json_text << '\n';
  }
  std::printf("%s", report_to_table(report).c_str());

  if (!require_categories.empty()) {
    std::string remaining = require_categories;
    while (!remaining.empty()) {
      const auto comma = remaining.find(',');
      const std::string name = remaining.substr(0, comma);
      remaining = comma == std::string::npos ? "" : remaining.substr(comma + 1);
      const EvalCategory category = eval_category_from_name(name);
      if (report.categories.at(category).gold == 0) {
        std::fprintf(stderr, "evaluate: category %s has zero gold instances\n", name.c_str());
        return 4;
      }
    }
  }
  return 0;
}

int run_analyze(const CommonOptions& common, const std::string& axis_name,
                const std::string& instances_path, const std::string& predictions_path,
                const std::string& out_path) {
  const RunConfig config = common.load();
  const std::vector<ZarInstance> instances = read_zar_instances(instances_path);
  const std::vector<Prediction> predictions = read_predictions(predictions_path);
  const Breakdown result = breakdown(predictions, instances, breakdown_axis_from_name(axis_name));
  std::printf("%s", breakdown_to_table(result).c_str());
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    out << breakdown_to_json(result, config.hash_hex(), config.seed()) << '\n';
  }
  return 0;
}

struct GridCell {
  char id;
  const char* pretask;  // "none", "cloze", "pzero"
  FinetuneModel model;
};

int run_grid(const CommonOptions& common, const std::string& corpus_path,
             const std::string& train_path, const std::string& dev_path,
             const std::string& test_path, const std::string& out_dir,
             const std::string& vocab_in) {
  const RunConfig config = common.load();
  const int n = static_cast<int>(config.get_int("n", 4));
  const int t_max = static_cast<int>(config.get_int("T_max", 64));
  const uint64_t seed = config.seed();

  const std::vector<Document> docs = load_parsed_corpus(corpus_path);
  const Vocabulary vocab =
      vocab_in.empty()
          ? build_vocabulary(docs, static_cast<int>(config.get_int("min_count", 1)))
          : Vocabulary::load(vocab_in);
  const ModelConfig model_config = config.model_config(vocab.size());

  PretrainData data;
  size_t window_index = 0;
  for (const auto& doc : docs) {
    const auto emitted = emit_pzero_instances(doc, n, t_max, vocab);
    data.pzero.insert(data.pzero.end(), emitted.begin(), emitted.end());
    for (size_t s = 0; s < doc.sentences.size(); ++s, ++window_index) {
      const Window window = build_window(doc, static_cast<int>(s), n, t_max, vocab);
      if (!window.usable) continue;
      data.cloze.push_back(cloze_mask(window.token_ids, config.get_double("mask_rate", 0.15),
                                      mix64(seed, 0xC102e, window_index)));
    }
  }
  if (data.pzero.empty()) {
    std::fprintf(stderr, "grid: corpus yields no PZero instances\n");
    return 1;
  }

  const std::vector<ZarInstance> train_instances = read_zar_instances(train_path);
  const std::vector<ZarInstance> dev_instances = read_zar_instances(dev_path);
  const std::vector<ZarInstance> test_instances = read_zar_instances(test_path);

  TrainOptions pretrain_options = config.train_options(Schedule::Kind::InverseSqrt);
  TrainOptions finetune_options = config.train_options(Schedule::Kind::FinetuneDefault);
  finetune_options.schedule.max_lr = config.get_double("finetune_max_lr", 1e-3);
  finetune_options.schedule.warmup_steps =
      static_cast<int>(config.get_int("finetune_warmup_steps", 20));

  // Three pretraining states: none (random init), further Cloze, further PZero.
  const Parameters<float> base = init_parameters<float>(model_config, seed);
  std::printf("grid: pretraining cloze (%lld updates)\n",
              static_cast<long long>(pretrain_options.updates));
  const Parameters<float> cloze_params =
      pretrain(PretrainTask::Cloze, data, model_config, pretrain_options, &base).params;
  std::printf("grid: pretraining pzero (%lld updates)\n",
              static_cast<long long>(pretrain_options.updates));
  const Parameters<float> pzero_params =
      pretrain(PretrainTask::PZero, data, model_config, pretrain_options, &base).params;

  const GridCell cells[] = {
      {'f', "none", FinetuneModel::AS},    {'g', "none", FinetuneModel::ASPZero},
      {'h', "cloze", FinetuneModel::AS},   {'i', "cloze", FinetuneModel::ASPZero},
      {'j', "pzero", FinetuneModel::AS},   {'k', "pzero", FinetuneModel::ASPZero},
  };

  std::map<char, std::vector<uint8_t>> flags_by_cell;
  for (const GridCell& cell : cells) {
    const Parameters<float>& start = cell.pretask == std::string("none")
                                         ? base
                                         : (cell.pretask == std::string("cloze") ? cloze_params
                                                                                 : pzero_params);
    std::printf("grid: cell (%c) %s + %s\n", cell.id, cell.pretask,
                cell.model == FinetuneModel::AS ? "AS" : "AS-PZero");
    const TrainResult tuned =
        finetune(cell.model, start, train_instances, &dev_instances, finetune_options);
    const std::vector<Prediction> predictions =
        predict(cell.model, tuned.params, test_instances);
    const EvalReport report = score(predictions, test_instances);
    flags_by_cell[cell.id] = correctness_flags(predictions, test_instances);

    const std::string prefix = out_dir + "/report_" + cell.id;
    std::ofstream out(prefix + ".json", std::ios::binary);
    out << report_to_json(report, config.hash_hex(), seed) << '\n';
    write_predictions(out_dir + "/predictions_" + std::string(1, cell.id) + ".jsonl",
                      predictions);
    std::printf("  zar-all F1 %.4f\n", report.categories.at(EvalCategory::ZarAll).f1());
  }

  // Table-2-style significance: the full proposal (k) against the further-
  // pretrained baseline (h).
  const double p_value = paired_permutation_test(
      flags_by_cell.at('k'), flags_by_cell.at('h'),
      static_cast<int>(config.get_int("permutations", 1000)), mix64(seed, 0x51f));
  const json significance{{"config_hash", config.hash_hex()},
                          {"seed", seed},
                          {"comparison", "k_vs_h"},
                          {"p_value", p_value}};
  std::ofstream sig(out_dir + "/significance.json", std::ios::binary);
  sig << significance.dump(2) << '\n';
  std::printf("grid: permutation test k vs h p = %.4f\n", p_value);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pseudo zero pronoun resolution toolkit"};
  app.require_subcommand(1);

  // gen-pzero
  CommonOptions gen_common;
  std::string gen_corpus, gen_out, gen_cloze_out, gen_vocab_in, gen_vocab_out;
  CLI::App* gen = app.add_subcommand("gen-pzero", "generate PZero (and Cloze) instances");
  gen->add_option("--corpus", gen_corpus, "parsed corpus JSONL")->required();
  gen->add_option("--out", gen_out, "PZero instance file")->required();
  gen->add_option("--cloze-out", gen_cloze_out, "optional Cloze instance file");
  gen->add_option("--vocab", gen_vocab_in, "use an existing vocabulary file");
  gen->add_option("--vocab-out", gen_vocab_out, "optional vocabulary file");
  add_common(gen, gen_common);

  // pretrain
  CommonOptions pre_common;
  std::string pre_task, pre_instances, pre_vocab, pre_out, pre_metrics, pre_init;
  CLI::App* pre = app.add_subcommand("pretrain", "pretrain on PZero or Cloze");
  pre->add_option("--task", pre_task, "pzero|cloze")->required();
  pre->add_option("--instances", pre_instances, "instance file")->required();
  pre->add_option("--vocab", pre_vocab, "vocabulary file")->required();
  pre->add_option("--out", pre_out, "checkpoint path")->required();
  pre->add_option("--metrics", pre_metrics, "metrics JSONL path");
  pre->add_option("--init-checkpoint", pre_init, "start from an existing checkpoint");
  add_common(pre, pre_common);

  // finetune
  CommonOptions fin_common;
  std::string fin_model, fin_init, fin_train, fin_dev, fin_out, fin_metrics, fin_predict,
      fin_predictions_out;
  CLI::App* fin = app.add_subcommand("finetune", "finetune AS or AS-PZero");
  fin->add_option("--model", fin_model, "as|as-pzero")->required();
  fin->add_option("--init-checkpoint", fin_init, "pretrained checkpoint")->required();
  fin->add_option("--train", fin_train, "ZAR training instances")->required();
  fin->add_option("--dev", fin_dev, "ZAR development instances (early stopping)");
  fin->add_option("--out", fin_out, "checkpoint path")->required();
  fin->add_option("--metrics", fin_metrics, "metrics JSONL path");
  fin->add_option("--predict", fin_predict, "ZAR instances to decode with the final model");
  fin->add_option("--predictions-out", fin_predictions_out, "predictions JSONL path");
  add_common(fin, fin_common);

  // evaluate
  CommonOptions eval_common;
  std::string eval_instances, eval_predictions, eval_report, eval_require;
  CLI::App* eval = app.add_subcommand("evaluate", "score predictions against gold");
  eval->add_option("--instances", eval_instances, "ZAR instances")->required();
  eval->add_option("--predictions", eval_predictions, "predictions JSONL")->required();
  eval->add_option("--report-out", eval_report, "report path prefix (.json appended)");
  eval->add_option("--require-categories", eval_require,
                   "comma list; nonzero exit if any has no gold");
  add_common(eval, eval_common);

  // analyze
  CommonOptions ana_common;
  std::string ana_axis, ana_instances, ana_predictions, ana_out;
  CLI::App* ana = app.add_subcommand("analyze", "recall breakdown tables");
  ana->add_option("--axis", ana_axis, "antecedents|distance|voice")->required();
  ana->add_option("--instances", ana_instances, "ZAR instances")->required();
  ana->add_option("--predictions", ana_predictions, "predictions JSONL")->required();
  ana->add_option("--out", ana_out, "breakdown JSON path");
  add_common(ana, ana_common);

  // grid
  CommonOptions grid_common;
  std::string grid_corpus, grid_train, grid_dev, grid_test, grid_out_dir, grid_vocab;
  CLI::App* grid = app.add_subcommand("grid", "run the six-cell pretrain x finetune grid");
  grid->add_option("--corpus", grid_corpus, "parsed corpus JSONL")->required();
  grid->add_option("--vocab", grid_vocab, "use an existing vocabulary file");
  grid->add_option("--zar-train", grid_train, "ZAR training instances")->required();
  grid->add_option("--zar-dev", grid_dev, "ZAR development instances")->required();
  grid->add_option("--zar-test", grid_test, "ZAR test instances")->required();
  grid->add_option("--out-dir", grid_out_dir, "output directory (must exist)")->required();
  add_common(grid, grid_common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return run_gen_pzero(gen_common, gen_corpus, gen_out, gen_cloze_out, gen_vocab_in,
                           gen_vocab_out);
    }
    if (pre->parsed()) {
      return run_pretrain(pre_common, pre_task, pre_instances, pre_vocab, pre_out, pre_metrics,
                          pre_init);
    }
    if (fin->parsed()) {
      return run_finetune(fin_common, fin_model, fin_init, fin_train, fin_dev, fin_out,
                          fin_metrics, fin_predict, fin_predictions_out);
    }
    if (eval->parsed()) {
      return run_evaluate(eval_common, eval_instances, eval_predictions, eval_report,
                          eval_require);
    }
    if (ana->parsed()) {
      return run_analyze(ana_common, ana_axis, ana_instances, ana_predictions, ana_out);
    }
    if (grid->parsed()) {
      return run_grid(grid_common, grid_corpus, grid_train, grid_dev, grid_test, grid_out_dir,
                      grid_vocab);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
