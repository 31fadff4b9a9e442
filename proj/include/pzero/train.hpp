#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pzero/backprop.hpp"
#include "pzero/datagen.hpp"
#include "pzero/model.hpp"
#include "pzero/zar.hpp"

namespace pzero {

struct OptimizerState {
  int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Mat<float>> first_moment;   // canonical tensor order
  std::vector<Mat<float>> second_moment;
};

OptimizerState make_optimizer_state(const Parameters<float>& params);

struct Schedule {
  enum class Kind { InverseSqrt, FinetuneDefault };
  double max_lr = 1e-3;
  int warmup_steps = 100;
  Kind kind = Kind::InverseSqrt;
};

// KL(y || softmax(s)) over the unmasked positions, together with the
// gradient wrt s (softmax(s) - y on the unmasked support, zero elsewhere).
// Throws when the gold support hits a -inf-masked position.
template <class S>
std::pair<double, std::vector<S>> kl_loss(const GoldDistribution& y, const std::vector<S>& s);

// -log p(target).
double cross_entropy_loss(int target_index, const std::array<double, 4>& distribution);

// Linear ramp to max_lr over the warmup, then either inverse square root
// decay or a constant (finetune default). step counts from 1.
double lr(int64_t step, const Schedule& schedule);

// Scales gradients so the global L2 norm does not exceed max_norm.
void clip_gradients(Gradients<float>& grads, double max_norm);

// Bias-corrected Adam update. Throws, naming the tensor, on a non-finite
// gradient.
void adam_step(Parameters<float>& params, const Gradients<float>& grads, OptimizerState& state,
               double learning_rate);

struct MetricPoint {
  int64_t step = 0;
  double loss = 0.0;
  double acc = 0.0;
};

struct TrainOptions {
  int batch_size = 32;
  int64_t updates = 2000;   // pretraining budget
  int epochs = 200;         // finetuning cap
  int patience = 20;        // epochs without dev-F1 improvement
  int eval_every = 100;
  int threads = 2;          // fixed in config; affects gradient reduction order
  uint64_t seed = 1;
  Schedule schedule;
  double clip_norm = 1.0;
  double mask_rate = 0.15;  // Cloze re-masking rate, redrawn per epoch
};

enum class PretrainTask { PZero, Cloze };

struct TrainResult {
  Parameters<float> params;
  std::vector<MetricPoint> metrics;
};

struct PretrainData {
  std::vector<PZeroInstance> pzero;
  std::vector<ClozeInstance> cloze;
};

// Minibatch pretraining from random initialization (or from initial_params
// when further pretraining). PZero minimizes KL over the selection scores;
// Cloze minimizes cross-entropy over the tied-embedding vocabulary softmax,
// with mask positions redrawn each epoch.
TrainResult pretrain(PretrainTask task, const PretrainData& data, const ModelConfig& config,
                     const TrainOptions& options,
                     const Parameters<float>* initial_params = nullptr);

// Finetunes from a pretrained checkpoint. AS redraws the predicate embedding
// and classification heads; AS-PZero keeps the pretrained selection head.
// With a dev set, stops early on overall ZAR F1 and returns the best-dev
// parameters.
TrainResult finetune(FinetuneModel model, const Parameters<float>& initial_params,
                     const std::vector<ZarInstance>& train_instances,
                     const std::vector<ZarInstance>* dev_instances, const TrainOptions& options);

// Greedy decode for every slot of every instance, in instance order.
std::vector<Prediction> predict(FinetuneModel model, const Parameters<float>& params,
                                const std::vector<ZarInstance>& instances);

void write_metrics(const std::string& path, const std::vector<MetricPoint>& metrics,
                   const std::string& config_hash_hex, uint64_t seed);

}  // namespace pzero
