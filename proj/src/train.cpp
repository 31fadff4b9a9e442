#include "pzero/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "pzero/eval.hpp"
#include "pzero/rng.hpp"

namespace pzero {

namespace {

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

}  // namespace

OptimizerState make_optimizer_state(const Parameters<float>& params) {
  OptimizerState state;
  for_each_tensor(params, [&state](const std::string&, const Mat<float>& mat) {
    state.first_moment.emplace_back(mat.rows, mat.cols);
    state.second_moment.emplace_back(mat.rows, mat.cols);
  });
  return state;
}

template <class S>
std::pair<double, std::vector<S>> kl_loss(const GoldDistribution& y, const std::vector<S>& s) {
  const size_t t = s.size();
  if (y.probs.size() != t) fail("kl_loss: distribution/score length mismatch");

  S max = -std::numeric_limits<S>::infinity();
  for (S score : s) {
    if (std::isfinite(static_cast<double>(score))) max = std::max(max, score);
  }
  if (!std::isfinite(static_cast<double>(max))) fail("kl_loss: no unmasked position");

  double sum_exp = 0.0;
  for (S score : s) {
    if (std::isfinite(static_cast<double>(score))) {
      sum_exp += std::exp(static_cast<double>(score - max));
    }
  }
  const double log_z = std::log(sum_exp);

  double loss = 0.0;
  std::vector<S> grad(t, S(0));
  for (size_t p = 0; p < t; ++p) {
    const double yp = y.probs[p];
    const bool unmasked = std::isfinite(static_cast<double>(s[p]));
    if (yp > 0.0 && !unmasked) fail("kl_loss: gold support on a masked position");
    if (!unmasked) continue;
    const double log_q = static_cast<double>(s[p] - max) - log_z;
    const double q = std::exp(log_q);
    if (yp > 0.0) loss += yp * (std::log(yp) - log_q);
    grad[p] = static_cast<S>(q - yp);
  }
  return {loss, std::move(grad)};
}

template std::pair<double, std::vector<float>> kl_loss<float>(const GoldDistribution&,
                                                              const std::vector<float>&);
template std::pair<double, std::vector<double>> kl_loss<double>(const GoldDistribution&,
                                                                const std::vector<double>&);

double cross_entropy_loss(int target_index, const std::array<double, 4>& distribution) {
  if (target_index < 0 || target_index >= 4) fail("cross_entropy_loss: bad target");
  return -std::log(distribution[static_cast<size_t>(target_index)]);
}

double lr(int64_t step, const Schedule& schedule) {
  if (step <= 0) fail("lr: step must be >= 1");
  const int64_t warmup = schedule.warmup_steps;
  if (warmup > 0 && step <= warmup) {
    return schedule.max_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (schedule.kind == Schedule::Kind::FinetuneDefault) return schedule.max_lr;
  const double effective_warmup = warmup > 0 ? static_cast<double>(warmup) : 1.0;
  return schedule.max_lr * std::sqrt(effective_warmup / static_cast<double>(step));
}

void clip_gradients(Gradients<float>& grads, double max_norm) {
  double sum_sq = 0.0;
  for_each_tensor(grads, [&sum_sq](const std::string&, const Mat<float>& mat) {
    for (float g : mat.v) sum_sq += static_cast<double>(g) * static_cast<double>(g);
  });
  const double norm = std::sqrt(sum_sq);
  if (norm <= max_norm || norm == 0.0) return;
  const float scale = static_cast<float>(max_norm / norm);
  for_each_tensor(grads, [scale](const std::string&, Mat<float>& mat) {
    for (float& g : mat.v) g *= scale;
  });
}

void adam_step(Parameters<float>& params, const Gradients<float>& grads, OptimizerState& state,
               double learning_rate) {
  state.step += 1;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  std::vector<const Mat<float>*> grad_tensors;
  for_each_tensor(grads, [&grad_tensors](const std::string&, const Mat<float>& mat) {
    grad_tensors.push_back(&mat);
  });

  size_t index = 0;
  for_each_tensor(params, [&](const std::string& name, Mat<float>& mat) {
    const Mat<float>& g = *grad_tensors[index];
    Mat<float>& m = state.first_moment[index];
    Mat<float>& v = state.second_moment[index];
    ++index;
    for (size_t i = 0; i < mat.v.size(); ++i) {
      const double gi = static_cast<double>(g.v[i]);
      if (!std::isfinite(gi)) fail("adam_step: non-finite gradient in tensor " + name);
      const double mi = state.beta1 * m.v[i] + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * v.v[i] + (1.0 - state.beta2) * gi * gi;
      m.v[i] = static_cast<float>(mi);
      v.v[i] = static_cast<float>(vi);
      const double m_hat = mi / bias1;
      const double v_hat = vi / bias2;
      mat.v[i] -= static_cast<float>(learning_rate * m_hat / (std::sqrt(v_hat) + state.eps));
    }
  });
}

// ---------------------------------------------------------------------------
// Batch machinery: per-thread gradient buffers over fixed contiguous chunks,
// reduced in thread order so the result depends only on the configured
// thread count.

namespace {

struct BatchStats {
  double loss_sum = 0.0;
  long correct = 0;
  long total = 0;
};

void scale_gradients(Gradients<float>& grads, float scale) {
  for_each_tensor(grads, [scale](const std::string&, Mat<float>& mat) {
    for (float& g : mat.v) g *= scale;
  });
}

void accumulate_gradients(Gradients<float>& total, const Gradients<float>& part) {
  std::vector<const Mat<float>*> src;
  for_each_tensor(part, [&src](const std::string&, const Mat<float>& mat) { src.push_back(&mat); });
  size_t index = 0;
  for_each_tensor(total, [&](const std::string&, Mat<float>& mat) {
    const Mat<float>& s = *src[index++];
    for (size_t i = 0; i < mat.v.size(); ++i) mat.v[i] += s.v[i];
  });
}

using UnitStep = std::function<StepResult(size_t unit, Gradients<float>& grads)>;

BatchStats run_batch(const std::vector<size_t>& units, int threads,
                     std::vector<Gradients<float>>& buffers, Gradients<float>& total,
                     const UnitStep& step_fn) {
  const size_t n = units.size();
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  std::vector<BatchStats> stats(static_cast<size_t>(workers));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));

  auto work = [&](int worker) {
    try {
      const size_t begin = n * static_cast<size_t>(worker) / static_cast<size_t>(workers);
      const size_t end = n * static_cast<size_t>(worker + 1) / static_cast<size_t>(workers);
      Gradients<float>& grads = buffers[static_cast<size_t>(worker)];
      for_each_tensor(grads, [](const std::string&, Mat<float>& mat) { mat.zero(); });
      BatchStats& s = stats[static_cast<size_t>(worker)];
      for (size_t i = begin; i < end; ++i) {
        const StepResult r = step_fn(units[i], grads);
        s.loss_sum += r.loss;
        s.correct += r.correct;
        s.total += r.total;
      }
    } catch (...) {
      errors[static_cast<size_t>(worker)] = std::current_exception();
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }

  for_each_tensor(total, [](const std::string&, Mat<float>& mat) { mat.zero(); });
  BatchStats combined;
  for (int w = 0; w < workers; ++w) {
    accumulate_gradients(total, buffers[static_cast<size_t>(w)]);
    combined.loss_sum += stats[static_cast<size_t>(w)].loss_sum;
    combined.correct += stats[static_cast<size_t>(w)].correct;
    combined.total += stats[static_cast<size_t>(w)].total;
  }
  scale_gradients(total, 1.0f / static_cast<float>(n));
  return combined;
}

}  // namespace

TrainResult pretrain(PretrainTask task, const PretrainData& data, const ModelConfig& config,
                     const TrainOptions& options, const Parameters<float>* initial_params) {
  const size_t n = task == PretrainTask::PZero ? data.pzero.size() : data.cloze.size();
  if (n == 0) fail("pretrain: empty instance set");

  TrainResult result;
  result.params = initial_params ? *initial_params : init_parameters<float>(config, options.seed);
  result.params.config.validate();
  OptimizerState opt = make_optimizer_state(result.params);

  std::vector<Gradients<float>> buffers;
  for (int w = 0; w < std::max(1, options.threads); ++w) {
    buffers.push_back(make_parameters<float>(config));
  }
  Gradients<float> total = make_parameters<float>(config);

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  int epoch = 0;
  size_t cursor = 0;
  {
    Rng shuffle_rng(mix64(options.seed, 0xE70C4, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
  }

  // Cloze mask positions are redrawn each epoch.
  std::vector<ClozeInstance> epoch_cloze;
  auto remask = [&]() {
    if (task != PretrainTask::Cloze) return;
    epoch_cloze.resize(n);
    for (size_t i = 0; i < n; ++i) {
      epoch_cloze[i] = cloze_mask(cloze_original_sequence(data.cloze[i]), options.mask_rate,
                                  mix64(options.seed, static_cast<uint64_t>(epoch), i));
    }
  };
  remask();

  BatchStats window;
  for (int64_t step = 1; step <= options.updates; ++step) {
    if (cursor >= n) {
      cursor = 0;
      ++epoch;
      Rng shuffle_rng(mix64(options.seed, 0xE70C4, static_cast<uint64_t>(epoch)));
      shuffle_rng.shuffle(order);
      remask();
    }
    const size_t end = std::min(n, cursor + static_cast<size_t>(options.batch_size));
    const std::vector<size_t> batch(order.begin() + static_cast<long>(cursor),
                                    order.begin() + static_cast<long>(end));
    cursor = end;

    UnitStep step_fn;
    if (task == PretrainTask::PZero) {
      step_fn = [&](size_t unit, Gradients<float>& grads) {
        return pzero_step(result.params, data.pzero[unit], &grads);
      };
    } else {
      step_fn = [&](size_t unit, Gradients<float>& grads) {
        return cloze_step(result.params, epoch_cloze[unit], &grads);
      };
    }

    const BatchStats stats = run_batch(batch, options.threads, buffers, total, step_fn);
    clip_gradients(total, options.clip_norm);
    adam_step(result.params, total, opt, lr(step, options.schedule));

    window.loss_sum += stats.loss_sum / static_cast<double>(batch.size());
    window.correct += stats.correct;
    window.total += stats.total;
    if (step % options.eval_every == 0 || step == options.updates) {
      const int64_t span = (step - 1) % options.eval_every + 1;
      MetricPoint point;
      point.step = step;
      point.loss = window.loss_sum / static_cast<double>(span);
      point.acc = window.total > 0 ? static_cast<double>(window.correct) / window.total : 0.0;
      result.metrics.push_back(point);
      window = BatchStats{};
    }
  }
  return result;
}

std::vector<Prediction> predict(FinetuneModel model, const Parameters<float>& params,
                                const std::vector<ZarInstance>& instances) {
  std::vector<Prediction> predictions;
  const int t_max = params.config.t_max;
  for (size_t i = 0; i < instances.size(); ++i) {
    const ZarInstance& instance = instances[i];
    if (model == FinetuneModel::AS) {
      const Mat<float> emb =
          embed_as(instance.token_ids, instance.p_start, instance.p_end, params);
      const Mat<float> h = transformer_forward(params, emb, &instance.token_ids);
      const std::vector<bool> candidates = candidate_positions(instance.token_ids);
      for (const auto& slot : instance.slots) {
        const int label_index = static_cast<int>(slot.label);
        const std::vector<float> logits = label_logits(h, label_index, params, candidates);
        const std::array<float, 4> exo = exophoric_distribution(h, label_index, params);
        Prediction p = decode_prediction(std::vector<double>(logits.begin(), logits.end()),
                                         {exo[0], exo[1], exo[2], exo[3]}, slot.label);
        p.instance_index = static_cast<int>(i);
        predictions.push_back(p);
      }
    } else {
      for (const auto& slot : instance.slots) {
        const AsPzeroInput input = build_aspzero_input(instance, slot.label, t_max);
        const Mat<float> emb = embed_aspzero(input.token_ids, input.t_context, input.p_start,
                                             input.p_end, params);
        const Mat<float> h = transformer_forward(params, emb, &input.token_ids);
        const std::vector<bool> candidates = candidate_positions(input.token_ids);
        const std::vector<float> scores =
            selection_scores(h, input.mask_index, params, candidates);
        const int label_index = static_cast<int>(slot.label);
        const std::array<float, 4> exo = exophoric_distribution(h, label_index, params);
        Prediction p = decode_prediction(std::vector<double>(scores.begin(), scores.end()),
                                         {exo[0], exo[1], exo[2], exo[3]}, slot.label);
        p.instance_index = static_cast<int>(i);
        if (p.is_position) {
          // Map back from query-chunk coordinates to instance coordinates.
          const int overflow =
              static_cast<int>(instance.token_ids.size()) - input.t_context;
          if (p.position >= input.t_context + 2) {
            p.position = p.position - (input.t_context + 2) + input.p_start + overflow;
          } else {
            p.position += overflow;
          }
        }
        predictions.push_back(p);
      }
    }
  }
  return predictions;
}

TrainResult finetune(FinetuneModel model, const Parameters<float>& initial_params,
                     const std::vector<ZarInstance>& train_instances,
                     const std::vector<ZarInstance>* dev_instances,
                     const TrainOptions& options) {
  if (train_instances.empty()) fail("finetune: empty instance set");
  initial_params.config.validate();

  TrainResult result;
  result.params = initial_params;
  reinit_finetune_heads(result.params, model, mix64(options.seed, 0xF17E));
  OptimizerState opt = make_optimizer_state(result.params);

  const ModelConfig& config = result.params.config;
  std::vector<Gradients<float>> buffers;
  for (int w = 0; w < std::max(1, options.threads); ++w) {
    buffers.push_back(make_parameters<float>(config));
  }
  Gradients<float> total = make_parameters<float>(config);

  // Units: instances for AS, (instance, label) pairs for AS-PZero.
  std::vector<std::pair<size_t, CaseLabel>> units;
  for (size_t i = 0; i < train_instances.size(); ++i) {
    if (model == FinetuneModel::AS) {
      units.emplace_back(i, CaseLabel::NOM);
    } else {
      for (const auto& slot : train_instances[i].slots) {
        const bool in_context = slot.kind == SlotKind::Dep || slot.kind == SlotKind::Intra ||
                                slot.kind == SlotKind::Inter;
        if (in_context && slot.gold_positions.empty()) continue;
        units.emplace_back(i, slot.label);
      }
    }
  }
  if (units.empty()) fail("finetune: no trainable slots");

  std::vector<size_t> order(units.size());
  std::iota(order.begin(), order.end(), size_t{0});

  Parameters<float> best_params = result.params;
  double best_f1 = -1.0;
  int bad_epochs = 0;
  int64_t global_step = 0;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Rng shuffle_rng(mix64(options.seed, 0xF1E7, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    long epoch_correct = 0;
    long epoch_total = 0;
    size_t cursor = 0;
    while (cursor < order.size()) {
      const size_t end = std::min(order.size(), cursor + static_cast<size_t>(options.batch_size));
      const std::vector<size_t> batch(order.begin() + static_cast<long>(cursor),
                                      order.begin() + static_cast<long>(end));
      cursor = end;

      const UnitStep step_fn = [&](size_t unit, Gradients<float>& grads) {
        const auto& [index, label] = units[unit];
        if (model == FinetuneModel::AS) {
          return as_step(result.params, train_instances[index], &grads);
        }
        return aspzero_step(result.params, train_instances[index], label, &grads);
      };

      const BatchStats stats = run_batch(batch, options.threads, buffers, total, step_fn);
      clip_gradients(total, options.clip_norm);
      ++global_step;
      adam_step(result.params, total, opt, lr(global_step, options.schedule));
      epoch_loss += stats.loss_sum;
      epoch_correct += stats.correct;
      epoch_total += stats.total;
    }

    MetricPoint point;
    point.step = epoch + 1;
    point.loss = epoch_total > 0 ? epoch_loss / static_cast<double>(epoch_total) : 0.0;
    if (dev_instances) {
      const std::vector<Prediction> dev_pred = predict(model, result.params, *dev_instances);
      const EvalReport report = score(dev_pred, *dev_instances);
      const double f1 = report.categories.at(EvalCategory::ZarAll).f1();
      point.acc = f1;
      if (f1 > best_f1 + 1e-12) {
        best_f1 = f1;
        best_params = result.params;
        bad_epochs = 0;
      } else {
        ++bad_epochs;
      }
      result.metrics.push_back(point);
      if (bad_epochs >= options.patience) break;
    } else {
      point.acc = epoch_total > 0 ? static_cast<double>(epoch_correct) / epoch_total : 0.0;
      result.metrics.push_back(point);
    }
  }

  if (dev_instances && best_f1 >= 0.0) result.params = best_params;
  return result;
}

void write_metrics(const std::string& path, const std::vector<MetricPoint>& metrics,
                   const std::string& config_hash_hex, uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write metrics file: " + path);
  out << nlohmann::json{{"config_hash", config_hash_hex}, {"seed", seed}}.dump() << '\n';
  for (const auto& point : metrics) {
    out << nlohmann::json{{"step", point.step}, {"loss", point.loss}, {"acc", point.acc}}.dump()
        << '\n';
  }
}

}  // namespace pzero
