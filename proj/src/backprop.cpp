#include "pzero/backprop.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pzero/rng.hpp"
#include "pzero/train.hpp"

namespace pzero {

namespace {

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

template <class S>
S gelu_derivative(S x) {
  const double xd = static_cast<double>(x);
  const double cdf = 0.5 * (1.0 + std::erf(xd * 0.7071067811865475));
  const double pdf = std::exp(-0.5 * xd * xd) * 0.3989422804014327;
  return static_cast<S>(cdf + xd * pdf);
}

// dx for y = gain * xhat + bias given dy, with xhat and rstd cached.
template <class S>
void layer_norm_backward(const Mat<S>& d_out, const Mat<S>& hat, const std::vector<S>& rstd,
                         const Mat<S>& gain, Mat<S>& d_in, Mat<S>& d_gain, Mat<S>& d_bias) {
  const int d = d_out.cols;
  for (int i = 0; i < d_out.rows; ++i) {
    const S* dy = d_out.row(i);
    const S* xh = hat.row(i);
    const S* g = gain.row(0);
    S* dg = d_gain.row(0);
    S* db = d_bias.row(0);
    S* dx = d_in.row(i);
    S mean_dxhat = S(0);
    S mean_dxhat_hat = S(0);
    for (int j = 0; j < d; ++j) {
      const S dxhat = dy[j] * g[j];
      mean_dxhat += dxhat;
      mean_dxhat_hat += dxhat * xh[j];
      dg[j] += dy[j] * xh[j];
      db[j] += dy[j];
    }
    mean_dxhat /= static_cast<S>(d);
    mean_dxhat_hat /= static_cast<S>(d);
    const S r = rstd[static_cast<size_t>(i)];
    for (int j = 0; j < d; ++j) {
      const S dxhat = dy[j] * g[j];
      dx[j] = r * (dxhat - mean_dxhat - xh[j] * mean_dxhat_hat);
    }
  }
}

// Column sums of d into the 1 x cols bias gradient.
template <class S>
void bias_backward(const Mat<S>& d, Mat<S>& d_bias) {
  S* out = d_bias.row(0);
  for (int i = 0; i < d.rows; ++i) {
    const S* di = d.row(i);
    for (int j = 0; j < d.cols; ++j) out[j] += di[j];
  }
}

}  // namespace

template <class S>
Mat<S> transformer_backward(const Parameters<S>& params, const ForwardCache<S>& cache,
                            const Mat<S>& d_hidden, Gradients<S>& grads) {
  const ModelConfig& config = params.config;
  const int t = d_hidden.rows;
  const int d = config.d_model;
  const int heads = config.heads;
  const int dh = config.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  Mat<S> dx = d_hidden;
  Mat<S> d_res(t, d), d_mid(t, d);
  Mat<S> d_ff_act(t, config.ff_dim), d_ff_pre(t, config.ff_dim);
  Mat<S> d_ctx(t, d), d_q(t, d), d_k(t, d), d_v(t, d);

  for (int li = config.layers - 1; li >= 0; --li) {
    const auto& layer = params.layers[static_cast<size_t>(li)];
    auto& glayer = grads.layers[static_cast<size_t>(li)];
    const LayerCache<S>& lc = cache.layers[static_cast<size_t>(li)];

    // ln2: x_out = LN(res2)
    layer_norm_backward(dx, lc.ln2_hat, lc.ln2_rstd, layer.ln2_g, d_res, glayer.ln2_g,
                        glayer.ln2_b);

    // res2 = x_mid + ff_out
    d_mid = d_res;

    // ff_out = gelu(x_mid * ff_w1^T + b1) * ff_w2^T + b2
    matmul_tn(glayer.ff_w2, d_res, lc.ff_act, true);
    bias_backward(d_res, glayer.ff_b2);
    matmul(d_ff_act, d_res, layer.ff_w2);
    for (size_t i = 0; i < d_ff_act.v.size(); ++i) {
      d_ff_pre.v[i] = d_ff_act.v[i] * gelu_derivative(lc.ff_pre.v[i]);
    }
    matmul_tn(glayer.ff_w1, d_ff_pre, lc.x_mid, true);
    bias_backward(d_ff_pre, glayer.ff_b1);
    matmul(d_mid, d_ff_pre, layer.ff_w1, true);

    // ln1: x_mid = LN(res1)
    layer_norm_backward(d_mid, lc.ln1_hat, lc.ln1_rstd, layer.ln1_g, d_res, glayer.ln1_g,
                        glayer.ln1_b);

    // res1 = x_in + attn_out
    dx = d_res;

    // attn_out = ctx * wo^T + bo
    matmul_tn(glayer.wo, d_res, lc.ctx, true);
    bias_backward(d_res, glayer.bo);
    matmul(d_ctx, d_res, layer.wo);

    d_q.zero();
    d_k.zero();
    d_v.zero();
    for (int h = 0; h < heads; ++h) {
      const int off = h * dh;
      const Mat<S>& attn = lc.attn[static_cast<size_t>(h)];
      for (int i = 0; i < t; ++i) {
        const S* dci = d_ctx.row(i) + off;
        const S* ai = attn.row(i);
        // dA_ij = dC_i . V_j ; softmax backward; then dQ, dK
        S dot_sum = S(0);
        std::vector<S> da(static_cast<size_t>(t));
        for (int j = 0; j < t; ++j) {
          const S* vj = lc.v.row(j) + off;
          S acc = S(0);
          for (int p = 0; p < dh; ++p) acc += dci[p] * vj[p];
          da[static_cast<size_t>(j)] = acc;
          dot_sum += acc * ai[j];
        }
        S* dqi = d_q.row(i) + off;
        for (int j = 0; j < t; ++j) {
          const S dz = ai[j] * (da[static_cast<size_t>(j)] - dot_sum) * scale;
          if (dz == S(0)) continue;
          const S* kj = lc.k.row(j) + off;
          S* dkj = d_k.row(j) + off;
          const S* qi = lc.q.row(i) + off;
          for (int p = 0; p < dh; ++p) {
            dqi[p] += dz * kj[p];
            dkj[p] += dz * qi[p];
          }
        }
        // dV_j += A_ij * dC_i
        for (int j = 0; j < t; ++j) {
          const S aij = ai[j];
          if (aij == S(0)) continue;
          S* dvj = d_v.row(j) + off;
          for (int p = 0; p < dh; ++p) dvj[p] += aij * dci[p];
        }
      }
    }

    // q = x * wq^T + bq, etc.
    matmul_tn(glayer.wq, d_q, lc.x_in, true);
    bias_backward(d_q, glayer.bq);
    matmul(dx, d_q, layer.wq, true);
    matmul_tn(glayer.wk, d_k, lc.x_in, true);
    bias_backward(d_k, glayer.bk);
    matmul(dx, d_k, layer.wk, true);
    matmul_tn(glayer.wv, d_v, lc.x_in, true);
    bias_backward(d_v, glayer.bv);
    matmul(dx, d_v, layer.wv, true);
  }
  return dx;
}

template <class S>
void embed_pzero_backward(const std::vector<TokenId>& token_ids, const Mat<S>& d_emb,
                          Gradients<S>& grads) {
  const int d = d_emb.cols;
  for (int i = 0; i < d_emb.rows; ++i) {
    const S* src = d_emb.row(i);
    S* tok = grads.e_token.row(token_ids[static_cast<size_t>(i)]);
    S* pos = grads.e_position.row(i);
    for (int j = 0; j < d; ++j) {
      tok[j] += src[j];
      pos[j] += src[j];
    }
  }
}

template <class S>
void embed_as_backward(const std::vector<TokenId>& token_ids, int p_start, int p_end,
                       const Mat<S>& d_emb, Gradients<S>& grads) {
  embed_pzero_backward(token_ids, d_emb, grads);
  const int d = d_emb.cols;
  for (int i = 0; i < d_emb.rows; ++i) {
    const bool inside = i >= p_start && i <= p_end;
    const S* src = d_emb.row(i);
    S* pred = grads.e_predicate.row(inside ? 1 : 0);
    for (int j = 0; j < d; ++j) pred[j] += src[j];
  }
}

template <class S>
void embed_aspzero_backward(const std::vector<TokenId>& token_ids_prime, int t_context,
                            int p_start, int p_end, const Mat<S>& d_emb, Gradients<S>& grads) {
  embed_pzero_backward(token_ids_prime, d_emb, grads);
  const int d = d_emb.cols;
  for (int i = 0; i < d_emb.rows; ++i) {
    const int source = i - (t_context + 2) + p_start;
    if (source < p_start || source > p_end) continue;
    const S* src = d_emb.row(i);
    S* pos = grads.e_position.row(source);
    for (int j = 0; j < d; ++j) pos[j] += src[j];
  }
}

template <class S>
void selection_backward(const Mat<S>& h, int mask_index, const Parameters<S>& params,
                        const std::vector<S>& d_scores, const std::vector<bool>& candidates,
                        Mat<S>& d_h, Gradients<S>& grads) {
  const int t = h.rows;
  const int d = h.cols;

  // key = sel_w2 h_mask + sel_b2
  std::vector<S> key(static_cast<size_t>(d)), d_key(static_cast<size_t>(d), S(0));
  const S* hm = h.row(mask_index);
  for (int i = 0; i < d; ++i) {
    const S* wi = params.sel_w2.row(i);
    S acc = params.sel_b2(0, i);
    for (int j = 0; j < d; ++j) acc += wi[j] * hm[j];
    key[static_cast<size_t>(i)] = acc;
  }

  std::vector<S> query(static_cast<size_t>(d)), d_query(static_cast<size_t>(d));
  for (int pos = 0; pos < t; ++pos) {
    if (!candidates[static_cast<size_t>(pos)]) continue;
    const S ds = d_scores[static_cast<size_t>(pos)];
    if (ds == S(0)) continue;
    const S* hp = h.row(pos);
    // query = sel_w1 h_pos + sel_b1 ; score = query . key
    for (int i = 0; i < d; ++i) {
      const S* wi = params.sel_w1.row(i);
      S acc = params.sel_b1(0, i);
      for (int j = 0; j < d; ++j) acc += wi[j] * hp[j];
      query[static_cast<size_t>(i)] = acc;
      d_query[static_cast<size_t>(i)] = ds * key[static_cast<size_t>(i)];
      d_key[static_cast<size_t>(i)] += ds * acc;
    }
    S* dhp = d_h.row(pos);
    S* db1 = grads.sel_b1.row(0);
    for (int i = 0; i < d; ++i) {
      const S dq = d_query[static_cast<size_t>(i)];
      const S* wi = params.sel_w1.row(i);
      S* gwi = grads.sel_w1.row(i);
      db1[i] += dq;
      for (int j = 0; j < d; ++j) {
        gwi[j] += dq * hp[j];
        dhp[j] += dq * wi[j];
      }
    }
  }

  S* dhm = d_h.row(mask_index);
  S* db2 = grads.sel_b2.row(0);
  for (int i = 0; i < d; ++i) {
    const S dk = d_key[static_cast<size_t>(i)];
    if (dk == S(0)) continue;
    const S* wi = params.sel_w2.row(i);
    S* gwi = grads.sel_w2.row(i);
    db2[i] += dk;
    for (int j = 0; j < d; ++j) {
      gwi[j] += dk * hm[j];
      dhm[j] += dk * wi[j];
    }
  }
}

template <class S>
void label_backward(const Mat<S>& h, int label_index, const Parameters<S>& params,
                    const std::vector<S>& d_logits, Mat<S>& d_h, Gradients<S>& grads) {
  const int d = h.cols;
  const S* w = params.as_w.row(label_index);
  S* gw = grads.as_w.row(label_index);
  S db = S(0);
  for (int pos = 0; pos < h.rows; ++pos) {
    const S dz = d_logits[static_cast<size_t>(pos)];
    if (dz == S(0)) continue;
    const S* hp = h.row(pos);
    S* dhp = d_h.row(pos);
    db += dz;
    for (int j = 0; j < d; ++j) {
      gw[j] += dz * hp[j];
      dhp[j] += dz * w[j];
    }
  }
  grads.as_b(0, label_index) += db;
}

template <class S>
void exo_backward(const Mat<S>& h, int label_index, const Parameters<S>& params,
                  const std::array<S, 4>& d_logits, Mat<S>& d_h, Gradients<S>& grads) {
  const int d = h.cols;
  const S* h1 = h.row(0);
  S* dh1 = d_h.row(0);
  for (int z = 0; z < 4; ++z) {
    const S dz = d_logits[static_cast<size_t>(z)];
    if (dz == S(0)) continue;
    const int row = label_index * 4 + z;
    const S* w = params.exo_w.row(row);
    S* gw = grads.exo_w.row(row);
    grads.exo_b(0, row) += dz;
    for (int j = 0; j < d; ++j) {
      gw[j] += dz * h1[j];
      dh1[j] += dz * w[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Loss steps

namespace {

template <class S>
int argmax_finite(const std::vector<S>& scores) {
  int best = -1;
  for (size_t pos = 0; pos < scores.size(); ++pos) {
    if (!std::isfinite(static_cast<double>(scores[pos]))) continue;
    if (best < 0 || scores[pos] > scores[static_cast<size_t>(best)]) {
      best = static_cast<int>(pos);
    }
  }
  return best;
}

template <class S>
std::pair<double, std::array<S, 4>> exo_cross_entropy(const Parameters<S>& params,
                                                      const Mat<S>& h, int label_index,
                                                      ExoCategory target,
                                                      std::array<S, 4>* d_logits) {
  std::array<S, 4> logits = exo_logits(h, label_index, params);
  std::vector<S> probs(logits.begin(), logits.end());
  softmax_inplace(probs);
  const int target_index = static_cast<int>(target);
  const double loss = -std::log(static_cast<double>(probs[static_cast<size_t>(target_index)]));
  if (d_logits) {
    for (int z = 0; z < 4; ++z) {
      (*d_logits)[static_cast<size_t>(z)] =
          probs[static_cast<size_t>(z)] - S(z == target_index ? 1 : 0);
    }
  }
  return {loss, logits};
}

}  // namespace

template <class S>
StepResult pzero_step(const Parameters<S>& params, const PZeroInstance& instance,
                      Gradients<S>* grads) {
  const Mat<S> emb = embed_pzero(instance.token_ids, params);
  ForwardCache<S> cache;
  const Mat<S> h =
      transformer_forward(params, emb, &instance.token_ids, grads ? &cache : nullptr);
  const std::vector<bool> candidates = candidate_positions(instance.token_ids);
  const std::vector<S> scores = selection_scores(h, instance.mask_index, params, candidates);

  const GoldDistribution gold = gold_distribution(
      instance.answer_positions, static_cast<int>(instance.token_ids.size()));
  auto [loss, d_scores] = kl_loss(gold, scores);

  StepResult result;
  result.loss = loss;
  result.total = 1;
  const int best = argmax_finite(scores);
  result.correct = std::binary_search(instance.answer_positions.begin(),
                                      instance.answer_positions.end(), best)
                       ? 1
                       : 0;

  if (grads) {
    Mat<S> d_h(h.rows, h.cols);
    selection_backward(h, instance.mask_index, params, d_scores, candidates, d_h, *grads);
    const Mat<S> d_emb = transformer_backward(params, cache, d_h, *grads);
    embed_pzero_backward(instance.token_ids, d_emb, *grads);
  }
  return result;
}

template <class S>
StepResult cloze_step(const Parameters<S>& params, const ClozeInstance& instance,
                      Gradients<S>* grads) {
  const Mat<S> emb = embed_pzero(instance.token_ids, params);
  ForwardCache<S> cache;
  const Mat<S> h =
      transformer_forward(params, emb, &instance.token_ids, grads ? &cache : nullptr);
  const int vocab = params.config.vocab_size;
  const int d = params.config.d_model;
  const int masked = static_cast<int>(instance.masked_positions.size());
  if (masked == 0) fail("cloze instance with no masked positions");

  StepResult result;
  result.total = masked;
  Mat<S> d_h(h.rows, h.cols);
  std::vector<S> logits(static_cast<size_t>(vocab));

  for (int pos : instance.masked_positions) {
    const S* hp = h.row(pos);
    for (int vtok = 0; vtok < vocab; ++vtok) {
      const S* e = params.e_token.row(vtok);
      S acc = S(0);
      for (int j = 0; j < d; ++j) acc += hp[j] * e[j];
      logits[static_cast<size_t>(vtok)] = acc;
    }
    const TokenId original = instance.original_ids.at(pos);
    const int best = argmax_finite(logits);
    result.correct += best == original;

    std::vector<S> probs = logits;
    softmax_inplace(probs);
    result.loss +=
        -std::log(static_cast<double>(probs[static_cast<size_t>(original)])) / masked;

    if (grads) {
      S* dhp = d_h.row(pos);
      for (int vtok = 0; vtok < vocab; ++vtok) {
        S dz = probs[static_cast<size_t>(vtok)];
        if (vtok == original) dz -= S(1);
        dz /= static_cast<S>(masked);
        if (dz == S(0)) continue;
        const S* e = params.e_token.row(vtok);
        S* ge = grads->e_token.row(vtok);
        for (int j = 0; j < d; ++j) {
          dhp[j] += dz * e[j];
          ge[j] += dz * hp[j];
        }
      }
    }
  }

  if (grads) {
    const Mat<S> d_emb = transformer_backward(params, cache, d_h, *grads);
    embed_pzero_backward(instance.token_ids, d_emb, *grads);
  }
  return result;
}

template <class S>
StepResult as_step(const Parameters<S>& params, const ZarInstance& instance,
                   Gradients<S>* grads) {
  const int t = static_cast<int>(instance.token_ids.size());
  const Mat<S> emb = embed_as(instance.token_ids, instance.p_start, instance.p_end, params);
  ForwardCache<S> cache;
  const Mat<S> h =
      transformer_forward(params, emb, &instance.token_ids, grads ? &cache : nullptr);
  const std::vector<bool> candidates = candidate_positions(instance.token_ids);

  StepResult result;
  Mat<S> d_h(h.rows, h.cols);
  for (const auto& slot : instance.slots) {
    const bool in_context = slot.kind == SlotKind::Dep || slot.kind == SlotKind::Intra ||
                            slot.kind == SlotKind::Inter;
    if (in_context && slot.gold_positions.empty()) continue;  // gold out of input

    const int label_index = static_cast<int>(slot.label);
    const ZarGold gold = gold_distribution_zar(slot, t);
    const std::vector<S> logits = label_logits(h, label_index, params, candidates);
    auto [loss, d_logits] = kl_loss(gold.positions, logits);
    result.loss += loss;
    result.total += 1;

    const int best = argmax_finite(logits);
    if (gold.is_dummy) {
      std::array<S, 4> d_exo{};
      auto [exo_loss, raw] =
          exo_cross_entropy(params, h, label_index, gold.exo_target, grads ? &d_exo : nullptr);
      result.loss += exo_loss;
      if (best == 0) {
        const int best_z = argmax_finite(std::vector<S>(raw.begin(), raw.end()));
        result.correct += best_z == static_cast<int>(gold.exo_target);
      }
      if (grads) exo_backward(h, label_index, params, d_exo, d_h, *grads);
    } else {
      result.correct += std::binary_search(slot.gold_positions.begin(),
                                           slot.gold_positions.end(), best);
    }
    if (grads) label_backward(h, label_index, params, d_logits, d_h, *grads);
  }

  if (grads && result.total > 0) {
    const Mat<S> d_emb = transformer_backward(params, cache, d_h, *grads);
    embed_as_backward(instance.token_ids, instance.p_start, instance.p_end, d_emb, *grads);
  }
  return result;
}

template <class S>
StepResult aspzero_step(const Parameters<S>& params, const ZarInstance& instance,
                        CaseLabel label, Gradients<S>* grads) {
  const AsPzeroInput input = build_aspzero_input(instance, label, params.config.t_max);
  StepResult result;
  if (!input.has_slot) return result;
  if (!input.gold_is_dummy && input.gold_positions.empty()) return result;  // out of input

  const Mat<S> emb =
      embed_aspzero(input.token_ids, input.t_context, input.p_start, input.p_end, params);
  ForwardCache<S> cache;
  const Mat<S> h = transformer_forward(params, emb, &input.token_ids, grads ? &cache : nullptr);
  const std::vector<bool> candidates = candidate_positions(input.token_ids);
  const std::vector<S> scores = selection_scores(h, input.mask_index, params, candidates);

  const int t_prime = static_cast<int>(input.token_ids.size());
  const GoldDistribution gold =
      input.gold_is_dummy ? gold_distribution({0}, t_prime)
                          : gold_distribution(input.gold_positions, t_prime);
  auto [loss, d_scores] = kl_loss(gold, scores);
  result.loss = loss;
  result.total = 1;

  const int label_index = static_cast<int>(label);
  const int best = argmax_finite(scores);
  Mat<S> d_h(h.rows, h.cols);

  if (input.gold_is_dummy) {
    std::array<S, 4> d_exo{};
    auto [exo_loss, raw] =
        exo_cross_entropy(params, h, label_index, input.exo_target, grads ? &d_exo : nullptr);
    result.loss += exo_loss;
    if (best == 0) {
      const int best_z = argmax_finite(std::vector<S>(raw.begin(), raw.end()));
      result.correct = best_z == static_cast<int>(input.exo_target);
    }
    if (grads) exo_backward(h, label_index, params, d_exo, d_h, *grads);
  } else {
    result.correct = std::binary_search(input.gold_positions.begin(),
                                        input.gold_positions.end(), best);
  }

  if (grads) {
    selection_backward(h, input.mask_index, params, d_scores, candidates, d_h, *grads);
    const Mat<S> d_emb = transformer_backward(params, cache, d_h, *grads);
    embed_aspzero_backward(input.token_ids, input.t_context, input.p_start, input.p_end, d_emb,
                           *grads);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckReport gradient_check(const CheckedLoss& loss_fn, const Parameters<double>& params,
                               double epsilon, double tolerance, int samples_per_tensor,
                               uint64_t seed) {
  Gradients<double> analytic = make_parameters<double>(params.config);
  loss_fn(params, &analytic);

  Parameters<double> probe = params;
  std::vector<Mat<double>*> probe_tensors;
  for_each_tensor(probe, [&probe_tensors](const std::string&, Mat<double>& mat) {
    probe_tensors.push_back(&mat);
  });

  GradCheckReport report;
  Rng rng(seed);
  size_t tensor_index = 0;
  for_each_tensor(analytic, [&](const std::string& name, const Mat<double>& grad) {
    Mat<double>& target = *probe_tensors[tensor_index++];
    const size_t n = grad.size();
    std::vector<size_t> coords;
    if (samples_per_tensor <= 0 || static_cast<size_t>(samples_per_tensor) >= n) {
      coords.resize(n);
      for (size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      for (int s = 0; s < samples_per_tensor; ++s) coords.push_back(rng.below(n));
    }

    GradCheckEntry entry{name, 0.0};
    for (size_t coord : coords) {
      const double saved = target.v[coord];
      target.v[coord] = saved + epsilon;
      const double plus = loss_fn(probe, nullptr);
      target.v[coord] = saved - epsilon;
      const double minus = loss_fn(probe, nullptr);
      target.v[coord] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = grad.v[coord];
      const double scale = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      entry.max_rel_error = std::max(entry.max_rel_error, std::fabs(a - numeric) / scale);
    }
    if (entry.max_rel_error > report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_tensor = name;
    }
    report.tensors.push_back(std::move(entry));
  });
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

// ---------------------------------------------------------------------------
// Explicit instantiations

#define PZERO_BACKPROP_INSTANTIATE(S)                                                        \
  template Mat<S> transformer_backward<S>(const Parameters<S>&, const ForwardCache<S>&,      \
                                          const Mat<S>&, Gradients<S>&);                     \
  template void embed_pzero_backward<S>(const std::vector<TokenId>&, const Mat<S>&,          \
                                        Gradients<S>&);                                      \
  template void embed_as_backward<S>(const std::vector<TokenId>&, int, int, const Mat<S>&,   \
                                     Gradients<S>&);                                         \
  template void embed_aspzero_backward<S>(const std::vector<TokenId>&, int, int, int,        \
                                          const Mat<S>&, Gradients<S>&);                     \
  template void selection_backward<S>(const Mat<S>&, int, const Parameters<S>&,              \
                                      const std::vector<S>&, const std::vector<bool>&,       \
                                      Mat<S>&, Gradients<S>&);                               \
  template void label_backward<S>(const Mat<S>&, int, const Parameters<S>&,                  \
                                  const std::vector<S>&, Mat<S>&, Gradients<S>&);            \
  template void exo_backward<S>(const Mat<S>&, int, const Parameters<S>&,                    \
                                const std::array<S, 4>&, Mat<S>&, Gradients<S>&);            \
  template StepResult pzero_step<S>(const Parameters<S>&, const PZeroInstance&,              \
                                    Gradients<S>*);                                          \
  template StepResult cloze_step<S>(const Parameters<S>&, const ClozeInstance&,              \
                                    Gradients<S>*);                                          \
  template StepResult as_step<S>(const Parameters<S>&, const ZarInstance&, Gradients<S>*);   \
  template StepResult aspzero_step<S>(const Parameters<S>&, const ZarInstance&, CaseLabel,   \
                                      Gradients<S>*);

PZERO_BACKPROP_INSTANTIATE(float)
PZERO_BACKPROP_INSTANTIATE(double)

}  // namespace pzero
