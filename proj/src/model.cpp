#include "pzero/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace pzero {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInitStd = 0.02;
constexpr uint32_t kCheckpointMagic = 0x4b435a50;  // "PZCK"
constexpr uint32_t kCheckpointVersion = 1;

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

template <class S>
S neg_inf() {
  return -std::numeric_limits<S>::infinity();
}

bool is_weight(const std::string& name) {
  // Gains, biases and bias-like vectors start at fixed values.
  const auto base = name.find('.') == std::string::npos ? name : name.substr(name.find('.') + 1);
  return !(base.starts_with("b") || base.starts_with("ln") || base.starts_with("ff_b") ||
           base.starts_with("sel_b") || base == "as_b" || base == "exo_b");
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model <= 0 || layers <= 0 || heads <= 0 || ff_dim <= 0 || vocab_size <= 0) {
    fail("model config: all dimensions must be positive");
  }
  if (d_model % heads != 0) fail("model config: D must be divisible by heads");
  if (t_max < 8) fail("model config: T_max must be >= 8");
}

template <class S>
Parameters<S> make_parameters(const ModelConfig& config) {
  config.validate();
  Parameters<S> params;
  params.config = config;
  const int d = config.d_model;
  params.e_token = Mat<S>(config.vocab_size, d);
  params.e_position = Mat<S>(config.t_max, d);
  params.e_predicate = Mat<S>(2, d);
  params.layers.resize(static_cast<size_t>(config.layers));
  for (auto& layer : params.layers) {
    layer.wq = Mat<S>(d, d);
    layer.bq = Mat<S>(1, d);
    layer.wk = Mat<S>(d, d);
    layer.bk = Mat<S>(1, d);
    layer.wv = Mat<S>(d, d);
    layer.bv = Mat<S>(1, d);
    layer.wo = Mat<S>(d, d);
    layer.bo = Mat<S>(1, d);
    layer.ln1_g = Mat<S>(1, d);
    layer.ln1_b = Mat<S>(1, d);
    layer.ff_w1 = Mat<S>(config.ff_dim, d);
    layer.ff_b1 = Mat<S>(1, config.ff_dim);
    layer.ff_w2 = Mat<S>(d, config.ff_dim);
    layer.ff_b2 = Mat<S>(1, d);
    layer.ln2_g = Mat<S>(1, d);
    layer.ln2_b = Mat<S>(1, d);
  }
  params.sel_w1 = Mat<S>(d, d);
  params.sel_b1 = Mat<S>(1, d);
  params.sel_w2 = Mat<S>(d, d);
  params.sel_b2 = Mat<S>(1, d);
  params.as_w = Mat<S>(3, d);
  params.as_b = Mat<S>(1, 3);
  params.exo_w = Mat<S>(12, d);
  params.exo_b = Mat<S>(1, 12);
  return params;
}

template <class S>
static void randomize(const std::string& name, Mat<S>& mat, Rng& rng) {
  if (name.find("ln") != std::string::npos && name.ends_with("_g")) {
    std::fill(mat.v.begin(), mat.v.end(), S(1));
    return;
  }
  if (!is_weight(name)) {
    mat.zero();
    return;
  }
  for (auto& value : mat.v) value = static_cast<S>(rng.normal(0.0, kInitStd));
}

template <class S>
Parameters<S> init_parameters(const ModelConfig& config, uint64_t seed) {
  Parameters<S> params = make_parameters<S>(config);
  Rng rng(seed);
  for_each_tensor(params, [&rng](const std::string& name, Mat<S>& mat) {
    randomize(name, mat, rng);
  });
  return params;
}

template <class S>
void reinit_finetune_heads(Parameters<S>& params, FinetuneModel model, uint64_t seed) {
  Rng rng(seed);
  if (model == FinetuneModel::AS) {
    randomize<S>("e_predicate", params.e_predicate, rng);
    randomize<S>("as_w", params.as_w, rng);
    params.as_b.zero();
  }
  randomize<S>("exo_w", params.exo_w, rng);
  params.exo_b.zero();
}

template <class S>
size_t count_parameters(const Parameters<S>& params) {
  size_t total = 0;
  for_each_tensor(params, [&total](const std::string&, const Mat<S>& mat) {
    total += mat.size();
  });
  return total;
}

template <class To, class From>
Parameters<To> cast_parameters(const Parameters<From>& params) {
  Parameters<To> out = make_parameters<To>(params.config);
  // Walk both parameter sets in lockstep through the canonical order.
  std::vector<Mat<To>*> dst;
  for_each_tensor(out, [&dst](const std::string&, Mat<To>& mat) { dst.push_back(&mat); });
  size_t index = 0;
  for_each_tensor(params, [&](const std::string&, const Mat<From>& mat) {
    Mat<To>& target = *dst[index++];
    for (size_t i = 0; i < mat.v.size(); ++i) target.v[i] = static_cast<To>(mat.v[i]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings

template <class S>
static Mat<S> base_embedding(const std::vector<TokenId>& token_ids,
                             const Parameters<S>& params) {
  const int t = static_cast<int>(token_ids.size());
  if (t == 0) fail("empty token sequence");
  if (t > params.config.t_max) fail("sequence longer than T_max");
  const int d = params.config.d_model;
  Mat<S> emb(t, d);
  for (int i = 0; i < t; ++i) {
    const TokenId id = token_ids[static_cast<size_t>(i)];
    if (id < 0 || id >= params.config.vocab_size) {
      fail("token id out of vocabulary range: " + std::to_string(id));
    }
    const S* tok = params.e_token.row(id);
    const S* pos = params.e_position.row(i);
    S* out = emb.row(i);
    for (int j = 0; j < d; ++j) out[j] = tok[j] + pos[j];
  }
  return emb;
}

template <class S>
Mat<S> embed_pzero(const std::vector<TokenId>& token_ids, const Parameters<S>& params) {
  return base_embedding(token_ids, params);
}

template <class S>
Mat<S> embed_as(const std::vector<TokenId>& token_ids, int p_start, int p_end,
                const Parameters<S>& params) {
  const int t = static_cast<int>(token_ids.size());
  if (p_start < 0 || p_start > p_end || p_end >= t) fail("invalid predicate span");
  Mat<S> emb = base_embedding(token_ids, params);
  const int d = params.config.d_model;
  for (int i = 0; i < t; ++i) {
    const bool inside = i >= p_start && i <= p_end;
    const S* pred = params.e_predicate.row(inside ? 1 : 0);
    S* out = emb.row(i);
    for (int j = 0; j < d; ++j) out[j] += pred[j];
  }
  return emb;
}

template <class S>
Mat<S> embed_aspzero(const std::vector<TokenId>& token_ids_prime, int t_context,
                     int p_start, int p_end, const Parameters<S>& params) {
  const int t_prime = static_cast<int>(token_ids_prime.size());
  if (p_start < 0 || p_start > p_end || p_end >= t_context) {
    fail("invalid predicate span for query-chunk input");
  }
  if (t_prime != t_context + 2 + (p_end - p_start + 1)) {
    fail("query-chunk input length inconsistent with context and predicate span");
  }
  Mat<S> emb = base_embedding(token_ids_prime, params);
  const int d = params.config.d_model;
  for (int i = 0; i < t_prime; ++i) {
    const int source = i - (t_context + 2) + p_start;
    if (source < p_start || source > p_end) continue;
    const S* pos = params.e_position.row(source);
    S* out = emb.row(i);
    for (int j = 0; j < d; ++j) out[j] += pos[j];
  }
  return emb;
}

// ---------------------------------------------------------------------------
// Encoder

template <class S>
static void layer_norm_rows(const Mat<S>& x, const Mat<S>& gain, const Mat<S>& bias,
                            Mat<S>& out, Mat<S>& hat, std::vector<S>& rstd) {
  const int d = x.cols;
  rstd.assign(static_cast<size_t>(x.rows), S(0));
  for (int i = 0; i < x.rows; ++i) {
    const S* xi = x.row(i);
    S mean = S(0);
    for (int j = 0; j < d; ++j) mean += xi[j];
    mean /= static_cast<S>(d);
    S var = S(0);
    for (int j = 0; j < d; ++j) {
      const S centered = xi[j] - mean;
      var += centered * centered;
    }
    var /= static_cast<S>(d);
    const S r = S(1) / std::sqrt(var + static_cast<S>(kLnEps));
    rstd[static_cast<size_t>(i)] = r;
    S* hi = hat.row(i);
    S* oi = out.row(i);
    const S* g = gain.row(0);
    const S* b = bias.row(0);
    for (int j = 0; j < d; ++j) {
      hi[j] = (xi[j] - mean) * r;
      oi[j] = g[j] * hi[j] + b[j];
    }
  }
}

template <class S>
static S gelu(S x) {
  return S(0.5) * x * (S(1) + static_cast<S>(std::erf(static_cast<double>(x) * 0.7071067811865475)));
}

template <class S>
Mat<S> transformer_forward(const Parameters<S>& params, const Mat<S>& embeddings,
                           const std::vector<TokenId>* token_ids, ForwardCache<S>* cache) {
  const ModelConfig& config = params.config;
  const int t = embeddings.rows;
  const int d = config.d_model;
  const int heads = config.heads;
  const int dh = config.head_dim();
  if (embeddings.cols != d) fail("embedding width does not match D");
  if (!all_finite(embeddings)) fail("non-finite embeddings");

  std::vector<bool> key_mask(static_cast<size_t>(t), true);
  if (token_ids) {
    for (int i = 0; i < t; ++i) {
      key_mask[static_cast<size_t>(i)] = (*token_ids)[static_cast<size_t>(i)] != special::kPad;
    }
  }
  if (cache) {
    cache->layers.assign(static_cast<size_t>(config.layers), LayerCache<S>{});
    cache->key_mask = key_mask;
  }

  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  Mat<S> x = embeddings;
  Mat<S> q(t, d), k(t, d), v(t, d), ctx(t, d), attn_out(t, d);
  Mat<S> ff_pre(t, config.ff_dim), ff_act(t, config.ff_dim), ff_out(t, d);

  for (int li = 0; li < config.layers; ++li) {
    const auto& layer = params.layers[static_cast<size_t>(li)];
    LayerCache<S>* lc = cache ? &cache->layers[static_cast<size_t>(li)] : nullptr;
    if (lc) lc->x_in = x;

    matmul_nt(q, x, layer.wq);
    add_row_bias(q, layer.bq);
    matmul_nt(k, x, layer.wk);
    add_row_bias(k, layer.bk);
    matmul_nt(v, x, layer.wv);
    add_row_bias(v, layer.bv);
    if (lc) {
      lc->q = q;
      lc->k = k;
      lc->v = v;
      lc->attn.assign(static_cast<size_t>(heads), Mat<S>());
    }

    for (int h = 0; h < heads; ++h) {
      const int off = h * dh;
      Mat<S> scores(t, t);
      for (int i = 0; i < t; ++i) {
        const S* qi = q.row(i) + off;
        S* si = scores.row(i);
        for (int j = 0; j < t; ++j) {
          if (!key_mask[static_cast<size_t>(j)]) {
            si[j] = neg_inf<S>();
            continue;
          }
          const S* kj = k.row(j) + off;
          S acc = S(0);
          for (int p = 0; p < dh; ++p) acc += qi[p] * kj[p];
          si[j] = acc * scale;
        }
        // softmax over keys
        S max = neg_inf<S>();
        for (int j = 0; j < t; ++j) max = std::max(max, si[j]);
        S sum = S(0);
        for (int j = 0; j < t; ++j) {
          si[j] = std::exp(si[j] - max);
          sum += si[j];
        }
        const S inv = S(1) / sum;
        for (int j = 0; j < t; ++j) si[j] *= inv;
      }
      for (int i = 0; i < t; ++i) {
        const S* ai = scores.row(i);
        S* ci = ctx.row(i) + off;
        for (int p = 0; p < dh; ++p) ci[p] = S(0);
        for (int j = 0; j < t; ++j) {
          const S aij = ai[j];
          const S* vj = v.row(j) + off;
          for (int p = 0; p < dh; ++p) ci[p] += aij * vj[p];
        }
      }
      if (lc) lc->attn[static_cast<size_t>(h)] = std::move(scores);
    }
    if (lc) lc->ctx = ctx;

    matmul_nt(attn_out, ctx, layer.wo);
    add_row_bias(attn_out, layer.bo);

    Mat<S> res1 = x;
    add_inplace(res1, attn_out);
    Mat<S> x_mid(t, d), ln1_hat(t, d);
    std::vector<S> ln1_rstd;
    layer_norm_rows(res1, layer.ln1_g, layer.ln1_b, x_mid, ln1_hat, ln1_rstd);
    if (lc) {
      lc->res1 = res1;
      lc->ln1_hat = ln1_hat;
      lc->ln1_rstd = ln1_rstd;
      lc->x_mid = x_mid;
    }

    matmul_nt(ff_pre, x_mid, layer.ff_w1);
    add_row_bias(ff_pre, layer.ff_b1);
    for (size_t i = 0; i < ff_pre.v.size(); ++i) ff_act.v[i] = gelu(ff_pre.v[i]);
    matmul_nt(ff_out, ff_act, layer.ff_w2);
    add_row_bias(ff_out, layer.ff_b2);
    if (lc) {
      lc->ff_pre = ff_pre;
      lc->ff_act = ff_act;
    }

    Mat<S> res2 = x_mid;
    add_inplace(res2, ff_out);
    Mat<S> ln2_hat(t, d);
    std::vector<S> ln2_rstd;
    layer_norm_rows(res2, layer.ln2_g, layer.ln2_b, x, ln2_hat, ln2_rstd);
    if (lc) {
      lc->res2 = res2;
      lc->ln2_hat = ln2_hat;
      lc->ln2_rstd = ln2_rstd;
    }
  }

  if (!all_finite(x)) fail("non-finite hidden states");
  return x;
}

std::vector<bool> candidate_positions(const std::vector<TokenId>& token_ids) {
  std::vector<bool> mask(token_ids.size(), false);
  for (size_t i = 0; i < token_ids.size(); ++i) {
    const TokenId id = token_ids[i];
    mask[i] = !special::is_special(id) || (i == 0 && id == special::kCls);
  }
  return mask;
}

template <class S>
void softmax_inplace(std::vector<S>& logits) {
  S max = neg_inf<S>();
  for (S x : logits) max = std::max(max, x);
  if (!(max > neg_inf<S>())) fail("softmax over an empty candidate set");
  S sum = S(0);
  for (S& x : logits) {
    x = std::exp(x - max);
    sum += x;
  }
  const S inv = S(1) / sum;
  for (S& x : logits) x *= inv;
}

template <class S>
std::vector<S> selection_scores(const Mat<S>& h, int mask_index, const Parameters<S>& params,
                                const std::vector<bool>& candidates) {
  const int t = h.rows;
  const int d = h.cols;
  if (mask_index < 0 || mask_index >= t) fail("mask index out of range");
  if (static_cast<int>(candidates.size()) != t) fail("candidate mask size mismatch");

  // v = W2 h_mask + b2
  std::vector<S> key(static_cast<size_t>(d));
  const S* hm = h.row(mask_index);
  for (int i = 0; i < d; ++i) {
    const S* wi = params.sel_w2.row(i);
    S acc = params.sel_b2(0, i);
    for (int j = 0; j < d; ++j) acc += wi[j] * hm[j];
    key[static_cast<size_t>(i)] = acc;
  }

  std::vector<S> scores(static_cast<size_t>(t), neg_inf<S>());
  for (int pos = 0; pos < t; ++pos) {
    if (!candidates[static_cast<size_t>(pos)]) continue;
    const S* hp = h.row(pos);
    S score = S(0);
    for (int i = 0; i < d; ++i) {
      const S* wi = params.sel_w1.row(i);
      S acc = params.sel_b1(0, i);
      for (int j = 0; j < d; ++j) acc += wi[j] * hp[j];
      score += acc * key[static_cast<size_t>(i)];
    }
    scores[static_cast<size_t>(pos)] = score;
  }
  return scores;
}

template <class S>
std::vector<S> label_logits(const Mat<S>& h, int label_index, const Parameters<S>& params,
                            const std::vector<bool>& candidates) {
  const int t = h.rows;
  const int d = h.cols;
  if (label_index < 0 || label_index > 2) fail("label index out of range");
  std::vector<S> logits(static_cast<size_t>(t), neg_inf<S>());
  const S* w = params.as_w.row(label_index);
  const S b = params.as_b(0, label_index);
  for (int pos = 0; pos < t; ++pos) {
    if (!candidates[static_cast<size_t>(pos)]) continue;
    const S* hp = h.row(pos);
    S acc = b;
    for (int j = 0; j < d; ++j) acc += w[j] * hp[j];
    logits[static_cast<size_t>(pos)] = acc;
  }
  return logits;
}

template <class S>
std::vector<S> label_distribution(const Mat<S>& h, int label_index, const Parameters<S>& params,
                                  const std::vector<bool>& candidates) {
  std::vector<S> logits = label_logits(h, label_index, params, candidates);
  softmax_inplace(logits);
  return logits;
}

template <class S>
std::array<S, 4> exo_logits(const Mat<S>& h, int label_index, const Parameters<S>& params) {
  const int d = h.cols;
  if (label_index < 0 || label_index > 2) fail("label index out of range");
  std::array<S, 4> logits{};
  const S* h1 = h.row(0);
  for (int z = 0; z < 4; ++z) {
    const int row = label_index * 4 + z;
    const S* w = params.exo_w.row(row);
    S acc = params.exo_b(0, row);
    for (int j = 0; j < d; ++j) acc += w[j] * h1[j];
    logits[static_cast<size_t>(z)] = acc;
  }
  return logits;
}

template <class S>
std::array<S, 4> exophoric_distribution(const Mat<S>& h, int label_index,
                                        const Parameters<S>& params) {
  const std::array<S, 4> raw = exo_logits(h, label_index, params);
  std::vector<S> logits(raw.begin(), raw.end());
  softmax_inplace(logits);
  return {logits[0], logits[1], logits[2], logits[3]};
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

template <class T>
void write_raw(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <class T>
T read_raw(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const Parameters<float>& params,
                     uint64_t seed, uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write checkpoint: " + path);
  write_raw(out, kCheckpointMagic);
  write_raw(out, kCheckpointVersion);
  const ModelConfig& config = params.config;
  for (int field : {config.d_model, config.t_max, config.layers, config.heads, config.ff_dim,
                    config.vocab_size}) {
    write_raw(out, static_cast<uint32_t>(field));
  }
  write_raw(out, seed);
  write_raw(out, config_hash);
  for_each_tensor(params, [&out](const std::string&, const Mat<float>& mat) {
    out.write(reinterpret_cast<const char*>(mat.v.data()),
              static_cast<std::streamsize>(mat.v.size() * sizeof(float)));
  });
  if (!out) fail("failed writing checkpoint: " + path);
}

Parameters<float> load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read checkpoint: " + path);
  if (read_raw<uint32_t>(in) != kCheckpointMagic) fail("bad checkpoint magic: " + path);
  if (read_raw<uint32_t>(in) != kCheckpointVersion) fail("unsupported checkpoint version");
  ModelConfig config;
  config.d_model = static_cast<int>(read_raw<uint32_t>(in));
  config.t_max = static_cast<int>(read_raw<uint32_t>(in));
  config.layers = static_cast<int>(read_raw<uint32_t>(in));
  config.heads = static_cast<int>(read_raw<uint32_t>(in));
  config.ff_dim = static_cast<int>(read_raw<uint32_t>(in));
  config.vocab_size = static_cast<int>(read_raw<uint32_t>(in));
  const uint64_t seed = read_raw<uint64_t>(in);
  const uint64_t config_hash = read_raw<uint64_t>(in);
  Parameters<float> params = make_parameters<float>(config);
  for_each_tensor(params, [&in, &path](const std::string& name, Mat<float>& mat) {
    in.read(reinterpret_cast<char*>(mat.v.data()),
            static_cast<std::streamsize>(mat.v.size() * sizeof(float)));
    if (!in) fail("truncated checkpoint at tensor " + name + ": " + path);
  });
  if (meta) {
    meta->config = config;
    meta->seed = seed;
    meta->config_hash = config_hash;
  }
  return params;
}

// ---------------------------------------------------------------------------
// Explicit instantiations

#define PZERO_INSTANTIATE(S)                                                                  \
  template Parameters<S> make_parameters<S>(const ModelConfig&);                             \
  template Parameters<S> init_parameters<S>(const ModelConfig&, uint64_t);                   \
  template void reinit_finetune_heads<S>(Parameters<S>&, FinetuneModel, uint64_t);           \
  template size_t count_parameters<S>(const Parameters<S>&);                                 \
  template Mat<S> embed_pzero<S>(const std::vector<TokenId>&, const Parameters<S>&);         \
  template Mat<S> embed_as<S>(const std::vector<TokenId>&, int, int, const Parameters<S>&);  \
  template Mat<S> embed_aspzero<S>(const std::vector<TokenId>&, int, int, int,               \
                                   const Parameters<S>&);                                    \
  template Mat<S> transformer_forward<S>(const Parameters<S>&, const Mat<S>&,                \
                                         const std::vector<TokenId>*, ForwardCache<S>*);     \
  template std::vector<S> selection_scores<S>(const Mat<S>&, int, const Parameters<S>&,      \
                                              const std::vector<bool>&);                     \
  template std::vector<S> label_logits<S>(const Mat<S>&, int, const Parameters<S>&,          \
                                          const std::vector<bool>&);                         \
  template std::vector<S> label_distribution<S>(const Mat<S>&, int, const Parameters<S>&,    \
                                                const std::vector<bool>&);                   \
  template std::array<S, 4> exo_logits<S>(const Mat<S>&, int, const Parameters<S>&);         \
  template std::array<S, 4> exophoric_distribution<S>(const Mat<S>&, int,                    \
                                                      const Parameters<S>&);                 \
  template void softmax_inplace<S>(std::vector<S>&);

PZERO_INSTANTIATE(float)
PZERO_INSTANTIATE(double)

template Parameters<double> cast_parameters<double, float>(const Parameters<float>&);
template Parameters<float> cast_parameters<float, double>(const Parameters<double>&);
template Parameters<float> cast_parameters<float, float>(const Parameters<float>&);
template Parameters<double> cast_parameters<double, double>(const Parameters<double>&);

}  // namespace pzero
