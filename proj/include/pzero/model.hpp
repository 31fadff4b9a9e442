#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pzero/corpus.hpp"
#include "pzero/rng.hpp"
#include "pzero/tensor.hpp"

namespace pzero {

struct ModelConfig {
  int d_model = 64;
  int t_max = 128;
  int layers = 2;
  int heads = 2;
  int ff_dim = 256;
  int vocab_size = 0;

  int head_dim() const { return d_model / heads; }
  void validate() const;  // throws on inconsistent dimensions

  bool operator==(const ModelConfig& other) const = default;
};

// All trainable tensors. Weight matrices are stored row-major with rows as
// output vectors, so a projection reads y = x * W^T + b.
template <class S>
struct Parameters {
  struct Layer {
    Mat<S> wq, bq, wk, bk, wv, bv, wo, bo;
    Mat<S> ln1_g, ln1_b;
    Mat<S> ff_w1, ff_b1;  // d_model -> ff_dim
    Mat<S> ff_w2, ff_b2;  // ff_dim -> d_model
    Mat<S> ln2_g, ln2_b;
  };

  ModelConfig config;
  Mat<S> e_token;      // vocab_size x D
  Mat<S> e_position;   // t_max x D
  Mat<S> e_predicate;  // 2 x D (row 1 = inside the predicate span)
  std::vector<Layer> layers;
  Mat<S> sel_w1, sel_b1, sel_w2, sel_b2;  // selection head
  Mat<S> as_w, as_b;    // 3 x D, 1 x 3; one row per case label
  Mat<S> exo_w, exo_b;  // 12 x D, 1 x 12; row = label*4 + category
};

// Enumerates every tensor in the canonical (checkpoint) order.
template <class S, class F>
void for_each_tensor(Parameters<S>& params, F&& fn) {
  fn("e_token", params.e_token);
  fn("e_position", params.e_position);
  fn("e_predicate", params.e_predicate);
  for (size_t i = 0; i < params.layers.size(); ++i) {
    auto& layer = params.layers[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";
    fn(prefix + "wq", layer.wq);
    fn(prefix + "bq", layer.bq);
    fn(prefix + "wk", layer.wk);
    fn(prefix + "bk", layer.bk);
    fn(prefix + "wv", layer.wv);
    fn(prefix + "bv", layer.bv);
    fn(prefix + "wo", layer.wo);
    fn(prefix + "bo", layer.bo);
    fn(prefix + "ln1_g", layer.ln1_g);
    fn(prefix + "ln1_b", layer.ln1_b);
    fn(prefix + "ff_w1", layer.ff_w1);
    fn(prefix + "ff_b1", layer.ff_b1);
    fn(prefix + "ff_w2", layer.ff_w2);
    fn(prefix + "ff_b2", layer.ff_b2);
    fn(prefix + "ln2_g", layer.ln2_g);
    fn(prefix + "ln2_b", layer.ln2_b);
  }
  fn("sel_w1", params.sel_w1);
  fn("sel_b1", params.sel_b1);
  fn("sel_w2", params.sel_w2);
  fn("sel_b2", params.sel_b2);
  fn("as_w", params.as_w);
  fn("as_b", params.as_b);
  fn("exo_w", params.exo_w);
  fn("exo_b", params.exo_b);
}

template <class S, class F>
void for_each_tensor(const Parameters<S>& params, F&& fn) {
  for_each_tensor(const_cast<Parameters<S>&>(params),
                  [&fn](const std::string& name, Mat<S>& mat) {
                    fn(name, static_cast<const Mat<S>&>(mat));
                  });
}

template <class S>
Parameters<S> make_parameters(const ModelConfig& config);  // zero-filled

// Weights drawn from N(0, 0.02^2), biases zero, layer-norm gains one.
template <class S>
Parameters<S> init_parameters(const ModelConfig& config, uint64_t seed);

enum class FinetuneModel { AS, ASPZero };

// Fresh head parameters at finetune start: AS redraws the predicate
// embedding and both classification heads; AS-PZero keeps the pretrained
// selection head and redraws only the exophoric head.
template <class S>
void reinit_finetune_heads(Parameters<S>& params, FinetuneModel model, uint64_t seed);

template <class S>
size_t count_parameters(const Parameters<S>& params);

template <class To, class From>
Parameters<To> cast_parameters(const Parameters<From>& params);

// ---------------------------------------------------------------------------
// Forward pass

template <class S>
struct LayerCache {
  Mat<S> x_in;
  Mat<S> q, k, v;
  std::vector<Mat<S>> attn;  // per head, T x T
  Mat<S> ctx;
  Mat<S> res1, ln1_hat;
  std::vector<S> ln1_rstd;
  Mat<S> x_mid;
  Mat<S> ff_pre, ff_act;
  Mat<S> res2, ln2_hat;
  std::vector<S> ln2_rstd;
};

template <class S>
struct ForwardCache {
  std::vector<LayerCache<S>> layers;
  std::vector<bool> key_mask;  // true = attendable
};

// Eq. 1 rows: token embedding + position embedding.
template <class S>
Mat<S> embed_pzero(const std::vector<TokenId>& token_ids, const Parameters<S>& params);

// Eq. 3 rows: Eq. 1 + predicate-membership embedding over [p_start, p_end].
template <class S>
Mat<S> embed_as(const std::vector<TokenId>& token_ids, int p_start, int p_end,
                const Parameters<S>& params);

// Query-chunk embedding: Eq. 1 + additional position embedding. The copy of
// the predicate at the end of the sequence receives the position-embedding
// rows of the in-context predicate span; everything else gets zero.
// t_context is the length of the (possibly trimmed) original context.
template <class S>
Mat<S> embed_aspzero(const std::vector<TokenId>& token_ids_prime, int t_context,
                     int p_start, int p_end, const Parameters<S>& params);

// Bidirectional multi-head self-attention encoder, post-layer-norm with
// residuals. [PAD] positions are masked out as attention keys. Throws when
// a non-finite value appears.
template <class S>
Mat<S> transformer_forward(const Parameters<S>& params, const Mat<S>& embeddings,
                           const std::vector<TokenId>* token_ids = nullptr,
                           ForwardCache<S>* cache = nullptr);

// Candidate positions for the selection and label heads: every non-special
// token plus the dummy [CLS] at position 0.
std::vector<bool> candidate_positions(const std::vector<TokenId>& token_ids);

// Eq. 2 bilinear scores; non-candidate positions are -inf.
template <class S>
std::vector<S> selection_scores(const Mat<S>& h, int mask_index, const Parameters<S>& params,
                                const std::vector<bool>& candidates);

// Eq. 4 logits (pre-softmax); non-candidate positions are -inf.
template <class S>
std::vector<S> label_logits(const Mat<S>& h, int label_index, const Parameters<S>& params,
                            const std::vector<bool>& candidates);

// Eq. 4 label-assignment probabilities over candidate positions.
template <class S>
std::vector<S> label_distribution(const Mat<S>& h, int label_index, const Parameters<S>& params,
                                  const std::vector<bool>& candidates);

// Eq. 5 logits from the dummy token state.
template <class S>
std::array<S, 4> exo_logits(const Mat<S>& h, int label_index, const Parameters<S>& params);

// Eq. 5 probabilities over {author, reader, general, none} from the dummy
// token state.
template <class S>
std::array<S, 4> exophoric_distribution(const Mat<S>& h, int label_index,
                                        const Parameters<S>& params);

// Numerically stable in-place softmax; -inf entries get probability zero.
template <class S>
void softmax_inplace(std::vector<S>& logits);

// ---------------------------------------------------------------------------
// Checkpoints: little-endian binary, float32 tensors in canonical order.

struct CheckpointMeta {
  ModelConfig config;
  uint64_t seed = 0;
  uint64_t config_hash = 0;
};

void save_checkpoint(const std::string& path, const Parameters<float>& params,
                     uint64_t seed, uint64_t config_hash);
Parameters<float> load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace pzero
