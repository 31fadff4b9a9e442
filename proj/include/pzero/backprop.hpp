#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pzero/datagen.hpp"
#include "pzero/model.hpp"
#include "pzero/zar.hpp"

namespace pzero {

// Gradients share the parameter layout; make_parameters gives a zero-filled
// container of the right shapes.
template <class S>
using Gradients = Parameters<S>;

// Backward pass through the encoder. d_hidden is the gradient with respect
// to the final hidden states; the return value is the gradient with respect
// to the input embeddings. Parameter gradients accumulate into grads.
template <class S>
Mat<S> transformer_backward(const Parameters<S>& params, const ForwardCache<S>& cache,
                            const Mat<S>& d_hidden, Gradients<S>& grads);

template <class S>
void embed_pzero_backward(const std::vector<TokenId>& token_ids, const Mat<S>& d_emb,
                          Gradients<S>& grads);

template <class S>
void embed_as_backward(const std::vector<TokenId>& token_ids, int p_start, int p_end,
                       const Mat<S>& d_emb, Gradients<S>& grads);

template <class S>
void embed_aspzero_backward(const std::vector<TokenId>& token_ids_prime, int t_context,
                            int p_start, int p_end, const Mat<S>& d_emb, Gradients<S>& grads);

// Backward through Eq. 2 given d_scores (zero at non-candidates).
template <class S>
void selection_backward(const Mat<S>& h, int mask_index, const Parameters<S>& params,
                        const std::vector<S>& d_scores, const std::vector<bool>& candidates,
                        Mat<S>& d_h, Gradients<S>& grads);

// Backward through the Eq. 4 logits for one label.
template <class S>
void label_backward(const Mat<S>& h, int label_index, const Parameters<S>& params,
                    const std::vector<S>& d_logits, Mat<S>& d_h, Gradients<S>& grads);

// Backward through the Eq. 5 logits for one label.
template <class S>
void exo_backward(const Mat<S>& h, int label_index, const Parameters<S>& params,
                  const std::array<S, 4>& d_logits, Mat<S>& d_h, Gradients<S>& grads);

// ---------------------------------------------------------------------------
// Per-instance loss steps. Each runs a forward pass (and, when grads is
// non-null, the exact backward pass) and reports decode correctness for
// monitoring.

struct StepResult {
  double loss = 0.0;
  int correct = 0;
  int total = 0;  // decoded slots (or masked positions for Cloze)
};

template <class S>
StepResult pzero_step(const Parameters<S>& params, const PZeroInstance& instance,
                      Gradients<S>* grads);

// Cross-entropy over the tied-embedding vocabulary softmax at each masked
// position, averaged over the masked positions.
template <class S>
StepResult cloze_step(const Parameters<S>& params, const ClozeInstance& instance,
                      Gradients<S>* grads);

// KL on the Eq. 4 distribution per present slot, plus Eq. 5 cross-entropy
// when the gold is the dummy token. Slots whose gold fell out of the input
// are skipped.
template <class S>
StepResult as_step(const Parameters<S>& params, const ZarInstance& instance,
                   Gradients<S>* grads);

// KL on Eq. 2 scores over the query-chunk input for one label, plus Eq. 5
// cross-entropy when the gold is the dummy token.
template <class S>
StepResult aspzero_step(const Parameters<S>& params, const ZarInstance& instance,
                        CaseLabel label, Gradients<S>* grads);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking (double precision).

struct GradCheckEntry {
  std::string tensor;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  bool passed = true;
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::vector<GradCheckEntry> tensors;
};

// Evaluates the loss (and analytic gradients when the second argument is
// non-null) at the given parameters.
using CheckedLoss = std::function<double(const Parameters<double>&, Gradients<double>*)>;

// Central differences on a sampled subset of each tensor's entries
// (samples_per_tensor == 0 checks every entry). Relative error uses
// max(|analytic|, |numeric|, 1e-6) as the scale.
GradCheckReport gradient_check(const CheckedLoss& loss_fn, const Parameters<double>& params,
                               double epsilon, double tolerance, int samples_per_tensor = 16,
                               uint64_t seed = 17);

}  // namespace pzero
