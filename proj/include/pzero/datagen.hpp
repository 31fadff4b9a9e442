#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pzero/corpus.hpp"

namespace pzero {

// All positions are 0-based in memory: [CLS] sits at position 0 and the
// serialized instance files use 1-based positions (converted at the I/O
// boundary only).

struct PZeroInstance {
  std::vector<TokenId> token_ids;   // token_ids[0] == [CLS]
  int mask_index = 0;               // the single [MASK]
  std::vector<int> answer_positions;  // sorted, non-empty, in (0, T)
  std::string doc_id;

  bool operator==(const PZeroInstance& other) const = default;
};

struct ClozeInstance {
  std::vector<TokenId> token_ids;         // [MASK] at each masked position
  std::vector<int> masked_positions;      // sorted, non-empty
  std::map<int, TokenId> original_ids;    // defined exactly on masked_positions

  bool operator==(const ClozeInstance& other) const = default;
};

struct GoldDistribution {
  std::vector<double> probs;  // length T, sums to 1, equal mass on support
};

// Token window of up to n consecutive sentences ending at a given sentence,
// with a [SEP] after each sentence, pruned from the beginning to fit T_max
// once [CLS] is prepended.
struct Window {
  std::vector<TokenId> token_ids;
  int first_sentence = 0;  // index of the first surviving window sentence
  std::vector<int> sentence_boundaries;  // positions of surviving [SEP]s
  // word_positions[sentence][word] = token position, or -1 if pruned away.
  std::map<int, std::vector<int>> word_positions;
  bool usable = true;  // false when the entire last sentence was pruned
};

Window build_window(const Document& doc, int last_sentence_index, int n, int t_max,
                    const Vocabulary& vocab);

// One instance per (last sentence, NP with at least one same-surface match
// in the window). The masked NP is replaced by a single [MASK]; answers are
// the last-token positions of every matching NP that survived pruning.
std::vector<PZeroInstance> emit_pzero_instances(const Document& doc, int n, int t_max,
                                                const Vocabulary& vocab);

// Equal mass over the answer positions, zero elsewhere.
GoldDistribution gold_distribution(const std::vector<int>& answer_positions, int t);

// Masks each non-special position independently with probability mask_rate;
// redraws until at least one position is masked. Throws when the sequence
// has no maskable position.
ClozeInstance cloze_mask(const std::vector<TokenId>& token_ids, double mask_rate,
                         uint64_t rng_seed);

void validate(const PZeroInstance& instance);  // throws on invariant violation

void write_pzero_instances(const std::string& path, const std::vector<PZeroInstance>& instances);
std::vector<PZeroInstance> read_pzero_instances(const std::string& path);

void write_cloze_instances(const std::string& path, const std::vector<ClozeInstance>& instances);
std::vector<ClozeInstance> read_cloze_instances(const std::string& path);

// Rebuilds the unmasked sequence; used to re-mask per epoch.
std::vector<TokenId> cloze_original_sequence(const ClozeInstance& instance);

}  // namespace pzero
