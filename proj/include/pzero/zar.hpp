#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pzero/corpus.hpp"
#include "pzero/datagen.hpp"

namespace pzero {

enum class CaseLabel : int { NOM = 0, ACC = 1, DAT = 2 };
enum class SlotKind : int { Dep, Intra, Inter, Exophoric, None };
enum class ExoCategory : int { Author = 0, Reader = 1, General = 2, None = 3 };

const char* case_label_name(CaseLabel label);
CaseLabel case_label_from_name(const std::string& name);
const char* slot_kind_name(SlotKind kind);
SlotKind slot_kind_from_name(const std::string& name);
const char* exo_category_name(ExoCategory category);
ExoCategory exo_category_from_name(const std::string& name);

// Token id of the query-chunk label token for a case label.
TokenId label_token(CaseLabel label);

// Metadata key marking a slot whose gold argument fell outside the (trimmed)
// input window; such slots keep an empty gold set and score as unreachable.
inline constexpr const char* kDistanceKey = "distance";
inline constexpr const char* kVoiceKey = "voice";
inline constexpr const char* kOutOfInput = "out_of_input";

struct ArgumentSlot {
  CaseLabel label = CaseLabel::NOM;
  SlotKind kind = SlotKind::None;
  std::vector<int> gold_positions;  // sorted; token positions in (0, T)
  ExoCategory exo_category = ExoCategory::None;  // meaningful when kind == Exophoric

  bool operator==(const ArgumentSlot& other) const = default;
};

struct ZarInstance {
  std::vector<TokenId> token_ids;  // token_ids[0] == [CLS]
  int p_start = 0;
  int p_end = 0;
  std::vector<ArgumentSlot> slots;  // at most one per label
  std::map<std::string, std::string> metadata;

  const ArgumentSlot* slot_for(CaseLabel label) const;
  bool operator==(const ZarInstance& other) const = default;
};

struct Prediction {
  int instance_index = 0;
  CaseLabel label = CaseLabel::NOM;
  bool is_position = false;
  int position = -1;                          // set when is_position
  ExoCategory category = ExoCategory::None;   // set otherwise
  double score = 0.0;
};

// Validates the instance invariants; slots marked out-of-input in metadata
// may carry an empty gold set.
void validate_zar_instance(const ZarInstance& instance);

// Pass-through with validation; [CLS] at position 0 is the dummy token.
const ZarInstance& build_as_input(const ZarInstance& instance);

// Query-chunk input for one case label: context ++ [MASK] ++ label token ++
// predicate copy, trimmed from the front of the context (keeping [CLS] at
// position 0) to fit t_max. Gold positions and the predicate span are
// re-indexed; gold positions trimmed away are dropped.
struct AsPzeroInput {
  std::vector<TokenId> token_ids;
  int mask_index = 0;  // == t_context
  int t_context = 0;   // trimmed context length
  int p_start = 0;
  int p_end = 0;
  std::vector<int> gold_positions;  // re-indexed for this label's slot
  bool gold_is_dummy = false;       // exophoric / none slot
  ExoCategory exo_target = ExoCategory::None;
  bool has_slot = false;
};

AsPzeroInput build_aspzero_input(const ZarInstance& instance, CaseLabel label, int t_max);

// Argmax decode with lowest-position tie-break; position 0 routes to the
// exophoric head argmax (which may be `none`).
Prediction decode_prediction(const std::vector<double>& scores,
                             const std::array<double, 4>& exo_distribution, CaseLabel label);

struct ZarGold {
  GoldDistribution positions;       // over T positions; dummy mass at 0
  bool is_dummy = false;
  ExoCategory exo_target = ExoCategory::None;  // 4-way one-hot target
};

// Gold distribution over positions plus the 4-way exophoric target. For
// in-context slots the mass is spread equally over the gold positions; for
// exophoric/none slots it sits on the dummy token.
ZarGold gold_distribution_zar(const ArgumentSlot& slot, int t);

std::vector<ZarInstance> read_zar_instances(const std::string& path);
void write_zar_instances(const std::string& path, const std::vector<ZarInstance>& instances);

std::vector<Prediction> read_predictions(const std::string& path);
void write_predictions(const std::string& path, const std::vector<Prediction>& predictions);

}  // namespace pzero
