#include "pzero/zar.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace pzero {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

const char* kCaseNames[] = {"NOM", "ACC", "DAT"};
const char* kKindNames[] = {"dep", "intra", "inter", "exophoric", "none"};
const char* kExoNames[] = {"author", "reader", "general", "none"};

bool out_of_input(const ZarInstance& instance) {
  const auto it = instance.metadata.find(kDistanceKey);
  return it != instance.metadata.end() && it->second == kOutOfInput;
}

}  // namespace

const char* case_label_name(CaseLabel label) { return kCaseNames[static_cast<int>(label)]; }

CaseLabel case_label_from_name(const std::string& name) {
  for (int i = 0; i < 3; ++i) {
    if (name == kCaseNames[i]) return static_cast<CaseLabel>(i);
  }
  fail("unknown case label: " + name);
}

const char* slot_kind_name(SlotKind kind) { return kKindNames[static_cast<int>(kind)]; }

SlotKind slot_kind_from_name(const std::string& name) {
  for (int i = 0; i < 5; ++i) {
    if (name == kKindNames[i]) return static_cast<SlotKind>(i);
  }
  fail("unknown slot kind: " + name);
}

const char* exo_category_name(ExoCategory category) {
  return kExoNames[static_cast<int>(category)];
}

ExoCategory exo_category_from_name(const std::string& name) {
  for (int i = 0; i < 4; ++i) {
    if (name == kExoNames[i]) return static_cast<ExoCategory>(i);
  }
  fail("unknown exophora category: " + name);
}

TokenId label_token(CaseLabel label) {
  switch (label) {
    case CaseLabel::NOM: return special::kNom;
    case CaseLabel::ACC: return special::kAcc;
    case CaseLabel::DAT: return special::kDat;
  }
  fail("invalid case label");
}

const ArgumentSlot* ZarInstance::slot_for(CaseLabel label) const {
  for (const auto& slot : slots) {
    if (slot.label == label) return &slot;
  }
  return nullptr;
}

void validate_zar_instance(const ZarInstance& instance) {
  const int t = static_cast<int>(instance.token_ids.size());
  if (t == 0 || instance.token_ids[0] != special::kCls) {
    fail("zar instance must start with [CLS]");
  }
  if (instance.p_start < 0 || instance.p_start > instance.p_end || instance.p_end >= t) {
    fail("zar instance predicate span out of range");
  }
  for (const auto& slot : instance.slots) {
    const bool in_context = slot.kind == SlotKind::Dep || slot.kind == SlotKind::Intra ||
                            slot.kind == SlotKind::Inter;
    if (in_context && slot.gold_positions.empty() && !out_of_input(instance)) {
      fail("in-context slot with no gold positions");
    }
    if (!in_context && !slot.gold_positions.empty()) {
      fail("exophoric/none slot with gold positions");
    }
    for (int pos : slot.gold_positions) {
      if (pos <= 0 || pos >= t) fail("gold position out of range");
      if (special::is_special(instance.token_ids[static_cast<size_t>(pos)])) {
        fail("gold position on a special token");
      }
    }
  }
}

const ZarInstance& build_as_input(const ZarInstance& instance) {
  validate_zar_instance(instance);
  return instance;
}

AsPzeroInput build_aspzero_input(const ZarInstance& instance, CaseLabel label, int t_max) {
  validate_zar_instance(instance);
  const int t = static_cast<int>(instance.token_ids.size());
  const int t_pred = instance.p_end - instance.p_start + 1;

  AsPzeroInput input;
  const ArgumentSlot* slot = instance.slot_for(label);
  input.has_slot = slot != nullptr;

  // Trim from the beginning of the context, keeping [CLS] at position 0.
  const int full_length = t + 2 + t_pred;
  const int overflow = std::max(0, full_length - t_max);
  if (overflow >= instance.p_start) {
    // overflow removes context positions 1..overflow
    if (overflow > 0) fail("predicate span trimmed away; instance unusable");
  }
  const int t_context = t - overflow;

  input.token_ids.reserve(static_cast<size_t>(full_length - overflow));
  input.token_ids.push_back(special::kCls);
  for (int i = 1 + overflow; i < t; ++i) {
    input.token_ids.push_back(instance.token_ids[static_cast<size_t>(i)]);
  }
  input.token_ids.push_back(special::kMask);
  input.token_ids.push_back(label_token(label));
  for (int i = instance.p_start; i <= instance.p_end; ++i) {
    input.token_ids.push_back(instance.token_ids[static_cast<size_t>(i)]);
  }

  input.t_context = t_context;
  input.mask_index = t_context;
  input.p_start = instance.p_start - overflow;
  input.p_end = instance.p_end - overflow;

  if (slot) {
    if (slot->kind == SlotKind::Exophoric || slot->kind == SlotKind::None) {
      input.gold_is_dummy = true;
      input.exo_target = slot->kind == SlotKind::Exophoric ? slot->exo_category
                                                           : ExoCategory::None;
    } else {
      for (int pos : slot->gold_positions) {
        if (pos > overflow) input.gold_positions.push_back(pos - overflow);
      }
    }
  }
  return input;
}

Prediction decode_prediction(const std::vector<double>& scores,
                             const std::array<double, 4>& exo_distribution, CaseLabel label) {
  int best = -1;
  for (size_t pos = 0; pos < scores.size(); ++pos) {
    if (!std::isfinite(scores[pos])) continue;
    if (best < 0 || scores[pos] > scores[static_cast<size_t>(best)]) {
      best = static_cast<int>(pos);
    }
  }
  if (best < 0) fail("decode: no candidate position");

  Prediction prediction;
  prediction.label = label;
  if (best != 0) {
    prediction.is_position = true;
    prediction.position = best;
    prediction.score = scores[static_cast<size_t>(best)];
    return prediction;
  }
  int best_z = 0;
  for (int z = 1; z < 4; ++z) {
    if (exo_distribution[static_cast<size_t>(z)] >
        exo_distribution[static_cast<size_t>(best_z)]) {
      best_z = z;
    }
  }
  prediction.is_position = false;
  prediction.category = static_cast<ExoCategory>(best_z);
  prediction.score = exo_distribution[static_cast<size_t>(best_z)];
  return prediction;
}

ZarGold gold_distribution_zar(const ArgumentSlot& slot, int t) {
  ZarGold gold;
  if (slot.kind == SlotKind::Exophoric || slot.kind == SlotKind::None) {
    gold.is_dummy = true;
    gold.exo_target = slot.kind == SlotKind::Exophoric ? slot.exo_category : ExoCategory::None;
    gold.positions = gold_distribution({0}, t);
  } else {
    gold.positions = gold_distribution(slot.gold_positions, t);
  }
  return gold;
}

std::vector<ZarInstance> read_zar_instances(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read zar instance file: " + path);
  std::vector<ZarInstance> instances;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      ZarInstance instance;
      instance.token_ids = j.at("t").get<std::vector<TokenId>>();
      instance.p_start = j.at("ps").get<int>() - 1;
      instance.p_end = j.at("pe").get<int>() - 1;
      for (const auto& js : j.at("slots")) {
        ArgumentSlot slot;
        slot.label = case_label_from_name(js.at("l").get<std::string>());
        slot.kind = slot_kind_from_name(js.at("k").get<std::string>());
        if (js.contains("g")) {
          for (const auto& pos : js.at("g")) slot.gold_positions.push_back(pos.get<int>() - 1);
          std::sort(slot.gold_positions.begin(), slot.gold_positions.end());
        }
        if (js.contains("x")) slot.exo_category = exo_category_from_name(js.at("x"));
        instance.slots.push_back(std::move(slot));
      }
      if (j.contains("meta")) {
        for (const auto& [key, value] : j.at("meta").items()) {
          instance.metadata[key] = value.get<std::string>();
        }
      }
      validate_zar_instance(instance);
      instances.push_back(std::move(instance));
    } catch (const std::exception& e) {
      fail(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return instances;
}

void write_zar_instances(const std::string& path, const std::vector<ZarInstance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write zar instance file: " + path);
  for (const auto& instance : instances) {
    json slots = json::array();
    for (const auto& slot : instance.slots) {
      json js{{"l", case_label_name(slot.label)}, {"k", slot_kind_name(slot.kind)}};
      json gold = json::array();
      for (int pos : slot.gold_positions) gold.push_back(pos + 1);
      js["g"] = std::move(gold);
      if (slot.kind == SlotKind::Exophoric) js["x"] = exo_category_name(slot.exo_category);
      slots.push_back(std::move(js));
    }
    json j{{"t", instance.token_ids},
           {"ps", instance.p_start + 1},
           {"pe", instance.p_end + 1},
           {"slots", std::move(slots)}};
    if (!instance.metadata.empty()) j["meta"] = instance.metadata;
    out << j.dump() << '\n';
  }
}

std::vector<Prediction> read_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read predictions file: " + path);
  std::vector<Prediction> predictions;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Prediction prediction;
      prediction.instance_index = j.at("i").get<int>();
      prediction.label = case_label_from_name(j.at("l").get<std::string>());
      if (j.contains("pos")) {
        prediction.is_position = true;
        prediction.position = j.at("pos").get<int>() - 1;
      } else {
        prediction.category = exo_category_from_name(j.at("cat").get<std::string>());
      }
      predictions.push_back(prediction);
    } catch (const std::exception& e) {
      fail(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return predictions;
}

void write_predictions(const std::string& path, const std::vector<Prediction>& predictions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write predictions file: " + path);
  for (const auto& prediction : predictions) {
    json j{{"i", prediction.instance_index}, {"l", case_label_name(prediction.label)}};
    if (prediction.is_position) {
      j["pos"] = prediction.position + 1;
    } else {
      j["cat"] = exo_category_name(prediction.category);
    }
    out << j.dump() << '\n';
  }
}

}  // namespace pzero
