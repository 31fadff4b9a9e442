#include "pzero/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "pzero/rng.hpp"

namespace pzero {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

const char* kCategoryNames[] = {"dep", "intra", "inter", "exophoric", "zar-all", "all"};

EvalCategory category_of_kind(SlotKind kind) {
  switch (kind) {
    case SlotKind::Dep: return EvalCategory::Dep;
    case SlotKind::Intra: return EvalCategory::Intra;
    case SlotKind::Inter: return EvalCategory::Inter;
    case SlotKind::Exophoric: return EvalCategory::Exophoric;
    case SlotKind::None: break;
  }
  fail("gold-none slot has no category");
}

int sentence_of(const std::vector<TokenId>& token_ids, int position) {
  int sentence = 0;
  for (int i = 1; i < position; ++i) {
    if (token_ids[static_cast<size_t>(i)] == special::kSep) ++sentence;
  }
  return sentence;
}

bool prediction_correct(const Prediction& prediction, const ArgumentSlot& slot) {
  if (prediction.is_position) {
    return std::find(slot.gold_positions.begin(), slot.gold_positions.end(),
                     prediction.position) != slot.gold_positions.end();
  }
  if (prediction.category == ExoCategory::None) return slot.kind == SlotKind::None;
  return slot.kind == SlotKind::Exophoric && prediction.category == slot.exo_category;
}

const ArgumentSlot& slot_of(const Prediction& prediction,
                            const std::vector<ZarInstance>& instances) {
  if (prediction.instance_index < 0 ||
      prediction.instance_index >= static_cast<int>(instances.size())) {
    fail("prediction references unknown instance " + std::to_string(prediction.instance_index));
  }
  const ZarInstance& instance = instances[static_cast<size_t>(prediction.instance_index)];
  const ArgumentSlot* slot = instance.slot_for(prediction.label);
  if (!slot) {
    fail("prediction references missing slot " +
         std::string(case_label_name(prediction.label)) + " of instance " +
         std::to_string(prediction.instance_index));
  }
  return *slot;
}

}  // namespace

const char* eval_category_name(EvalCategory category) {
  return kCategoryNames[static_cast<int>(category)];
}

EvalCategory eval_category_from_name(const std::string& name) {
  for (int i = 0; i < 6; ++i) {
    if (name == kCategoryNames[i]) return static_cast<EvalCategory>(i);
  }
  fail("unknown evaluation category: " + name);
}

EvalReport score(const std::vector<Prediction>& predictions,
                 const std::vector<ZarInstance>& instances) {
  EvalReport report;
  for (EvalCategory cat : {EvalCategory::Dep, EvalCategory::Intra, EvalCategory::Inter,
                           EvalCategory::Exophoric, EvalCategory::ZarAll, EvalCategory::All}) {
    report.categories[cat] = Counts{};
  }

  auto bump = [&report](EvalCategory cat, CaseLabel label, long gold, long predicted,
                        long correct) {
    Counts& c = report.categories[cat];
    c.gold += gold;
    c.predicted += predicted;
    c.correct += correct;
    Counts& l = report.by_label[{cat, label}];
    l.gold += gold;
    l.predicted += predicted;
    l.correct += correct;
  };

  for (const auto& instance : instances) {
    for (const auto& slot : instance.slots) {
      if (slot.kind == SlotKind::None) continue;
      bump(category_of_kind(slot.kind), slot.label, 1, 0, 0);
    }
  }

  for (const auto& prediction : predictions) {
    const ArgumentSlot& slot = slot_of(prediction, instances);
    if (!prediction.is_position && prediction.category == ExoCategory::None) continue;

    EvalCategory claimed;
    if (!prediction.is_position) {
      claimed = EvalCategory::Exophoric;
    } else if (slot.kind == SlotKind::Dep || slot.kind == SlotKind::Intra ||
               slot.kind == SlotKind::Inter) {
      claimed = category_of_kind(slot.kind);
    } else {
      // Gold is exophoric or none; attribute the spurious position by where
      // it sits relative to the predicate's sentence.
      const ZarInstance& instance = instances[static_cast<size_t>(prediction.instance_index)];
      const int pred_sentence = sentence_of(instance.token_ids, instance.p_start);
      const int pos_sentence = sentence_of(instance.token_ids, prediction.position);
      claimed = pos_sentence == pred_sentence ? EvalCategory::Intra : EvalCategory::Inter;
    }
    const long correct = prediction_correct(prediction, slot) ? 1 : 0;
    bump(claimed, prediction.label, 0, 1, correct);
  }

  // Pooled aggregates.
  for (EvalCategory cat : {EvalCategory::Intra, EvalCategory::Inter, EvalCategory::Exophoric}) {
    const Counts& c = report.categories[cat];
    report.categories[EvalCategory::ZarAll].gold += c.gold;
    report.categories[EvalCategory::ZarAll].predicted += c.predicted;
    report.categories[EvalCategory::ZarAll].correct += c.correct;
  }
  for (EvalCategory cat : {EvalCategory::Dep, EvalCategory::Intra, EvalCategory::Inter,
                           EvalCategory::Exophoric}) {
    const Counts& c = report.categories[cat];
    report.categories[EvalCategory::All].gold += c.gold;
    report.categories[EvalCategory::All].predicted += c.predicted;
    report.categories[EvalCategory::All].correct += c.correct;
  }
  return report;
}

std::vector<uint8_t> correctness_flags(const std::vector<Prediction>& predictions,
                                       const std::vector<ZarInstance>& instances) {
  std::map<std::pair<int, CaseLabel>, const Prediction*> by_slot;
  for (const auto& prediction : predictions) {
    slot_of(prediction, instances);  // validates
    by_slot[{prediction.instance_index, prediction.label}] = &prediction;
  }
  std::vector<uint8_t> flags;
  for (size_t i = 0; i < instances.size(); ++i) {
    for (const auto& slot : instances[i].slots) {
      const auto it = by_slot.find({static_cast<int>(i), slot.label});
      const bool correct =
          it != by_slot.end() && prediction_correct(*it->second, slot);
      flags.push_back(correct ? 1 : 0);
    }
  }
  return flags;
}

const char* breakdown_axis_name(BreakdownAxis axis) {
  switch (axis) {
    case BreakdownAxis::Antecedents: return "antecedents";
    case BreakdownAxis::Distance: return "distance";
    case BreakdownAxis::Voice: return "voice";
  }
  fail("bad axis");
}

BreakdownAxis breakdown_axis_from_name(const std::string& name) {
  if (name == "antecedents") return BreakdownAxis::Antecedents;
  if (name == "distance") return BreakdownAxis::Distance;
  if (name == "voice") return BreakdownAxis::Voice;
  fail("unknown breakdown axis: " + name);
}

Breakdown breakdown(const std::vector<Prediction>& predictions,
                    const std::vector<ZarInstance>& instances, BreakdownAxis axis) {
  Breakdown result;
  result.axis = axis;
  switch (axis) {
    case BreakdownAxis::Antecedents:
      result.buckets = {"only_one", "more_than_one"};
      break;
    case BreakdownAxis::Distance:
      result.buckets = {"one_before", "two_before", "more_than_two_before", "out_of_input"};
      break;
    case BreakdownAxis::Voice:
      result.buckets = {"active", "passive", "causative", "causative_passive"};
      break;
  }
  for (const auto& bucket : result.buckets) {
    result.rows[bucket][EvalCategory::Intra] = BucketStats{};
    result.rows[bucket][EvalCategory::Inter] = BucketStats{};
  }

  std::map<std::pair<int, CaseLabel>, const Prediction*> by_slot;
  for (const auto& prediction : predictions) {
    slot_of(prediction, instances);
    by_slot[{prediction.instance_index, prediction.label}] = &prediction;
  }

  std::vector<int> missing;
  for (size_t i = 0; i < instances.size(); ++i) {
    const ZarInstance& instance = instances[i];
    for (const auto& slot : instance.slots) {
      if (slot.kind != SlotKind::Intra && slot.kind != SlotKind::Inter) continue;
      std::string bucket;
      switch (axis) {
        case BreakdownAxis::Antecedents:
          bucket = slot.gold_positions.size() <= 1 ? "only_one" : "more_than_one";
          break;
        case BreakdownAxis::Distance: {
          if (slot.kind != SlotKind::Inter) continue;
          const auto it = instance.metadata.find(kDistanceKey);
          if (it == instance.metadata.end()) {
            missing.push_back(static_cast<int>(i));
            continue;
          }
          bucket = it->second;
          break;
        }
        case BreakdownAxis::Voice: {
          const auto it = instance.metadata.find(kVoiceKey);
          if (it == instance.metadata.end()) {
            missing.push_back(static_cast<int>(i));
            continue;
          }
          bucket = it->second;
          break;
        }
      }
      if (result.rows.find(bucket) == result.rows.end()) {
        fail("instance " + std::to_string(i) + ": unknown " +
             std::string(breakdown_axis_name(axis)) + " bucket \"" + bucket + "\"");
      }
      const EvalCategory cat = category_of_kind(slot.kind);
      BucketStats& stats = result.rows[bucket][cat];
      stats.count += 1;
      const auto it = by_slot.find({static_cast<int>(i), slot.label});
      if (it != by_slot.end() && prediction_correct(*it->second, slot)) stats.correct += 1;
    }
  }
  if (!missing.empty()) {
    std::string ids;
    for (int id : missing) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
    fail("missing \"" + std::string(axis == BreakdownAxis::Voice ? kVoiceKey : kDistanceKey) +
         "\" metadata for axis " + breakdown_axis_name(axis) + " on instances: " + ids);
  }
  return result;
}

double paired_permutation_test(const std::vector<uint8_t>& correct_a,
                               const std::vector<uint8_t>& correct_b, int permutations,
                               uint64_t seed) {
  if (correct_a.size() != correct_b.size()) {
    fail("paired_permutation_test: length mismatch");
  }
  if (permutations < 1) fail("paired_permutation_test: need at least one permutation");

  // d_i in {-1, 0, +1}; only the nonzero entries matter under sign flips.
  long nonzero = 0;
  long observed = 0;
  for (size_t i = 0; i < correct_a.size(); ++i) {
    const int d = static_cast<int>(correct_a[i]) - static_cast<int>(correct_b[i]);
    if (d != 0) {
      ++nonzero;
      observed += d;
    }
  }
  const long abs_observed = std::labs(observed);

  Rng rng(seed);
  const long words = (nonzero + 63) / 64;
  const int tail_bits = static_cast<int>(nonzero % 64);
  const uint64_t tail_mask = tail_bits == 0 ? ~uint64_t{0} : ((uint64_t{1} << tail_bits) - 1);

  long at_least_as_extreme = 0;
  for (int perm = 0; perm < permutations; ++perm) {
    long positives = 0;
    for (long w = 0; w < words; ++w) {
      uint64_t bits = rng.next();
      if (w == words - 1) bits &= tail_mask;
      positives += std::popcount(bits);
    }
    const long stat = std::labs(2 * positives - nonzero);
    if (stat >= abs_observed) ++at_least_as_extreme;
  }
  return static_cast<double>(at_least_as_extreme + 1) / static_cast<double>(permutations + 1);
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

json counts_to_json(const Counts& counts) {
  return json{{"gold", counts.gold},         {"predicted", counts.predicted},
              {"correct", counts.correct},   {"precision", counts.precision()},
              {"recall", counts.recall()},   {"f1", counts.f1()}};
}

}  // namespace

std::string report_to_json(const EvalReport& report, const std::string& config_hash_hex,
                           uint64_t seed) {
  json categories = json::object();
  for (const auto& [category, counts] : report.categories) {
    categories[eval_category_name(category)] = counts_to_json(counts);
  }
  json labels = json::object();
  for (const auto& [key, counts] : report.by_label) {
    labels[eval_category_name(key.first)][case_label_name(key.second)] = counts_to_json(counts);
  }
  const json j{{"config_hash", config_hash_hex},
               {"seed", seed},
               {"categories", std::move(categories)},
               {"labels", std::move(labels)}};
  return j.dump(2);
}

std::string report_to_table(const EvalReport& report) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "%-10s %8s %8s %8s %8s %8s %8s\n", "category", "gold",
                "pred", "corr", "P", "R", "F1");
  out += line;
  for (const auto& [category, counts] : report.categories) {
    std::snprintf(line, sizeof(line), "%-10s %8ld %8ld %8ld %8.4f %8.4f %8.4f\n",
                  eval_category_name(category), counts.gold, counts.predicted, counts.correct,
                  counts.precision(), counts.recall(), counts.f1());
    out += line;
  }
  return out;
}

std::string breakdown_to_json(const Breakdown& breakdown, const std::string& config_hash_hex,
                              uint64_t seed) {
  json rows = json::object();
  for (const auto& bucket : breakdown.buckets) {
    json row = json::object();
    for (const auto& [category, stats] : breakdown.rows.at(bucket)) {
      row[eval_category_name(category)] =
          json{{"count", stats.count},
               {"correct", stats.correct},
               {"recall", stats.defined() ? json(stats.recall()) : json(nullptr)}};
    }
    rows[bucket] = std::move(row);
  }
  const json j{{"config_hash", config_hash_hex},
               {"seed", seed},
               {"axis", breakdown_axis_name(breakdown.axis)},
               {"buckets", std::move(rows)}};
  return j.dump(2);
}

std::string breakdown_to_table(const Breakdown& breakdown) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "%-22s %12s %8s %12s %8s\n", breakdown_axis_name(breakdown.axis),
                "intra recall", "count", "inter recall", "count");
  out += line;
  auto cell = [](const BucketStats& stats) {
    char buffer[32];
    if (stats.defined()) {
      std::snprintf(buffer, sizeof(buffer), "%.4f", stats.recall());
    } else {
      std::snprintf(buffer, sizeof(buffer), "-");
    }
    return std::string(buffer);
  };
  for (const auto& bucket : breakdown.buckets) {
    const auto& row = breakdown.rows.at(bucket);
    const BucketStats& intra = row.at(EvalCategory::Intra);
    const BucketStats& inter = row.at(EvalCategory::Inter);
    std::snprintf(line, sizeof(line), "%-22s %12s %8ld %12s %8ld\n", bucket.c_str(),
                  cell(intra).c_str(), intra.count, cell(inter).c_str(), inter.count);
    out += line;
  }
  return out;
}

}  // namespace pzero
