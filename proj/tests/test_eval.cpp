#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "pzero/eval.hpp"
#include "pzero/rng.hpp"

using namespace pzero;

namespace {

ZarInstance instance_with(SlotKind kind, CaseLabel label = CaseLabel::NOM,
                          ExoCategory exo = ExoCategory::Author) {
  ZarInstance instance;
  // [CLS] a b [SEP] c d predicate [SEP]
  instance.token_ids = {special::kCls, 10, 11, special::kSep, 12, 13, 14, special::kSep};
  instance.p_start = 6;
  instance.p_end = 6;
  ArgumentSlot slot;
  slot.label = label;
  slot.kind = kind;
  if (kind == SlotKind::Dep || kind == SlotKind::Intra) {
    slot.gold_positions = {4};
  } else if (kind == SlotKind::Inter) {
    slot.gold_positions = {1, 2};
  } else if (kind == SlotKind::Exophoric) {
    slot.exo_category = exo;
  }
  instance.slots.push_back(slot);
  return instance;
}

Prediction position_prediction(int instance_index, int position,
                               CaseLabel label = CaseLabel::NOM) {
  Prediction p;
  p.instance_index = instance_index;
  p.label = label;
  p.is_position = true;
  p.position = position;
  return p;
}

Prediction category_prediction(int instance_index, ExoCategory category,
                               CaseLabel label = CaseLabel::NOM) {
  Prediction p;
  p.instance_index = instance_index;
  p.label = label;
  p.is_position = false;
  p.category = category;
  return p;
}

}  // namespace

TEST_CASE("perfect predictions score one everywhere") {
  std::vector<ZarInstance> instances{
      instance_with(SlotKind::Dep), instance_with(SlotKind::Intra),
      instance_with(SlotKind::Inter), instance_with(SlotKind::Exophoric)};
  std::vector<Prediction> predictions{
      position_prediction(0, 4), position_prediction(1, 4), position_prediction(2, 1),
      category_prediction(3, ExoCategory::Author)};

  const EvalReport report = score(predictions, instances);
  for (EvalCategory cat : {EvalCategory::Dep, EvalCategory::Intra, EvalCategory::Inter,
                           EvalCategory::Exophoric, EvalCategory::ZarAll, EvalCategory::All}) {
    CHECK(report.categories.at(cat).precision() == doctest::Approx(1.0));
    CHECK(report.categories.at(cat).recall() == doctest::Approx(1.0));
    CHECK(report.categories.at(cat).f1() == doctest::Approx(1.0));
  }
  CHECK(report.by_label.at({EvalCategory::Inter, CaseLabel::NOM}).correct == 1);
}

TEST_CASE("all-none predictions give zero recall and zero precision by convention") {
  std::vector<ZarInstance> instances{instance_with(SlotKind::Inter),
                                     instance_with(SlotKind::Exophoric)};
  std::vector<Prediction> predictions{category_prediction(0, ExoCategory::None),
                                      category_prediction(1, ExoCategory::None)};
  const EvalReport report = score(predictions, instances);
  const Counts& all = report.categories.at(EvalCategory::All);
  CHECK(all.predicted == 0);
  CHECK(all.gold == 2);
  CHECK(all.recall() == doctest::Approx(0.0));
  CHECK(all.precision() == doctest::Approx(0.0));
  CHECK(all.f1() == doctest::Approx(0.0));
}

TEST_CASE("one of two inter predictions correct gives 0.5 across the board") {
  std::vector<ZarInstance> instances{instance_with(SlotKind::Inter),
                                     instance_with(SlotKind::Inter)};
  std::vector<Prediction> predictions{position_prediction(0, 1),   // correct
                                      position_prediction(1, 5)};  // wrong
  const EvalReport report = score(predictions, instances);
  const Counts& inter = report.categories.at(EvalCategory::Inter);
  CHECK(inter.gold == 2);
  CHECK(inter.predicted == 2);
  CHECK(inter.correct == 1);
  CHECK(inter.precision() == doctest::Approx(0.5));
  CHECK(inter.recall() == doctest::Approx(0.5));
  CHECK(inter.f1() == doctest::Approx(0.5));
}

TEST_CASE("a wrong exophora category is both a false positive and a false negative") {
  std::vector<ZarInstance> instances{instance_with(SlotKind::Exophoric, CaseLabel::NOM,
                                                   ExoCategory::Author)};
  std::vector<Prediction> predictions{category_prediction(0, ExoCategory::Reader)};
  const EvalReport report = score(predictions, instances);
  const Counts& exo = report.categories.at(EvalCategory::Exophoric);
  CHECK(exo.gold == 1);
  CHECK(exo.predicted == 1);
  CHECK(exo.correct == 0);
}

TEST_CASE("a position prediction against an exophoric gold lands in intra or inter") {
  std::vector<ZarInstance> instances{instance_with(SlotKind::Exophoric)};
  // position 4 is in the predicate's sentence -> intra false positive
  const EvalReport intra_fp = score({position_prediction(0, 4)}, instances);
  CHECK(intra_fp.categories.at(EvalCategory::Intra).predicted == 1);
  CHECK(intra_fp.categories.at(EvalCategory::Exophoric).gold == 1);
  // position 1 precedes the predicate's sentence -> inter false positive
  const EvalReport inter_fp = score({position_prediction(0, 1)}, instances);
  CHECK(inter_fp.categories.at(EvalCategory::Inter).predicted == 1);
}

TEST_CASE("scoring is invariant to prediction order and pools consistently") {
  std::vector<ZarInstance> instances;
  std::vector<Prediction> predictions;
  Rng rng(17);
  for (int i = 0; i < 40; ++i) {
    const SlotKind kinds[] = {SlotKind::Dep, SlotKind::Intra, SlotKind::Inter,
                              SlotKind::Exophoric, SlotKind::None};
    instances.push_back(instance_with(kinds[rng.below(5)]));
    if (rng.below(4) == 0) {
      predictions.push_back(category_prediction(i, static_cast<ExoCategory>(rng.below(4))));
    } else {
      predictions.push_back(position_prediction(i, 1 + static_cast<int>(rng.below(6))));
    }
  }
  // skip positions that land on [SEP]
  for (auto& p : predictions) {
    if (p.is_position && (p.position == 3 || p.position == 7)) p.position = 2;
  }

  const EvalReport base = score(predictions, instances);
  std::vector<Prediction> shuffled = predictions;
  rng.shuffle(shuffled);
  const EvalReport permuted = score(shuffled, instances);

  for (const auto& [cat, counts] : base.categories) {
    CHECK(counts.gold == permuted.categories.at(cat).gold);
    CHECK(counts.predicted == permuted.categories.at(cat).predicted);
    CHECK(counts.correct == permuted.categories.at(cat).correct);
  }

  const auto& cats = base.categories;
  CHECK(cats.at(EvalCategory::ZarAll).gold ==
        cats.at(EvalCategory::Intra).gold + cats.at(EvalCategory::Inter).gold +
            cats.at(EvalCategory::Exophoric).gold);
  CHECK(cats.at(EvalCategory::All).predicted ==
        cats.at(EvalCategory::Dep).predicted + cats.at(EvalCategory::Intra).predicted +
            cats.at(EvalCategory::Inter).predicted + cats.at(EvalCategory::Exophoric).predicted);
  CHECK(cats.at(EvalCategory::All).correct ==
        cats.at(EvalCategory::Dep).correct + cats.at(EvalCategory::ZarAll).correct);
}

TEST_CASE("predictions referencing unknown instances are an error") {
  std::vector<ZarInstance> instances{instance_with(SlotKind::Inter)};
  CHECK_THROWS_AS(score({position_prediction(3, 1)}, instances), std::runtime_error);
  CHECK_THROWS_AS(score({position_prediction(0, 1, CaseLabel::DAT)}, instances),
                  std::runtime_error);
}

TEST_CASE("antecedent-count breakdown buckets by in-input gold positions") {
  std::vector<ZarInstance> instances{instance_with(SlotKind::Intra),   // one gold
                                     instance_with(SlotKind::Inter)};  // two golds
  std::vector<Prediction> predictions{position_prediction(0, 4), position_prediction(1, 1)};
  const Breakdown result = breakdown(predictions, instances, BreakdownAxis::Antecedents);
  CHECK(result.rows.at("only_one").at(EvalCategory::Intra).count == 1);
  CHECK(result.rows.at("only_one").at(EvalCategory::Intra).correct == 1);
  CHECK(result.rows.at("more_than_one").at(EvalCategory::Inter).count == 1);
  CHECK(result.rows.at("only_one").at(EvalCategory::Inter).count == 0);
  CHECK_FALSE(result.rows.at("only_one").at(EvalCategory::Inter).defined());
}

TEST_CASE("distance breakdown covers the out-of-input bucket with zero recall") {
  ZarInstance in_window = instance_with(SlotKind::Inter);
  in_window.metadata[kDistanceKey] = "one_before";
  ZarInstance out_of_window = instance_with(SlotKind::Inter);
  out_of_window.slots[0].gold_positions.clear();
  out_of_window.metadata[kDistanceKey] = kOutOfInput;
  validate_zar_instance(out_of_window);

  std::vector<ZarInstance> instances{in_window, out_of_window};
  std::vector<Prediction> predictions{position_prediction(0, 1), position_prediction(1, 1)};
  const Breakdown result = breakdown(predictions, instances, BreakdownAxis::Distance);
  CHECK(result.rows.at("one_before").at(EvalCategory::Inter).count == 1);
  CHECK(result.rows.at("one_before").at(EvalCategory::Inter).recall() == doctest::Approx(1.0));
  const BucketStats& out = result.rows.at(kOutOfInput).at(EvalCategory::Inter);
  CHECK(out.count == 1);
  CHECK(out.correct == 0);
  CHECK(out.recall() == doctest::Approx(0.0));

  // the score() recall is consistent with the bucket-weighted recall
  const EvalReport report = score(predictions, instances);
  const Counts& inter = report.categories.at(EvalCategory::Inter);
  long weighted_correct = 0, weighted_count = 0;
  for (const auto& [bucket, row] : result.rows) {
    weighted_correct += row.at(EvalCategory::Inter).correct;
    weighted_count += row.at(EvalCategory::Inter).count;
  }
  CHECK(weighted_count == inter.gold);
  CHECK(weighted_correct == inter.correct);
}

TEST_CASE("voice breakdown requires metadata and lists offenders") {
  ZarInstance tagged = instance_with(SlotKind::Intra);
  tagged.metadata[kVoiceKey] = "passive";
  ZarInstance untagged = instance_with(SlotKind::Inter);
  std::vector<ZarInstance> instances{tagged, untagged};
  std::vector<Prediction> predictions{position_prediction(0, 4), position_prediction(1, 1)};

  CHECK_THROWS_WITH_AS(breakdown(predictions, instances, BreakdownAxis::Voice),
                       doctest::Contains("instances: 1"), std::runtime_error);

  instances[1].metadata[kVoiceKey] = "active";
  const Breakdown result = breakdown(predictions, instances, BreakdownAxis::Voice);
  CHECK(result.rows.at("passive").at(EvalCategory::Intra).count == 1);
  CHECK(result.rows.at("active").at(EvalCategory::Inter).count == 1);
  CHECK(result.rows.at("causative").at(EvalCategory::Intra).count == 0);
}

TEST_CASE("permutation test identities") {
  SUBCASE("identical vectors give p = 1") {
    const std::vector<uint8_t> a{1, 0, 1, 1, 0};
    CHECK(paired_permutation_test(a, a, 500, 3) == doctest::Approx(1.0));
  }

  SUBCASE("maximally separated vectors give p below 1/permutations") {
    std::vector<uint8_t> a(50, 1), b(50, 0);
    const double p = paired_permutation_test(a, b, 1000, 3);
    CHECK(p < 1.0 / 1000.0 + 1e-9);
    CHECK(p > 0.0);
  }

  SUBCASE("two-sided p is symmetric under swapping the systems") {
    Rng rng(5);
    std::vector<uint8_t> a, b;
    for (int i = 0; i < 200; ++i) {
      a.push_back(rng.below(2) == 0);
      b.push_back(rng.below(2) == 0);
    }
    const double pab = paired_permutation_test(a, b, 2000, 11);
    const double pba = paired_permutation_test(b, a, 2000, 11);
    CHECK(pab == doctest::Approx(pba));
    CHECK(pab > 0.0);
    CHECK(pab <= 1.0);
  }

  SUBCASE("length mismatch is an error") {
    CHECK_THROWS_AS(paired_permutation_test({1, 0}, {1}, 10, 1), std::runtime_error);
  }
}

TEST_CASE("reports render to JSON and tables") {
  std::vector<ZarInstance> instances{instance_with(SlotKind::Inter)};
  std::vector<Prediction> predictions{position_prediction(0, 1)};
  const EvalReport report = score(predictions, instances);
  const std::string json_text = report_to_json(report, "deadbeef", 42);
  CHECK(json_text.find("\"config_hash\": \"deadbeef\"") != std::string::npos);
  CHECK(json_text.find("\"inter\"") != std::string::npos);
  const std::string table = report_to_table(report);
  CHECK(table.find("inter") != std::string::npos);

  ZarInstance tagged = instance_with(SlotKind::Inter);
  tagged.metadata[kDistanceKey] = "two_before";
  const Breakdown bd = breakdown({position_prediction(0, 1)}, {tagged},
                                 BreakdownAxis::Distance);
  const std::string bd_table = breakdown_to_table(bd);
  CHECK(bd_table.find("two_before") != std::string::npos);
  CHECK(bd_table.find("-") != std::string::npos);  // empty buckets dash out
  const std::string bd_json = breakdown_to_json(bd, "deadbeef", 42);
  CHECK(bd_json.find("\"out_of_input\"") != std::string::npos);
}
