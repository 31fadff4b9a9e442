#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>

#include "pzero/rng.hpp"
#include "pzero/zar.hpp"

using namespace pzero;

namespace {

ZarInstance simple_instance(int t = 10, int p_start = 6, int p_end = 7) {
  ZarInstance instance;
  instance.token_ids.push_back(special::kCls);
  for (int i = 1; i < t; ++i) instance.token_ids.push_back(special::kCount + i);
  instance.p_start = p_start;
  instance.p_end = p_end;
  ArgumentSlot slot;
  slot.label = CaseLabel::NOM;
  slot.kind = SlotKind::Intra;
  slot.gold_positions = {2, 4};
  instance.slots.push_back(slot);
  return instance;
}

}  // namespace

TEST_CASE("build_as_input validates and passes through") {
  const ZarInstance instance = simple_instance();
  const ZarInstance& same = build_as_input(instance);
  CHECK(&same == &instance);

  ZarInstance bad_span = instance;
  bad_span.p_end = 12;
  CHECK_THROWS_AS(build_as_input(bad_span), std::runtime_error);

  ZarInstance no_cls = instance;
  no_cls.token_ids[0] = special::kCount;
  CHECK_THROWS_AS(build_as_input(no_cls), std::runtime_error);

  ZarInstance gold_on_special = instance;
  gold_on_special.token_ids[2] = special::kSep;
  CHECK_THROWS_AS(build_as_input(gold_on_special), std::runtime_error);
}

TEST_CASE("query-chunk input follows the length formula") {
  const ZarInstance instance = simple_instance(10, 6, 7);
  const AsPzeroInput input = build_aspzero_input(instance, CaseLabel::NOM, 128);
  // T=10, T_pred=2: length 14, mask at 10 (0-based), label at 11, copy at 12..13
  CHECK(input.token_ids.size() == 14);
  CHECK(input.mask_index == 10);
  CHECK(input.t_context == 10);
  CHECK(input.token_ids[10] == special::kMask);
  CHECK(input.token_ids[11] == special::kNom);
  CHECK(input.token_ids[12] == instance.token_ids[6]);
  CHECK(input.token_ids[13] == instance.token_ids[7]);
  CHECK(input.gold_positions == std::vector<int>{2, 4});
  CHECK_FALSE(input.gold_is_dummy);

  const AsPzeroInput acc = build_aspzero_input(instance, CaseLabel::ACC, 128);
  CHECK(acc.token_ids[11] == special::kAcc);
  CHECK_FALSE(acc.has_slot);
}

TEST_CASE("overlong query-chunk input trims the context and re-indexes") {
  const ZarInstance instance = simple_instance(10, 6, 7);
  // Full length would be 14; T_max 12 forces trimming 2 context tokens.
  const AsPzeroInput input = build_aspzero_input(instance, CaseLabel::NOM, 12);
  CHECK(input.token_ids.size() == 12);
  CHECK(input.token_ids[0] == special::kCls);
  CHECK(input.t_context == 8);
  CHECK(input.mask_index == 8);
  CHECK(input.p_start == 4);
  CHECK(input.p_end == 5);
  // gold at 2 is trimmed away; gold at 4 re-indexes to 2
  CHECK(input.gold_positions == std::vector<int>{2});
  // the re-indexed positions carry the original surfaces
  CHECK(input.token_ids[2] == instance.token_ids[4]);
  CHECK(input.token_ids[input.p_start] == instance.token_ids[instance.p_start]);

  // trimming that would eat the predicate is an error
  ZarInstance early_predicate = simple_instance(10, 1, 2);
  CHECK_THROWS_AS(build_aspzero_input(early_predicate, CaseLabel::NOM, 8),
                  std::runtime_error);
}

TEST_CASE("query-chunk length is min(T_max, T + 2 + T_pred) on random instances") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const int t = 5 + static_cast<int>(rng.below(20));
    int p_start = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(t - 1)));
    int p_end = std::min(t - 1, p_start + static_cast<int>(rng.below(3)));
    ZarInstance instance;
    instance.token_ids.push_back(special::kCls);
    for (int i = 1; i < t; ++i) instance.token_ids.push_back(special::kCount + i);
    instance.p_start = p_start;
    instance.p_end = p_end;
    const int full = t + 2 + (p_end - p_start + 1);
    const int t_max = full - static_cast<int>(rng.below(4));
    if (full - t_max >= p_start) continue;  // predicate would be trimmed
    const AsPzeroInput input = build_aspzero_input(instance, CaseLabel::DAT, t_max);
    CHECK(static_cast<int>(input.token_ids.size()) == std::min(t_max, full));
    CHECK(input.token_ids[0] == special::kCls);
    CHECK(input.token_ids[static_cast<size_t>(input.mask_index)] == special::kMask);
  }
}

TEST_CASE("decode takes the argmax with lowest-index tie-break") {
  const std::array<double, 4> exo{0.1, 0.2, 0.3, 0.4};
  std::vector<double> scores{-1.0, 0.5, 2.0, 0.5, -0.5, 2.0, 1.0};

  SUBCASE("clear peak") {
    scores[6] = 9.0;
    const Prediction p = decode_prediction(scores, exo, CaseLabel::NOM);
    CHECK(p.is_position);
    CHECK(p.position == 6);
  }

  SUBCASE("exact tie goes to the lower position") {
    const Prediction p = decode_prediction(scores, exo, CaseLabel::ACC);
    CHECK(p.is_position);
    CHECK(p.position == 2);
  }

  SUBCASE("dummy routes to the exophoric head") {
    scores[0] = 10.0;
    const Prediction p = decode_prediction(scores, exo, CaseLabel::NOM);
    CHECK_FALSE(p.is_position);
    CHECK(p.category == ExoCategory::None);  // argmax of exo is index 3
  }

  SUBCASE("masked positions are never selected") {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> masked{1.0, -inf, -inf, 0.2};
    const Prediction p = decode_prediction(masked, exo, CaseLabel::NOM);
    CHECK_FALSE(p.is_position);  // position 0 wins -> exophoric route
  }
}

TEST_CASE("gold distributions for ZAR slots") {
  ArgumentSlot intra;
  intra.label = CaseLabel::NOM;
  intra.kind = SlotKind::Intra;
  intra.gold_positions = {3, 7};
  const ZarGold two = gold_distribution_zar(intra, 10);
  CHECK_FALSE(two.is_dummy);
  CHECK(two.positions.probs[3] == doctest::Approx(0.5));
  CHECK(two.positions.probs[7] == doctest::Approx(0.5));

  ArgumentSlot exo;
  exo.label = CaseLabel::ACC;
  exo.kind = SlotKind::Exophoric;
  exo.exo_category = ExoCategory::Author;
  const ZarGold author = gold_distribution_zar(exo, 10);
  CHECK(author.is_dummy);
  CHECK(author.positions.probs[0] == doctest::Approx(1.0));
  CHECK(author.exo_target == ExoCategory::Author);

  ArgumentSlot none;
  none.label = CaseLabel::DAT;
  none.kind = SlotKind::None;
  const ZarGold empty = gold_distribution_zar(none, 10);
  CHECK(empty.is_dummy);
  CHECK(empty.positions.probs[0] == doctest::Approx(1.0));
  CHECK(empty.exo_target == ExoCategory::None);
}

TEST_CASE("decoding a gold distribution recovers a gold answer") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    ArgumentSlot slot;
    slot.label = CaseLabel::NOM;
    const int t = 6 + static_cast<int>(rng.below(10));
    if (rng.below(3) == 0) {
      slot.kind = rng.below(2) == 0 ? SlotKind::Exophoric : SlotKind::None;
      if (slot.kind == SlotKind::Exophoric) {
        slot.exo_category = static_cast<ExoCategory>(rng.below(3));
      }
    } else {
      slot.kind = SlotKind::Inter;
      const int count = 1 + static_cast<int>(rng.below(3));
      for (int i = 0; i < count; ++i) {
        const int pos = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(t - 1)));
        slot.gold_positions.push_back(pos);
      }
      std::sort(slot.gold_positions.begin(), slot.gold_positions.end());
      slot.gold_positions.erase(
          std::unique(slot.gold_positions.begin(), slot.gold_positions.end()),
          slot.gold_positions.end());
    }

    const ZarGold gold = gold_distribution_zar(slot, t);
    std::array<double, 4> exo{0.1, 0.1, 0.1, 0.1};
    if (gold.is_dummy) exo[static_cast<size_t>(gold.exo_target)] = 0.7;
    const Prediction p = decode_prediction(gold.positions.probs, exo, slot.label);
    if (gold.is_dummy) {
      CHECK_FALSE(p.is_position);
      CHECK(p.category == gold.exo_target);
    } else {
      CHECK(p.is_position);
      CHECK(std::find(slot.gold_positions.begin(), slot.gold_positions.end(), p.position) !=
            slot.gold_positions.end());
    }
  }
}

TEST_CASE("zar instance files round trip with 1-based positions") {
  ZarInstance instance = simple_instance();
  instance.slots[0].kind = SlotKind::Inter;
  ArgumentSlot exo;
  exo.label = CaseLabel::ACC;
  exo.kind = SlotKind::Exophoric;
  exo.exo_category = ExoCategory::General;
  instance.slots.push_back(exo);
  instance.metadata["voice"] = "active";
  instance.metadata["distance"] = "one_before";

  const std::string path = "/tmp/pzero_zar_instances.jsonl";
  write_zar_instances(path, {instance});
  const auto loaded = read_zar_instances(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0] == instance);
}

TEST_CASE("prediction files round trip") {
  Prediction a;
  a.instance_index = 0;
  a.label = CaseLabel::NOM;
  a.is_position = true;
  a.position = 5;
  Prediction b;
  b.instance_index = 1;
  b.label = CaseLabel::DAT;
  b.is_position = false;
  b.category = ExoCategory::None;

  const std::string path = "/tmp/pzero_zar_preds.jsonl";
  write_predictions(path, {a, b});
  const auto loaded = read_predictions(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].is_position);
  CHECK(loaded[0].position == 5);
  CHECK_FALSE(loaded[1].is_position);
  CHECK(loaded[1].category == ExoCategory::None);
}
