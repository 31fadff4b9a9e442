#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pzero/zar.hpp"

namespace pzero {

enum class EvalCategory : int { Dep = 0, Intra, Inter, Exophoric, ZarAll, All };

const char* eval_category_name(EvalCategory category);
EvalCategory eval_category_from_name(const std::string& name);

struct Counts {
  long gold = 0;
  long predicted = 0;
  long correct = 0;

  // Undefined ratios are reported as 0 by convention.
  double precision() const { return predicted > 0 ? double(correct) / double(predicted) : 0.0; }
  double recall() const { return gold > 0 ? double(correct) / double(gold) : 0.0; }
  double f1() const {
    const double p = precision();
    const double r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
};

struct EvalReport {
  std::map<EvalCategory, Counts> categories;  // all six aggregates
  // Base category x case label counts.
  std::map<std::pair<EvalCategory, CaseLabel>, Counts> by_label;
};

// Micro-averaged scoring. A predicted position is correct iff it is in the
// slot's gold set; a predicted exophora category is correct iff it matches
// the gold one. `none` predictions and gold-none slots contribute to neither
// predicted nor gold counts. A wrong prediction counts as a false positive
// for the category it claims and a false negative for the gold category.
EvalReport score(const std::vector<Prediction>& predictions,
                 const std::vector<ZarInstance>& instances);

// Per-slot 0/1 correctness in (instance, slot) order; slots without a
// prediction count as 0. Input to the permutation test.
std::vector<uint8_t> correctness_flags(const std::vector<Prediction>& predictions,
                                       const std::vector<ZarInstance>& instances);

enum class BreakdownAxis { Antecedents, Distance, Voice };

BreakdownAxis breakdown_axis_from_name(const std::string& name);
const char* breakdown_axis_name(BreakdownAxis axis);

struct BucketStats {
  long count = 0;
  long correct = 0;
  bool defined() const { return count > 0; }
  double recall() const { return count > 0 ? double(correct) / double(count) : 0.0; }
};

struct Breakdown {
  BreakdownAxis axis;
  std::vector<std::string> buckets;  // fixed per-axis row order
  // bucket -> category (Intra / Inter) -> stats
  std::map<std::string, std::map<EvalCategory, BucketStats>> rows;
};

// Recall per bucket. The antecedent axis buckets in-context slots by the
// number of in-input gold positions (at most one vs. more than one); the
// distance axis buckets inter slots by the "distance" metadata tag; the
// voice axis buckets in-context slots by the "voice" tag. Missing metadata
// for the requested axis raises an error listing the instance indices.
Breakdown breakdown(const std::vector<Prediction>& predictions,
                    const std::vector<ZarInstance>& instances, BreakdownAxis axis);

// Two-sided sign-flip permutation test on the mean difference of paired
// 0/1 correctness vectors. Deterministic given the seed; p in (0, 1].
double paired_permutation_test(const std::vector<uint8_t>& correct_a,
                               const std::vector<uint8_t>& correct_b, int permutations,
                               uint64_t seed);

std::string report_to_json(const EvalReport& report, const std::string& config_hash_hex,
                           uint64_t seed);
std::string report_to_table(const EvalReport& report);
std::string breakdown_to_json(const Breakdown& breakdown, const std::string& config_hash_hex,
                              uint64_t seed);
std::string breakdown_to_table(const Breakdown& breakdown);

}  // namespace pzero
