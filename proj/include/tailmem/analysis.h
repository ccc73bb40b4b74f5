#ifndef TAILMEM_ANALYSIS_H_
#define TAILMEM_ANALYSIS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailmem/dataset.h"
#include "tailmem/estimator.h"
#include "tailmem/learners.h"

namespace tailmem {

inline constexpr double kDefaultMemThreshold = 0.25;
inline constexpr double kDefaultInflThreshold = 0.15;

struct InfluencePair {
  uint32_t train_idx = 0;
  uint32_t test_idx = 0;
  double infl_estimate = 0.0;
  double mem_estimate = 0.0;
  bool same_class = true;

  friend bool operator==(const InfluencePair&, const InfluencePair&) = default;
};

// Pairs with mem_i >= theta_mem, infl(i, j) >= theta_infl and equal labels,
// by descending influence then (i, j).
std::vector<InfluencePair> SelectPairs(std::span<const double> mem, const InfluenceTable& infl, double theta_mem,
                                       double theta_infl, std::span<const int> train_labels,
                                       std::span<const int> test_labels);

struct PairStatistics {
  uint64_t n_pairs = 0;
  uint64_t n_unique_test = 0;
  // Test examples that occur in exactly one pair.
  uint64_t n_single_influencer = 0;
  double fraction_of_test_set = 0.0;
};
PairStatistics ComputePairStatistics(std::span<const InfluencePair> pairs, uint64_t n_test);

// Train indices ordered by their largest pair influence, sampled at n_egs
// evenly spaced (truncated) base positions; row c holds base + c.
std::vector<std::vector<uint32_t>> PickRepresentative(std::span<const InfluencePair> pairs, int n_copies = 3,
                                                      int n_egs = 5);

struct RemovalRow {
  double threshold = 0.0;
  uint64_t removed_count = 0;
  // Set when the removal leaves no examples or drops a class entirely.
  bool skipped = false;
  std::string skip_reason;
  std::vector<double> memorized_accuracy;  // one per repeat
  std::vector<double> random_accuracy;
  double memorized_mean = 0.0;
  double memorized_std = 0.0;
  double random_mean = 0.0;
  double random_std = 0.0;
};

struct RemovalCurve {
  uint64_t repeats = 0;
  std::vector<double> baseline_accuracy;
  double baseline_mean = 0.0;
  double baseline_std = 0.0;
  std::vector<RemovalRow> rows;
};

// For each threshold, `repeats` models trained without {i : mem_i >= theta}
// and `repeats` without an equal number of uniformly random examples (a fresh
// draw per repeat).
RemovalCurve RemovalExperiment(const LabeledDataset& train, const LabeledDataset& test, const LearnerSpec& learner,
                               std::span<const double> mem, std::span<const double> thresholds, int repeats,
                               uint64_t seed, int parallelism = 1);

struct MarginalUtilityReport {
  uint64_t repeats = 0;
  uint64_t n_removed = 0;        // |S_h|
  uint64_t n_test_affected = 0;  // |S'_h|
  uint64_t n_test = 0;
  double full_mean = 0.0;
  double full_std = 0.0;
  double removed_mean = 0.0;
  double removed_std = 0.0;
  double overall_diff_mean = 0.0;
  double overall_diff_std = 0.0;
  double restricted_full_mean = 0.0;
  double restricted_removed_mean = 0.0;
  double restricted_diff_mean = 0.0;
  double restricted_diff_std = 0.0;
  // restricted difference scaled by |S'_h| / n_test
  double contribution_mean = 0.0;
  double contribution_std = 0.0;
};

MarginalUtilityReport MarginalUtility(const LabeledDataset& train, const LabeledDataset& test,
                                      const LearnerSpec& learner, std::span<const InfluencePair> pairs, int repeats,
                                      uint64_t seed, int parallelism = 1);

struct ConsistencyRow {
  double threshold = 0.0;
  uint64_t size_a = 0;
  uint64_t size_b = 0;
  uint64_t intersection = 0;
  uint64_t union_size = 0;
  double jaccard = 1.0;        // 1 when both sets are empty
  double mean_abs_diff = 0.0;  // 0 when both sets are empty
  // Union members missing from a sparse table, valued at its floor.
  uint64_t imputed = 0;
};

struct ConsistencyReport {
  std::string kind;  // "mem" or "infl"
  std::vector<ConsistencyRow> rows;
};

ConsistencyReport MemConsistency(std::span<const double> mem_a, std::span<const double> mem_b,
                                 std::span<const double> thresholds);

// Sets are {(i, j) : infl >= theta} intersected with {mem_i >= mem_constraint}
// when a constraint is given. Sparse tables need floor <= min(theta) - 0.05.
ConsistencyReport InfluenceConsistency(const InfluenceTable& infl_a, std::span<const double> mem_a,
                                       const InfluenceTable& infl_b, std::span<const double> mem_b,
                                       std::span<const double> thresholds,
                                       std::optional<double> mem_constraint = kDefaultMemThreshold);

// One-sided paired t-test of mean(x - y) > 0.
struct PairedTestResult {
  uint64_t n = 0;
  double mean_diff = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
};
PairedTestResult PairedOneSidedTest(std::span<const double> x, std::span<const double> y);

double Mean(std::span<const double> values);
// Sample standard deviation; 0 for fewer than two values.
double SampleStd(std::span<const double> values);

std::string PairsCsv(std::span<const InfluencePair> pairs);
std::string PairStatisticsJson(const PairStatistics& stats);
std::string PicksCsv(const std::vector<std::vector<uint32_t>>& picks);
std::string RemovalCurveCsv(const RemovalCurve& curve);
std::string RemovalCurveJson(const RemovalCurve& curve);
// Two columns (threshold, mean accuracy) for one arm: "memorized" or "random".
std::string RemovalPlotData(const RemovalCurve& curve, const std::string& arm);
std::string MarginalUtilityJson(const MarginalUtilityReport& report);
std::string ConsistencyCsv(const ConsistencyReport& report);
std::string ConsistencyJson(const ConsistencyReport& report);

}  // namespace tailmem

#endif  // TAILMEM_ANALYSIS_H_
