#include <algorithm>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "tailmem/analysis.h"
#include "tailmem/estimator.h"
#include "tailmem/rng.h"
#include "test_util.h"

namespace tailmem {
namespace {

InfluenceTable DenseTable(uint64_t n, uint64_t n_test, std::vector<double> values) {
  return InfluenceTable::Dense(n, n_test, std::move(values), std::vector<uint64_t>(n, 1), 2);
}

TEST(SelectPairs, FiltersOnAllThreePredicates) {
  const std::vector<double> mem{0.3, 0.1};
  const InfluenceTable infl = DenseTable(2, 2, {0.2, 0.5, 0.9, 0.9});
  const std::vector<int> train_labels{0, 0};
  const std::vector<int> test_labels{0, 1};
  const auto pairs = SelectPairs(mem, infl, 0.25, 0.15, train_labels, test_labels);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].train_idx, 0u);
  EXPECT_EQ(pairs[0].test_idx, 0u);
  EXPECT_EQ(pairs[0].infl_estimate, 0.2);
  EXPECT_EQ(pairs[0].mem_estimate, 0.3);
}

TEST(SelectPairs, ZeroTableGivesNothingAndThresholdsAreChecked) {
  const std::vector<double> mem{0.9, 0.9};
  const InfluenceTable infl = DenseTable(2, 2, {0, 0, 0, 0});
  const std::vector<int> labels{0, 0};
  EXPECT_TRUE(SelectPairs(mem, infl, 0.25, 0.15, labels, labels).empty());
  EXPECT_THROW(SelectPairs(mem, infl, 1.5, 0.15, labels, labels), std::invalid_argument);
  EXPECT_THROW(SelectPairs(mem, infl, 0.25, -1.01, labels, labels), std::invalid_argument);
}

TEST(SelectPairs, BruteForceRescanOnRandomTables) {
  KeyedRng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const uint64_t n = 1 + rng.Below(8);
    const uint64_t n_test = 1 + rng.Below(8);
    std::vector<double> mem(n), values(n * n_test);
    std::vector<int> train_labels(n), test_labels(n_test);
    // Coarse grid so ties in influence occur.
    for (auto& v : mem) v = static_cast<double>(rng.Below(9)) / 8.0 - 0.5;
    for (auto& v : values) v = static_cast<double>(rng.Below(9)) / 8.0 - 0.5;
    for (auto& y : train_labels) y = static_cast<int>(rng.Below(2));
    for (auto& y : test_labels) y = static_cast<int>(rng.Below(2));
    const InfluenceTable infl = DenseTable(n, n_test, values);
    const auto pairs = SelectPairs(mem, infl, 0.25, 0.125, train_labels, test_labels);

    std::set<std::pair<uint32_t, uint32_t>> expected;
    for (uint32_t i = 0; i < n; ++i) {
      for (uint32_t j = 0; j < n_test; ++j) {
        if (mem[i] >= 0.25 && values[i * n_test + j] >= 0.125 && train_labels[i] == test_labels[j]) {
          expected.insert({i, j});
        }
      }
    }
    std::set<std::pair<uint32_t, uint32_t>> got;
    for (const auto& p : pairs) got.insert({p.train_idx, p.test_idx});
    EXPECT_EQ(got, expected);
    EXPECT_EQ(got.size(), pairs.size());
    for (size_t k = 1; k < pairs.size(); ++k) {
      const auto& a = pairs[k - 1];
      const auto& b = pairs[k];
      EXPECT_TRUE(a.infl_estimate > b.infl_estimate ||
                  (a.infl_estimate == b.infl_estimate &&
                   std::pair(a.train_idx, a.test_idx) < std::pair(b.train_idx, b.test_idx)));
    }
  }
}

TEST(SelectPairs, SparseTableBelowThresholdIsRejected) {
  const std::vector<double> mem{0.5};
  const std::vector<int> labels{0};
  const InfluenceTable sparse = InfluenceTable::Sparse(1, 1, 0.2, {{0, 0, 0.3}}, {1}, 2);
  EXPECT_EQ(SelectPairs(mem, sparse, 0.25, 0.25, labels, labels).size(), 1u);
  EXPECT_THROW(SelectPairs(mem, sparse, 0.25, 0.15, labels, labels), std::invalid_argument);
}

std::vector<InfluencePair> Pairs(const std::vector<std::pair<uint32_t, uint32_t>>& ij) {
  std::vector<InfluencePair> out;
  for (const auto& [i, j] : ij) out.push_back({i, j, 0.5, 0.5, true});
  return out;
}

TEST(PairStatistics, Counts) {
  const PairStatistics s = ComputePairStatistics(Pairs({{0, 5}, {1, 5}, {2, 6}}), 10);
  EXPECT_EQ(s.n_pairs, 3u);
  EXPECT_EQ(s.n_unique_test, 2u);
  EXPECT_EQ(s.n_single_influencer, 1u);
  EXPECT_DOUBLE_EQ(s.fraction_of_test_set, 0.2);
  const PairStatistics empty = ComputePairStatistics({}, 10);
  EXPECT_EQ(empty.n_pairs, 0u);
  EXPECT_EQ(empty.n_unique_test, 0u);
  EXPECT_EQ(empty.n_single_influencer, 0u);
  EXPECT_EQ(empty.fraction_of_test_set, 0.0);
}

TEST(PairStatistics, MatchesBruteForceRecount) {
  KeyedRng rng(4);
  std::vector<std::pair<uint32_t, uint32_t>> ij;
  for (uint32_t i = 0; i < 15; ++i) {
    for (uint32_t j = 0; j < 12; ++j) {
      if (rng.Below(6) == 0) ij.push_back({i, j});
    }
  }
  std::map<uint32_t, int> per_test;
  for (const auto& [i, j] : ij) ++per_test[j];
  const PairStatistics s = ComputePairStatistics(Pairs(ij), 12);
  EXPECT_EQ(s.n_unique_test, per_test.size());
  EXPECT_EQ(s.n_single_influencer,
            static_cast<uint64_t>(std::count_if(per_test.begin(), per_test.end(),
                                                [](const auto& kv) { return kv.second == 1; })));
}

TEST(PickRepresentative, LinspaceBasePositions) {
  std::vector<InfluencePair> pairs;
  // Train index k has max influence 1 - k/100, so the sorted order is 0..19.
  for (uint32_t k = 0; k < 20; ++k) pairs.push_back({k, 0, 1.0 - k / 100.0, 0.5, true});
  const auto picks = PickRepresentative(pairs, 3, 5);
  ASSERT_EQ(picks.size(), 3u);
  const std::vector<uint32_t> base{0, 4, 8, 12, 17};
  for (uint32_t c = 0; c < 3; ++c) {
    ASSERT_EQ(picks[c].size(), 5u);
    for (size_t e = 0; e < 5; ++e) EXPECT_EQ(picks[c][e], base[e] + c);
  }
}

TEST(PickRepresentative, UsesMaxInfluencePerTrainIndex) {
  // Index 7 appears twice; its larger value puts it first.
  const std::vector<InfluencePair> pairs{
      {3, 0, 0.5, 0.5, true}, {7, 0, 0.2, 0.5, true}, {7, 1, 0.9, 0.5, true}, {1, 2, 0.3, 0.5, true}};
  const auto picks = PickRepresentative(pairs, 1, 3);
  EXPECT_EQ(picks[0], (std::vector<uint32_t>{7, 3, 1}));
}

TEST(PickRepresentative, DegenerateLengths) {
  const auto exact = PickRepresentative(Pairs({{4, 0}, {9, 0}, {2, 1}}), 3, 5);
  for (const auto& row : exact) {
    for (uint32_t v : row) EXPECT_TRUE(v == 4 || v == 9 || v == 2);
  }
  EXPECT_THROW(PickRepresentative(Pairs({{4, 0}, {4, 1}}), 3, 5), std::invalid_argument);
  EXPECT_THROW(PickRepresentative({}, 3, 5), std::invalid_argument);
}

TEST(Consistency, WorkedExample) {
  const std::vector<double> a{0.3, 0.5};
  const std::vector<double> b{0.4, 0.1};
  const std::vector<double> thresholds{0.25};
  const ConsistencyReport r = MemConsistency(a, b, thresholds);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(r.rows[0].jaccard, 0.5);
  EXPECT_DOUBLE_EQ(r.rows[0].mean_abs_diff, 0.25);
  EXPECT_EQ(r.rows[0].union_size, 2u);
  EXPECT_EQ(r.rows[0].intersection, 1u);
}

TEST(Consistency, IdentitySymmetryAndEmptySets) {
  KeyedRng rng(8);
  std::vector<double> a(30), b(30);
  for (auto& v : a) v = rng.Uniform() * 2 - 1;
  for (auto& v : b) v = rng.Uniform() * 2 - 1;
  const std::vector<double> thresholds{-0.5, 0.0, 0.25, 0.9, 1.0};
  for (const auto& row : MemConsistency(a, a, thresholds).rows) {
    EXPECT_EQ(row.jaccard, 1.0);
    EXPECT_EQ(row.mean_abs_diff, 0.0);
  }
  const auto ab = MemConsistency(a, b, thresholds);
  const auto ba = MemConsistency(b, a, thresholds);
  for (size_t k = 0; k < thresholds.size(); ++k) {
    EXPECT_EQ(ab.rows[k].jaccard, ba.rows[k].jaccard);
    EXPECT_DOUBLE_EQ(ab.rows[k].mean_abs_diff, ba.rows[k].mean_abs_diff);
  }
  const std::vector<double> high{1.0};
  const std::vector<double> low{0.0, 0.1};
  const auto empty = MemConsistency(low, low, high);
  EXPECT_EQ(empty.rows[0].jaccard, 1.0);
  EXPECT_EQ(empty.rows[0].mean_abs_diff, 0.0);
  EXPECT_THROW(MemConsistency(a, low, thresholds), std::invalid_argument);
}

TEST(Consistency, InfluenceUsesMemConstraintAndImputesSparseFloor) {
  const std::vector<double> mem_a{0.5, 0.1};
  const std::vector<double> mem_b{0.5, 0.5};
  const InfluenceTable a = DenseTable(2, 1, {0.4, 0.9});
  const InfluenceTable b = DenseTable(2, 1, {0.2, 0.9});
  const std::vector<double> thresholds{0.15};
  // A's set is {(0,0)}; B's is {(0,0),(1,0)}.
  const auto r = InfluenceConsistency(a, mem_a, b, mem_b, thresholds);
  EXPECT_DOUBLE_EQ(r.rows[0].jaccard, 0.5);
  EXPECT_DOUBLE_EQ(r.rows[0].mean_abs_diff, (0.2 + 0.0) / 2);
  // Without the constraint both sets are {(0,0),(1,0)}.
  EXPECT_EQ(InfluenceConsistency(a, mem_a, b, mem_b, thresholds, std::nullopt).rows[0].jaccard, 1.0);

  const InfluenceTable sparse = InfluenceTable::Sparse(2, 1, 0.05, {{1, 0, 0.9}}, {1, 1}, 2);
  const auto imputed = InfluenceConsistency(sparse, mem_b, b, mem_b, thresholds);
  EXPECT_EQ(imputed.rows[0].imputed, 1u);
  EXPECT_DOUBLE_EQ(imputed.rows[0].mean_abs_diff, (0.2 - 0.05) / 2);
  const InfluenceTable too_high = InfluenceTable::Sparse(2, 1, 0.12, {{1, 0, 0.9}}, {1, 1}, 2);
  EXPECT_THROW(InfluenceConsistency(too_high, mem_b, b, mem_b, thresholds), std::invalid_argument);
}

TEST(Stats, MeanStdAndPairedTest) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(Mean(v), 2.5);
  EXPECT_NEAR(SampleStd(v), 1.2909944487358056, 1e-12);
  EXPECT_EQ(SampleStd(std::vector<double>{3.0}), 0.0);
  const std::vector<double> x{0.80, 0.82, 0.79, 0.81, 0.83};
  const std::vector<double> y{0.70, 0.73, 0.71, 0.69, 0.72};
  const PairedTestResult r = PairedOneSidedTest(x, y);
  EXPECT_EQ(r.n, 5u);
  EXPECT_NEAR(r.mean_diff, 0.1, 1e-12);
  EXPECT_LT(r.p_value, 1e-4);
  EXPECT_GT(PairedOneSidedTest(y, x).p_value, 0.999);
  EXPECT_THROW(PairedOneSidedTest(x, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Removal, RemovedCountsAndDegenerateRows) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  std::vector<double> mem(d.train.size());
  for (size_t i = 0; i < mem.size(); ++i) mem[i] = static_cast<double>(i) / 20.0;
  const std::vector<double> thresholds{0.3, 0.9, -1.0};
  const RemovalCurve curve =
      RemovalExperiment(d.train, d.test, LearnerSpec{KnnSpec{1}}, mem, thresholds, 3, 11, 1);
  ASSERT_EQ(curve.rows.size(), 3u);
  EXPECT_EQ(curve.baseline_accuracy.size(), 3u);
  EXPECT_EQ(curve.rows[0].removed_count, 6u);  // 6/20 .. 11/20
  EXPECT_EQ(curve.rows[1].removed_count, 0u);
  EXPECT_FALSE(curve.rows[1].skipped);
  EXPECT_EQ(curve.rows[1].memorized_mean, curve.baseline_mean);
  EXPECT_EQ(curve.rows[2].removed_count, d.train.size());
  EXPECT_TRUE(curve.rows[2].skipped);
  EXPECT_TRUE(curve.rows[2].memorized_accuracy.empty());
}

TEST(Removal, DeterministicGivenSeed) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  const std::vector<double> mem(d.train.size(), 0.0);
  const std::vector<double> thresholds{0.0};
  LogregSpec logreg;
  logreg.epochs = 3;
  const auto a = RemovalExperiment(d.train, d.test, LearnerSpec{logreg}, mem, thresholds, 2, 5, 1);
  const auto b = RemovalExperiment(d.train, d.test, LearnerSpec{logreg}, mem, thresholds, 2, 5, 4);
  EXPECT_EQ(RemovalCurveCsv(a), RemovalCurveCsv(b));
}

TEST(Marginal, EmptyPairsGiveNoDifference) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  const MarginalUtilityReport r = MarginalUtility(d.train, d.test, LearnerSpec{KnnSpec{1}}, {}, 4, 3, 1);
  EXPECT_EQ(r.n_removed, 0u);
  EXPECT_EQ(r.overall_diff_mean, 0.0);
  EXPECT_EQ(r.contribution_mean, 0.0);
}

TEST(Marginal, ContributionIsScaledRestrictedDifference) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  const auto pairs = Pairs({{0, 0}, {1, 0}, {2, 3}});
  const MarginalUtilityReport r = MarginalUtility(d.train, d.test, LearnerSpec{KnnSpec{1}}, pairs, 2, 3, 1);
  EXPECT_EQ(r.n_removed, 3u);
  EXPECT_EQ(r.n_test_affected, 2u);
  EXPECT_NEAR(r.contribution_mean, r.restricted_diff_mean * 2.0 / d.test.size(), 1e-12);
}

}  // namespace
}  // namespace tailmem
