#include <gtest/gtest.h>

#include "tailmem/estimator.h"
#include "tailmem/oracle.h"
#include "tailmem/trials.h"
#include "test_util.h"

namespace tailmem {
namespace {

const LearnerSpec kKnn{KnnSpec{1}};

TEST(Estimator, ConditionalDifferenceAndFallback) {
  const ConditionalEstimate e = ConditionalDifference(3, 4, 1, 4);
  EXPECT_DOUBLE_EQ(e.estimate, 0.5);
  EXPECT_FALSE(e.fallback_used);
  const ConditionalEstimate f = ConditionalDifference(4, 4, 0, 0);
  EXPECT_EQ(f.acc_out, 0.5);
  EXPECT_EQ(f.estimate, 0.5);
  EXPECT_TRUE(f.fallback_used);
}

TEST(Estimator, EmptyStoreIsRejected) {
  const TrialStore store(4, 2, 2, 0, "kind=knn\n");
  EXPECT_THROW(EstimateMemorization(store), std::invalid_argument);
  EXPECT_THROW(EstimateInfluence(store), std::invalid_argument);
}

TEST(Estimator, ConstantLearnerGivesExactZeros) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  const TrialStore store = RunTrials(d.train, d.test, {12, 8, 8, 200, 3, LearnerSpec{ConstantSpec{}}}, 1);
  for (double v : EstimateMemorization(store).estimates()) EXPECT_EQ(v, 0.0);
  for (const auto& e : EstimateInfluence(store).EntriesAtLeast(-2.0)) EXPECT_EQ(e.estimate, 0.0);
}

TEST(Estimator, InclusionCountsAddUpAndValuesInRange) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  const TrialStore store = RunTrials(d.train, d.test, {12, 8, 8, 200, 3, kKnn}, 1);
  for (const auto& row : EstimateMemorization(store).rows) {
    EXPECT_EQ(row.n_in + row.n_out, 200u);
    EXPECT_GE(row.estimate, -1.0);
    EXPECT_LE(row.estimate, 1.0);
  }
  const InfluenceTable infl = EstimateInfluence(store);
  for (size_t i = 0; i < 12; ++i) EXPECT_EQ(infl.n_in(i) + infl.n_out(i), 200u);
}

TEST(Estimator, AlwaysCorrectTargetHasZeroInfluence) {
  // A test point deep inside the class-0 cluster is always classified right.
  const LabeledDataset train = testing::Line({0.0, 0.1, 0.2, 0.3, 10.0, 10.1}, {0, 0, 0, 0, 1, 1});
  const LabeledDataset test = testing::Line({0.15}, {0});
  const TrialStore store = EnumerateTrials(train, test, 5, kKnn);
  for (size_t i = 0; i < train.size(); ++i) EXPECT_EQ(*EstimateInfluence(store).Lookup(i, 0), 0.0);
}

TEST(Estimator, MislabeledSingletonMemorizationIsOne) {
  const LabeledDataset train =
      testing::Line({0.0, 0.2, 0.4, 0.6, 20.0, 20.2, 20.4, 20.6, 6.0}, {0, 0, 0, 0, 1, 1, 1, 1, 1});
  const TrialStore store = EnumerateTrials(train, train, 6, kKnn);
  EXPECT_EQ(EstimateMemorization(store).rows[8].estimate, 1.0);
}

TEST(Estimator, FallbackWhenIndexInEveryTrial) {
  const LabeledDataset train = testing::Line({0.0, 1.0, 2.0}, {0, 1, 0});
  const TrialStore store = EnumerateTrials(train, train, 3, kKnn);
  for (const auto& row : EstimateMemorization(store).rows) {
    EXPECT_EQ(row.n_out, 0u);
    EXPECT_EQ(row.acc_out, 0.5);
    EXPECT_TRUE(row.fallback_used);
  }
}

TEST(Estimator, SelfInfluenceEqualsMemorization) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  for (size_t i = 0; i < d.train.size(); ++i) {
    const std::vector<uint32_t> probe{static_cast<uint32_t>(i)};
    const LabeledDataset test = d.test.Concat(d.train.Subset(probe));
    const TrialStore store = RunTrials(d.train, test, {12, test.size(), 8, 150, 7, kKnn}, 1);
    EXPECT_EQ(*EstimateInfluence(store).Lookup(i, test.size() - 1), EstimateMemorization(store).rows[i].estimate);
  }
}

TEST(Estimator, TrainInfluenceDiagonalIsMemorization) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  const TrialStore store = RunTrials(d.train, d.test, {12, 8, 8, 150, 7, kKnn}, 1);
  const auto self = EstimateTrainInfluence(store);
  const auto mem = EstimateMemorization(store).estimates();
  for (size_t i = 0; i < 12; ++i) EXPECT_EQ(self[i * 12 + i], mem[i]);
}

TEST(Estimator, PermutingTrialsLeavesEstimatesBitIdentical) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  const TrialStore store = RunTrials(d.train, d.test, {12, 8, 8, 97, 7, kKnn}, 1);
  std::vector<size_t> order(store.t());
  for (size_t r = 0; r < order.size(); ++r) order[r] = (r * 31) % order.size();
  const TrialStore permuted = store.Permuted(order);
  EXPECT_EQ(EstimateMemorization(store).estimates(), EstimateMemorization(permuted).estimates());
  EXPECT_EQ(InfluenceCsv(EstimateInfluence(store)), InfluenceCsv(EstimateInfluence(permuted)));
}

TEST(Estimator, SparseModeKeepsExactlyTheEntriesAtTheFloor) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  const TrialStore store = RunTrials(d.train, d.test, {12, 8, 8, 97, 7, kKnn}, 1);
  const InfluenceTable dense = EstimateInfluence(store);
  const InfluenceTable sparse = EstimateInfluence(store, InfluenceMode::Sparse(0.05));
  for (size_t i = 0; i < 12; ++i) {
    for (size_t j = 0; j < 8; ++j) {
      const double v = dense.DenseAt(i, j);
      const auto s = sparse.Lookup(i, j);
      EXPECT_EQ(s.has_value(), v >= 0.05);
      if (s) EXPECT_EQ(*s, v);
    }
  }
}

TEST(Estimator, EnumerationEqualsSingleSizeOracle) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  const TrialStore store = EnumerateTrials(d.train, d.test, 8, kKnn);
  const auto exact = ExactSingleSizeInfluenceMatrix(d.train, d.test, kKnn, 8);
  const InfluenceTable infl = EstimateInfluence(store);
  for (size_t i = 0; i < 12; ++i) {
    for (size_t j = 0; j < 8; ++j) EXPECT_EQ(infl.DenseAt(i, j), exact[i * 8 + j]);
  }
  const auto self = ExactSingleSizeInfluenceMatrix(d.train, d.train, kKnn, 8);
  const auto mem = EstimateMemorization(store).estimates();
  for (size_t i = 0; i < 12; ++i) EXPECT_EQ(mem[i], self[i * 12 + i]);
}

TEST(Lemma1Bound, ReferenceValues) {
  EXPECT_NEAR(Lemma1Bound(0.3, 2000), 1.0 / 600 + 1.0 / 1400 + std::exp(-37.5) / 2, 1e-15);
  EXPECT_NEAR(Lemma1Bound(0.3, 2000), 2.381e-3, 1e-6);
  EXPECT_NEAR(Lemma1Bound(0.5, 4), 1.4412484512922976, 1e-12);
  EXPECT_NEAR(Lemma1Bound(1.0 / 3.0, 256), 0.01999209999691572, 1e-12);
}

TEST(Lemma1Bound, DecreasesInT) {
  for (double p : {0.05, 1.0 / 3.0, 0.5}) {
    for (uint64_t t : {1u, 4u, 64u, 1000u, 100000u}) EXPECT_LT(Lemma1Bound(p, 2 * t), Lemma1Bound(p, t));
  }
}

TEST(Lemma1Bound, RejectsBadArguments) {
  EXPECT_THROW(Lemma1Bound(0.0, 10), std::invalid_argument);
  EXPECT_THROW(Lemma1Bound(1.0, 10), std::invalid_argument);
  EXPECT_THROW(Lemma1Bound(0.3, 0), std::invalid_argument);
  EXPECT_DOUBLE_EQ(SubsetBalance(12, 8), 1.0 / 3.0);
}

TEST(EmpiricalMse, ExactSampleHasZeroErrorAndShapesMustMatch) {
  const std::vector<double> exact{0.1, -0.2, 0.5};
  EXPECT_EQ(EmpiricalMse({exact, exact}, exact), (std::vector<double>{0, 0, 0}));
  EXPECT_THROW(EmpiricalMse({{0.1}}, exact), std::invalid_argument);
}

TEST(EmpiricalMse, ShrinksWithMoreTrials) {
  const SyntheticData d = GenerateLongtail(testing::MicroSpec());
  const auto exact = ExactSingleSizeInfluenceMatrix(d.train, d.test, kKnn, 8);
  const auto mse_at = [&](uint64_t t) {
    std::vector<std::vector<double>> reps;
    for (uint64_t r = 0; r < 60; ++r) {
      const InfluenceTable table = EstimateInfluence(RunTrials(d.train, d.test, {12, 8, 8, t, 500 + r, kKnn}, 1));
      std::vector<double> v;
      for (size_t i = 0; i < 12; ++i) {
        for (size_t j = 0; j < 8; ++j) v.push_back(table.DenseAt(i, j));
      }
      reps.push_back(v);
    }
    double total = 0.0;
    for (double x : EmpiricalMse(reps, exact)) total += x;
    return total / exact.size();
  };
  EXPECT_LT(mse_at(1024), mse_at(64));
}

TEST(Output, MemCsvHeaderAndRow) {
  const LabeledDataset train = testing::Line({0.0, 1.0, 2.0}, {0, 1, 0});
  const TrialStore store = EnumerateTrials(train, train, 2, kKnn);
  const std::string csv = MemTableCsv(EstimateMemorization(store));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "i,estimate,n_in,n_out,acc_in,acc_out,stderr,fallback");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

}  // namespace
}  // namespace tailmem
