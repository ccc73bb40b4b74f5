#include "tailmem/oracle.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "tailmem/estimator.h"
#include "tailmem/rng.h"

namespace tailmem {

namespace {

void ForEachCombination(const std::vector<uint32_t>& pool, size_t k,
                        const std::function<void(const std::vector<uint32_t>&)>& fn) {
  if (k > pool.size()) return;
  std::vector<size_t> pos(k);
  std::iota(pos.begin(), pos.end(), size_t{0});
  std::vector<uint32_t> combo(k);
  while (true) {
    for (size_t c = 0; c < k; ++c) combo[c] = pool[pos[c]];
    fn(combo);
    ptrdiff_t p = static_cast<ptrdiff_t>(k) - 1;
    while (p >= 0 && pos[p] == pool.size() - k + p) --p;
    if (p < 0) return;
    ++pos[p];
    for (size_t c = p + 1; c < k; ++c) pos[c] = pos[c - 1] + 1;
  }
}

void CheckOracleArgs(const LabeledDataset& train, const LearnerSpec& learner, uint64_t m) {
  if (!learner.deterministic()) throw std::invalid_argument("exact oracle requires a deterministic learner");
  if (m < 2 || m > train.size()) {
    throw std::invalid_argument("exact oracle requires 2 <= m <= n (the definition trains on m-1 examples)");
  }
}

void CheckCap(uint64_t count, uint64_t cap) {
  if (count > cap) {
    throw std::invalid_argument("exact oracle needs " + std::to_string(count) + " subsets, cap is " +
                                std::to_string(cap));
  }
}

// Adds [h_S(target_j) = y_j] into hits[j].
void AccumulateCorrect(const LearnerSpec& learner, const LabeledDataset& train, const std::vector<uint32_t>& subset,
                       const LabeledDataset& targets, std::vector<uint64_t>& hits) {
  const auto predictor = Train(learner, TrainingView{train, subset}, 0);
  for (size_t j = 0; j < targets.size(); ++j) {
    if (predictor->Predict(targets.features(j)) == targets.label(j)) ++hits[j];
  }
}

std::vector<uint32_t> PoolWithout(size_t n, uint64_t i) {
  std::vector<uint32_t> pool;
  for (uint32_t k = 0; k < n; ++k) {
    if (k != i) pool.push_back(k);
  }
  return pool;
}

struct RowCounts {
  std::vector<uint64_t> hits_in;   // over I+{i}, |I| = m-1
  std::vector<uint64_t> hits_out;  // over the exclusion subsets
  uint64_t count_in = 0;
  uint64_t count_out = 0;
};

RowCounts CountRow(const LabeledDataset& train, const LabeledDataset& targets, const LearnerSpec& learner,
                   uint64_t m, uint64_t i, bool single_size) {
  const std::vector<uint32_t> pool = PoolWithout(train.size(), i);
  RowCounts counts{std::vector<uint64_t>(targets.size(), 0), std::vector<uint64_t>(targets.size(), 0), 0, 0};
  ForEachCombination(pool, m - 1, [&](const std::vector<uint32_t>& subset) {
    std::vector<uint32_t> with_i = subset;
    with_i.insert(std::upper_bound(with_i.begin(), with_i.end(), static_cast<uint32_t>(i)), static_cast<uint32_t>(i));
    AccumulateCorrect(learner, train, with_i, targets, counts.hits_in);
    ++counts.count_in;
    if (!single_size) {
      AccumulateCorrect(learner, train, subset, targets, counts.hits_out);
      ++counts.count_out;
    }
  });
  if (single_size) {
    ForEachCombination(pool, m, [&](const std::vector<uint32_t>& subset) {
      AccumulateCorrect(learner, train, subset, targets, counts.hits_out);
      ++counts.count_out;
    });
  }
  return counts;
}

std::vector<double> DefinitionRow(const RowCounts& c) {
  std::vector<double> row(c.hits_in.size());
  for (size_t j = 0; j < row.size(); ++j) {
    const auto diff = static_cast<int64_t>(c.hits_in[j]) - static_cast<int64_t>(c.hits_out[j]);
    row[j] = static_cast<double>(diff) / static_cast<double>(c.count_in);
  }
  return row;
}

// Same arithmetic as the estimator so that equal counts give equal doubles.
std::vector<double> SingleSizeRow(const RowCounts& c) {
  std::vector<double> row(c.hits_in.size());
  for (size_t j = 0; j < row.size(); ++j) {
    row[j] = ConditionalDifference(c.hits_in[j], c.count_in, c.hits_out[j], c.count_out).estimate;
  }
  return row;
}

LabeledDataset SinglePoint(const LabeledDataset& train, std::span<const double> x, int y) {
  if (x.size() != static_cast<size_t>(train.dim())) throw std::invalid_argument("target dimension mismatch");
  return LabeledDataset({"z"}, std::vector<double>(x.begin(), x.end()), {y}, train.dim(), train.num_classes());
}

std::vector<double> Matrix(const LabeledDataset& train, const LabeledDataset& targets, const LearnerSpec& learner,
                           uint64_t m, uint64_t cap, bool single_size) {
  CheckOracleArgs(train, learner, m);
  CheckCap(Choose(train.size() - 1, m - 1), cap);
  if (single_size) CheckCap(Choose(train.size() - 1, m), cap);
  std::vector<double> out;
  out.reserve(train.size() * targets.size());
  for (uint64_t i = 0; i < train.size(); ++i) {
    const RowCounts counts = CountRow(train, targets, learner, m, i, single_size);
    const auto row = single_size ? SingleSizeRow(counts) : DefinitionRow(counts);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

}  // namespace

OracleResult ExactSubsampledInfluence(const LabeledDataset& train, std::span<const double> x, int y,
                                      const LearnerSpec& learner, uint64_t m, uint64_t i, uint64_t cap) {
  CheckOracleArgs(train, learner, m);
  if (i >= train.size()) throw std::out_of_range("train index out of range");
  CheckCap(Choose(train.size() - 1, m - 1), cap);
  const RowCounts counts = CountRow(train, SinglePoint(train, x, y), learner, m, i, false);
  return {DefinitionRow(counts)[0], OracleResult::Method::kExactEnumeration, counts.count_in, 0.0};
}

OracleResult ExactSingleSizeInfluence(const LabeledDataset& train, std::span<const double> x, int y,
                                      const LearnerSpec& learner, uint64_t m, uint64_t i, uint64_t cap) {
  CheckOracleArgs(train, learner, m);
  if (i >= train.size()) throw std::out_of_range("train index out of range");
  CheckCap(Choose(train.size() - 1, m - 1), cap);
  CheckCap(Choose(train.size() - 1, m), cap);
  const RowCounts counts = CountRow(train, SinglePoint(train, x, y), learner, m, i, true);
  return {SingleSizeRow(counts)[0], OracleResult::Method::kExactEnumeration, counts.count_in + counts.count_out, 0.0};
}

OracleResult ExactMemorization(const LabeledDataset& train, const LearnerSpec& learner, uint64_t m, uint64_t i,
                               uint64_t cap) {
  if (i >= train.size()) throw std::out_of_range("train index out of range");
  return ExactSubsampledInfluence(train, train.features(i), train.label(i), learner, m, i, cap);
}

std::vector<double> ExactSubsampledInfluenceMatrix(const LabeledDataset& train, const LabeledDataset& targets,
                                                   const LearnerSpec& learner, uint64_t m, uint64_t cap) {
  return Matrix(train, targets, learner, m, cap, false);
}

std::vector<double> ExactSingleSizeInfluenceMatrix(const LabeledDataset& train, const LabeledDataset& targets,
                                                   const LearnerSpec& learner, uint64_t m, uint64_t cap) {
  return Matrix(train, targets, learner, m, cap, true);
}

OracleResult McLooInfluence(const LabeledDataset& train, std::span<const double> x, int y,
                            const LearnerSpec& learner, uint64_t i, uint64_t repetitions, uint64_t seed) {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (i >= train.size()) throw std::out_of_range("train index out of range");
  if (train.size() < 2) throw std::invalid_argument("leave-one-out needs at least two examples");
  const LearnerSpec prepared = PrepareLearner(learner, train);
  const std::vector<uint32_t> full = AllIndices(train.size());
  const std::vector<uint32_t> without = PoolWithout(train.size(), i);
  uint64_t hits_full = 0;
  uint64_t hits_without = 0;
  for (uint64_t k = 0; k < repetitions; ++k) {
    const auto h_full = Train(prepared, TrainingView{train, full}, DeriveKey(seed, {kRepetitionStream, k, 0}));
    const auto h_without = Train(prepared, TrainingView{train, without}, DeriveKey(seed, {kRepetitionStream, k, 1}));
    hits_full += h_full->Predict(x) == y;
    hits_without += h_without->Predict(x) == y;
  }
  const double r = static_cast<double>(repetitions);
  const double p_full = static_cast<double>(hits_full) / r;
  const double p_without = static_cast<double>(hits_without) / r;
  const double se = std::sqrt(p_full * (1.0 - p_full) / r + p_without * (1.0 - p_without) / r);
  return {p_full - p_without, OracleResult::Method::kMonteCarlo, repetitions, se};
}

LooCostReport ProjectLooCost(uint64_t n, uint64_t m, double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw std::invalid_argument("sigma must lie in (0, 1)");
  if (m < 1 || m >= n) throw std::invalid_argument("need 1 <= m < n");
  LooCostReport report{n, m, sigma, 0, 0};
  const auto runs = static_cast<uint64_t>(std::ceil(1.0 / (sigma * sigma)));
  report.loo_trainings = (n + 1) * runs;
  const double p = SubsetBalance(n, m);
  const double target = sigma * sigma;
  uint64_t lo = 1;
  uint64_t hi = 1;
  while (Lemma1Bound(p, hi) > target) hi *= 2;
  while (lo < hi) {
    const uint64_t mid = lo + (hi - lo) / 2;
    if (Lemma1Bound(p, mid) <= target) hi = mid;
    else lo = mid + 1;
  }
  report.subsampled_trainings = lo;
  return report;
}

}  // namespace tailmem
