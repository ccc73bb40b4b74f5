#ifndef TAILMEM_ORACLE_H_
#define TAILMEM_ORACLE_H_

#include <cstdint>
#include <vector>

#include "tailmem/dataset.h"
#include "tailmem/learners.h"
#include "tailmem/trials.h"

namespace tailmem {

struct OracleResult {
  enum class Method { kExactEnumeration, kMonteCarlo };

  double value = 0.0;
  Method method = Method::kExactEnumeration;
  // Enumeration: number of subsets averaged. Monte Carlo: repetitions r.
  uint64_t count = 0;
  double stderr_value = 0.0;
};

// Ground-truth values computed by retraining from scratch; they never read a
// trial store, so they can check the estimator independently.
//
// ExactSubsampledInfluence is the subsampled influence as defined: the mean,
// over all size-(m-1) subsets I of [n]\{i}, of
//   [h_{I+i}(x) = y] - [h_I(x) = y].
// ExactSingleSizeInfluence is what the single-size estimator converges to: the
// exclusion term is averaged over size-m subsets of [n]\{i} instead (and is
// 1/2 when m = n, as in the estimator's fallback).
//
// Both need a deterministic learner and m >= 2 (the definition trains on
// size m-1), and refuse when the subset count exceeds `cap`.
OracleResult ExactSubsampledInfluence(const LabeledDataset& train, std::span<const double> x, int y,
                                      const LearnerSpec& learner, uint64_t m, uint64_t i,
                                      uint64_t cap = kDefaultEnumerationCap);
OracleResult ExactSingleSizeInfluence(const LabeledDataset& train, std::span<const double> x, int y,
                                      const LearnerSpec& learner, uint64_t m, uint64_t i,
                                      uint64_t cap = kDefaultEnumerationCap);
OracleResult ExactMemorization(const LabeledDataset& train, const LearnerSpec& learner, uint64_t m, uint64_t i,
                               uint64_t cap = kDefaultEnumerationCap);

// Batched forms: row i holds the value of train index i on every example of
// `targets` (row-major n x targets.size()).
std::vector<double> ExactSubsampledInfluenceMatrix(const LabeledDataset& train, const LabeledDataset& targets,
                                                   const LearnerSpec& learner, uint64_t m,
                                                   uint64_t cap = kDefaultEnumerationCap);
std::vector<double> ExactSingleSizeInfluenceMatrix(const LabeledDataset& train, const LabeledDataset& targets,
                                                   const LearnerSpec& learner, uint64_t m,
                                                   uint64_t cap = kDefaultEnumerationCap);

// Leave-one-out influence averaged over r seeded trainings of S and of S\{i}.
OracleResult McLooInfluence(const LabeledDataset& train, std::span<const double> x, int y,
                            const LearnerSpec& learner, uint64_t i, uint64_t repetitions, uint64_t seed);

// Training budget to reach standard deviation sigma for every example:
// direct leave-one-out needs ceil(1/sigma^2) runs on S and on each S\{i};
// the subsampled estimator needs the smallest t whose MSE bound is <= sigma^2.
struct LooCostReport {
  uint64_t n = 0;
  uint64_t m = 0;
  double sigma = 0.0;
  uint64_t loo_trainings = 0;
  uint64_t subsampled_trainings = 0;
};
LooCostReport ProjectLooCost(uint64_t n, uint64_t m, double sigma);

}  // namespace tailmem

#endif  // TAILMEM_ORACLE_H_
