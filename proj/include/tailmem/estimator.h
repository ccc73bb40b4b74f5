#ifndef TAILMEM_ESTIMATOR_H_
#define TAILMEM_ESTIMATOR_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tailmem/trials.h"

namespace tailmem {

// Conditional-accuracy difference for one (train index, target) pair.
struct ConditionalEstimate {
  double estimate = 0.0;
  uint64_t n_in = 0;
  uint64_t n_out = 0;
  double acc_in = 0.0;
  double acc_out = 0.0;
  double stderr_proxy = 0.0;
  // A conditioning set was empty and its accuracy was set to 1/2.
  bool fallback_used = false;
};

// hits_in of n_in trials that included i were correct, hits_out of n_out that
// excluded it. An empty side contributes accuracy 1/2 (and variance 1/4 to the
// standard-error proxy).
ConditionalEstimate ConditionalDifference(uint64_t hits_in, uint64_t n_in, uint64_t hits_out, uint64_t n_out);

struct MemEstimateTable {
  uint64_t t = 0;
  std::vector<ConditionalEstimate> rows;

  std::vector<double> estimates() const;
};

class InfluenceTable {
 public:
  enum class Mode { kDense, kSparse };
  struct Entry {
    uint32_t i;
    uint32_t j;
    double estimate;
  };

  static InfluenceTable Dense(uint64_t n, uint64_t n_test, std::vector<double> values, std::vector<uint64_t> n_in,
                              uint64_t t);
  static InfluenceTable Sparse(uint64_t n, uint64_t n_test, double floor, std::vector<Entry> entries,
                               std::vector<uint64_t> n_in, uint64_t t);

  Mode mode() const { return mode_; }
  uint64_t n() const { return n_; }
  uint64_t n_test() const { return n_test_; }
  uint64_t t() const { return t_; }
  double floor() const { return floor_; }
  uint64_t n_in(size_t i) const { return n_in_[i]; }
  uint64_t n_out(size_t i) const { return t_ - n_in_[i]; }

  // Dense: always present. Sparse: present iff the estimate met the floor.
  std::optional<double> Lookup(size_t i, size_t j) const;
  double DenseAt(size_t i, size_t j) const { return dense_[i * n_test_ + j]; }

  // Every stored entry with estimate >= threshold, in (i, j) order.
  std::vector<Entry> EntriesAtLeast(double threshold) const;

 private:
  Mode mode_ = Mode::kDense;
  uint64_t n_ = 0;
  uint64_t n_test_ = 0;
  uint64_t t_ = 0;
  double floor_ = -1.0;
  std::vector<double> dense_;
  std::vector<Entry> sparse_;
  std::vector<uint64_t> n_in_;
};

// Output-size limit for dense influence matrices, in entries.
inline constexpr uint64_t kDenseInfluenceBudget = 100'000'000;

struct InfluenceMode {
  InfluenceTable::Mode mode = InfluenceTable::Mode::kDense;
  double floor = 0.0;  // sparse only

  static InfluenceMode Dense() { return {}; }
  static InfluenceMode Sparse(double floor) { return {InfluenceTable::Mode::kSparse, floor}; }
};

MemEstimateTable EstimateMemorization(const TrialStore& store);
InfluenceTable EstimateInfluence(const TrialStore& store, InfluenceMode mode = InfluenceMode::Dense());

// Influence of each train index on each training example as a target
// (row-major n x n); the diagonal is the memorization estimate.
std::vector<double> EstimateTrainInfluence(const TrialStore& store);

// MSE upper bound for the subsampled influence estimator after t trials, with
// p = min(m/n, 1 - m/n).
double Lemma1Bound(double p, uint64_t t);
double SubsetBalance(uint64_t n, uint64_t m);

// Per-position mean squared deviation of repeated estimates from exact values.
std::vector<double> EmpiricalMse(const std::vector<std::vector<double>>& repetitions, const std::vector<double>& exact);

std::string MemTableCsv(const MemEstimateTable& table);
std::string MemTableJson(const MemEstimateTable& table);
std::string InfluenceCsv(const InfluenceTable& table);

}  // namespace tailmem

#endif  // TAILMEM_ESTIMATOR_H_
