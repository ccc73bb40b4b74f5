#ifndef TAILMEM_TRIALS_H_
#define TAILMEM_TRIALS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tailmem/bitset.h"
#include "tailmem/dataset.h"
#include "tailmem/learners.h"
#include "tailmem/rng.h"

namespace tailmem {

struct TrialPlan {
  uint64_t n = 0;
  uint64_t n_test = 0;
  uint64_t m = 0;
  uint64_t t = 0;
  uint64_t seed = 0;
  LearnerSpec learner;

  void Validate() const;
};

// One trained model's footprint: which training examples it saw and which
// train/test examples it classifies correctly.
struct TrialRecord {
  BitVector included;
  BitVector train_correct;
  BitVector test_correct;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

// Contiguous block of trial keys (seed, first..first+count-1).
struct TrialSegment {
  uint64_t seed = 0;
  uint64_t first = 0;
  uint64_t count = 0;
};

class TrialStore {
 public:
  TrialStore(uint64_t n, uint64_t n_test, uint64_t m, uint64_t seed, std::string learner_blob);

  uint64_t n() const { return n_; }
  uint64_t n_test() const { return n_test_; }
  uint64_t m() const { return m_; }
  uint64_t t() const { return records_.size(); }
  uint64_t seed() const { return seed_; }
  const std::string& learner_blob() const { return learner_blob_; }
  const std::vector<TrialRecord>& records() const { return records_; }
  const std::vector<TrialSegment>& segments() const { return segments_; }

  // Validates lengths and popcount(included) == m.
  void Append(TrialRecord record);
  // Records which trial keys the appended records came from.
  void AddSegment(TrialSegment segment);

  // Same records in a different order (estimates must not change).
  TrialStore Permuted(std::span<const size_t> order) const;

  bool SameShape(const TrialStore& other) const;

  // Equality of serialized content; segment provenance is not part of it.
  friend bool operator==(const TrialStore& a, const TrialStore& b) {
    return a.SameShape(b) && a.seed_ == b.seed_ && a.records_ == b.records_;
  }

 private:
  uint64_t n_;
  uint64_t n_test_;
  uint64_t m_;
  uint64_t seed_;
  std::string learner_blob_;
  std::vector<TrialRecord> records_;
  std::vector<TrialSegment> segments_;
};

// Uniform size-m subset of [0, n) (Floyd's algorithm), sorted ascending.
std::vector<uint32_t> SampleSubset(uint64_t n, uint64_t m, KeyedRng& rng);

// Trials with keys first..first+count-1 of `plan`. Each trial's subset and
// learner seed derive from (plan.seed, key) only, so the result does not depend
// on `parallelism` or scheduling.
TrialStore RunTrialRange(const LabeledDataset& train, const LabeledDataset& test, const TrialPlan& plan,
                         uint64_t first, uint64_t count, int parallelism);

inline TrialStore RunTrials(const LabeledDataset& train, const LabeledDataset& test, const TrialPlan& plan,
                            int parallelism) {
  return RunTrialRange(train, test, plan, 0, plan.t, parallelism);
}

inline constexpr uint64_t kDefaultEnumerationCap = 1'000'000;

// Binomial coefficient, saturating at UINT64_MAX.
uint64_t Choose(uint64_t n, uint64_t k);

// Every size-m subset exactly once, in lexicographic order. Deterministic
// learners only.
TrialStore EnumerateTrials(const LabeledDataset& train, const LabeledDataset& test, uint64_t m,
                           const LearnerSpec& learner, uint64_t cap = kDefaultEnumerationCap, int parallelism = 1);

// Concatenation of a's then b's records. Requires identical n, n_test, m and
// learner, and trial-key ranges that do not overlap.
TrialStore Merge(const TrialStore& a, const TrialStore& b);

std::vector<uint8_t> SerializeStore(const TrialStore& store);
TrialStore DeserializeStore(std::span<const uint8_t> bytes);
void SaveStore(const TrialStore& store, const std::filesystem::path& path);
TrialStore LoadStore(const std::filesystem::path& path);

// FNV-1a, the checksum stored at the end of a serialized store.
uint64_t Fnv1a64(std::span<const uint8_t> bytes);

}  // namespace tailmem

#endif  // TAILMEM_TRIALS_H_
