#include "tailmem/trials.h"

#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "tailmem/parallel.h"

namespace tailmem {

namespace {

constexpr char kMagic[8] = {'M', 'E', 'M', 'T', 'R', 'I', 'A', 'L'};
constexpr uint16_t kFormatVersion = 1;

class StoreFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void PutU64(std::vector<uint8_t>& out, uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<uint8_t>(v >> (8 * b)));
}

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  std::span<const uint8_t> Take(size_t len) {
    if (len > bytes_.size() - pos_) throw StoreFormatError("trial store truncated");
    auto out = bytes_.subspan(pos_, len);
    pos_ += len;
    return out;
  }
  uint64_t U64() {
    const auto b = Take(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t{b[i]} << (8 * i);
    return v;
  }
  uint16_t U16() {
    const auto b = Take(2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
  }
  size_t pos() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

TrialRecord EvaluateSubset(const LearnerSpec& learner, const LabeledDataset& train, const LabeledDataset& test,
                           std::vector<uint32_t> subset, uint64_t learner_seed) {
  TrialRecord record{BitVector(train.size()), {}, {}};
  for (const uint32_t i : subset) record.included.set(i);
  const auto predictor = Train(learner, TrainingView{train, subset}, learner_seed);
  record.train_correct = predictor->CorrectBits(train);
  record.test_correct = predictor->CorrectBits(test);
  return record;
}

}  // namespace

void TrialPlan::Validate() const {
  if (t < 1) throw std::invalid_argument("trial count t must be >= 1");
  if (m < 1) throw std::invalid_argument("subset size m must be >= 1");
  if (m > n) throw std::invalid_argument("subset size m exceeds training set size n");
  learner.Validate();
}

TrialStore::TrialStore(uint64_t n, uint64_t n_test, uint64_t m, uint64_t seed, std::string learner_blob)
    : n_(n), n_test_(n_test), m_(m), seed_(seed), learner_blob_(std::move(learner_blob)) {
  if (m_ > n_) throw std::invalid_argument("subset size m exceeds training set size n");
}

void TrialStore::Append(TrialRecord record) {
  if (record.included.size() != n_ || record.train_correct.size() != n_ || record.test_correct.size() != n_test_) {
    throw std::invalid_argument("trial record has wrong bitset lengths");
  }
  if (record.included.count() != m_) throw std::invalid_argument("trial record inclusion count differs from m");
  records_.push_back(std::move(record));
}

void TrialStore::AddSegment(TrialSegment segment) {
  if (segment.count == 0) return;
  if (!segments_.empty()) {
    TrialSegment& last = segments_.back();
    if (last.seed == segment.seed && last.first + last.count == segment.first) {
      last.count += segment.count;
      return;
    }
  }
  segments_.push_back(segment);
}

TrialStore TrialStore::Permuted(std::span<const size_t> order) const {
  if (order.size() != records_.size()) throw std::invalid_argument("permutation length mismatch");
  TrialStore out(n_, n_test_, m_, seed_, learner_blob_);
  for (const size_t r : order) out.records_.push_back(records_.at(r));
  out.segments_ = segments_;
  return out;
}

bool TrialStore::SameShape(const TrialStore& other) const {
  return n_ == other.n_ && n_test_ == other.n_test_ && m_ == other.m_ && learner_blob_ == other.learner_blob_;
}

std::vector<uint32_t> SampleSubset(uint64_t n, uint64_t m, KeyedRng& rng) {
  if (m > n) throw std::invalid_argument("subset size exceeds population");
  std::vector<char> chosen(n, 0);
  for (uint64_t j = n - m; j < n; ++j) {
    const uint64_t r = rng.Below(j + 1);
    chosen[chosen[r] ? j : r] = 1;
  }
  std::vector<uint32_t> subset;
  subset.reserve(m);
  for (uint64_t i = 0; i < n; ++i) {
    if (chosen[i]) subset.push_back(static_cast<uint32_t>(i));
  }
  return subset;
}

TrialStore RunTrialRange(const LabeledDataset& train, const LabeledDataset& test, const TrialPlan& plan,
                         uint64_t first, uint64_t count, int parallelism) {
  if (plan.m > plan.n) throw std::invalid_argument("subset size m exceeds training set size n");
  plan.Validate();
  if (plan.n != train.size() || plan.n_test != test.size()) {
    throw std::invalid_argument("plan sizes do not match the datasets");
  }
  const LearnerSpec learner = PrepareLearner(plan.learner, train);
  std::vector<TrialRecord> records(count);
  ParallelFor(count, parallelism, "trial", [&](uint64_t r) {
    const uint64_t key = first + r;
    KeyedRng subset_rng(DeriveKey(plan.seed, {kSubsetStream, key}));
    records[r] = EvaluateSubset(learner, train, test, SampleSubset(plan.n, plan.m, subset_rng),
                                DeriveKey(plan.seed, {kLearnerStream, key}));
  });
  TrialStore store(plan.n, plan.n_test, plan.m, plan.seed, SerializeLearnerSpec(plan.learner));
  for (auto& record : records) store.Append(std::move(record));
  store.AddSegment({plan.seed, first, count});
  return store;
}

uint64_t Choose(uint64_t n, uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 result = 1;
  for (uint64_t i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
    if (result > UINT64_MAX) return UINT64_MAX;
  }
  return static_cast<uint64_t>(result);
}

TrialStore EnumerateTrials(const LabeledDataset& train, const LabeledDataset& test, uint64_t m,
                           const LearnerSpec& learner, uint64_t cap, int parallelism) {
  const uint64_t n = train.size();
  if (m < 1 || m > n) throw std::invalid_argument("subset size m must be in [1, n]");
  if (!learner.deterministic()) throw std::invalid_argument("enumeration requires a deterministic learner");
  const uint64_t total = Choose(n, m);
  if (total > cap) {
    throw std::invalid_argument("enumeration needs C(" + std::to_string(n) + "," + std::to_string(m) +
                                ") = " + std::to_string(total) + " subsets, cap is " + std::to_string(cap));
  }
  std::vector<std::vector<uint32_t>> subsets;
  subsets.reserve(total);
  std::vector<uint32_t> combo(m);
  std::iota(combo.begin(), combo.end(), 0u);
  while (true) {
    subsets.push_back(combo);
    // Advance to the next combination in lexicographic order.
    int64_t pos = static_cast<int64_t>(m) - 1;
    while (pos >= 0 && combo[pos] == n - m + pos) --pos;
    if (pos < 0) break;
    ++combo[pos];
    for (uint64_t j = pos + 1; j < m; ++j) combo[j] = combo[j - 1] + 1;
  }
  const LearnerSpec prepared = PrepareLearner(learner, train);
  std::vector<TrialRecord> records(subsets.size());
  ParallelFor(subsets.size(), parallelism, "trial", [&](uint64_t r) {
    records[r] = EvaluateSubset(prepared, train, test, subsets[r], DeriveKey(0, {kLearnerStream, r}));
  });
  TrialStore store(n, test.size(), m, 0, SerializeLearnerSpec(learner));
  for (auto& record : records) store.Append(std::move(record));
  store.AddSegment({0, 0, total});
  return store;
}

TrialStore Merge(const TrialStore& a, const TrialStore& b) {
  if (!a.SameShape(b)) throw std::invalid_argument("cannot merge trial stores of different shape or learner");
  for (const auto& sa : a.segments()) {
    for (const auto& sb : b.segments()) {
      if (sa.seed == sb.seed && sa.first < sb.first + sb.count && sb.first < sa.first + sa.count) {
        throw std::invalid_argument("cannot merge trial stores with overlapping trial keys (seed " +
                                    std::to_string(sa.seed) + ")");
      }
    }
  }
  const uint64_t seed = a.t() > 0 || b.t() == 0 ? a.seed() : b.seed();
  TrialStore out(a.n(), a.n_test(), a.m(), seed, a.learner_blob());
  for (const auto& r : a.records()) out.Append(r);
  for (const auto& r : b.records()) out.Append(r);
  for (const auto& s : a.segments()) out.AddSegment(s);
  for (const auto& s : b.segments()) out.AddSegment(s);
  return out;
}

uint64_t Fnv1a64(std::span<const uint8_t> bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<uint8_t> SerializeStore(const TrialStore& store) {
  std::vector<uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<uint8_t>(kFormatVersion & 0xff));
  out.push_back(static_cast<uint8_t>(kFormatVersion >> 8));
  PutU64(out, store.n());
  PutU64(out, store.n_test());
  PutU64(out, store.m());
  PutU64(out, store.t());
  PutU64(out, store.seed());
  PutU64(out, store.learner_blob().size());
  out.insert(out.end(), store.learner_blob().begin(), store.learner_blob().end());
  for (const auto& r : store.records()) {
    r.included.append_bytes(out);
    r.train_correct.append_bytes(out);
    r.test_correct.append_bytes(out);
  }
  PutU64(out, Fnv1a64(out));
  return out;
}

TrialStore DeserializeStore(std::span<const uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw StoreFormatError("not a trial store (bad magic)");
  }
  if (bytes.size() < 8) throw StoreFormatError("trial store truncated");
  const auto payload = bytes.first(bytes.size() - 8);
  Reader tail(bytes.last(8));
  if (tail.U64() != Fnv1a64(payload)) throw StoreFormatError("trial store checksum mismatch");

  Reader in(payload);
  in.Take(sizeof(kMagic));
  const uint16_t version = in.U16();
  if (version != kFormatVersion) throw StoreFormatError("unsupported trial store version " + std::to_string(version));
  const uint64_t n = in.U64();
  const uint64_t n_test = in.U64();
  const uint64_t m = in.U64();
  const uint64_t t = in.U64();
  const uint64_t seed = in.U64();
  const uint64_t blob_len = in.U64();
  if (blob_len > in.remaining()) throw StoreFormatError("trial store truncated");
  const auto blob = in.Take(blob_len);
  const size_t train_bytes = (n + 7) / 8;
  const size_t test_bytes = (n_test + 7) / 8;
  const size_t record_bytes = 2 * train_bytes + test_bytes;
  if (n == 0 || m > n || t != in.remaining() / record_bytes ||
      in.remaining() != t * record_bytes) {
    throw StoreFormatError("trial store length does not match its header");
  }
  std::string learner_blob(blob.begin(), blob.end());
  try {
    ParseLearnerSpec(learner_blob);
  } catch (const std::invalid_argument& e) {
    throw StoreFormatError(std::string("trial store has an invalid learner spec: ") + e.what());
  }
  TrialStore store(n, n_test, m, seed, std::move(learner_blob));
  try {
    for (uint64_t k = 0; k < t; ++k) {
      TrialRecord r;
      r.included = BitVector::FromBytes(in.Take(train_bytes), n);
      r.train_correct = BitVector::FromBytes(in.Take(train_bytes), n);
      r.test_correct = BitVector::FromBytes(in.Take(test_bytes), n_test);
      store.Append(std::move(r));
    }
  } catch (const std::invalid_argument& e) {
    throw StoreFormatError(std::string("corrupt trial record: ") + e.what());
  }
  store.AddSegment({seed, 0, t});
  return store;
}

void SaveStore(const TrialStore& store, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = SerializeStore(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

TrialStore LoadStore(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return DeserializeStore(bytes);
}

}  // namespace tailmem
