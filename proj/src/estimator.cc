#include "tailmem/estimator.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "json.hpp"
#include "tailmem/text_io.h"

namespace tailmem {

namespace {

// Trial-major store rearranged so each example owns a bit vector over trials.
struct IndexMajor {
  std::vector<BitVector> included;
  std::vector<BitVector> train_correct;
  std::vector<BitVector> test_correct;
};

void Scatter(const BitVector& row, size_t trial, std::vector<BitVector>& columns) {
  const auto words = row.words();
  for (size_t w = 0; w < words.size(); ++w) {
    uint64_t bits = words[w];
    while (bits != 0) {
      columns[w * 64 + std::countr_zero(bits)].set(trial);
      bits &= bits - 1;
    }
  }
}

IndexMajor Transpose(const TrialStore& store) {
  if (store.t() == 0) throw std::invalid_argument("trial store has no trials");
  const size_t t = store.t();
  IndexMajor out{std::vector<BitVector>(store.n(), BitVector(t)), std::vector<BitVector>(store.n(), BitVector(t)),
                 std::vector<BitVector>(store.n_test(), BitVector(t))};
  for (size_t r = 0; r < t; ++r) {
    const TrialRecord& rec = store.records()[r];
    Scatter(rec.included, r, out.included);
    Scatter(rec.train_correct, r, out.train_correct);
    Scatter(rec.test_correct, r, out.test_correct);
  }
  return out;
}

std::vector<uint64_t> InclusionCounts(const IndexMajor& cols) {
  std::vector<uint64_t> n_in;
  n_in.reserve(cols.included.size());
  for (const auto& c : cols.included) n_in.push_back(c.count());
  return n_in;
}

double Accuracy(uint64_t hits, uint64_t count) {
  return count == 0 ? 0.5 : static_cast<double>(hits) / static_cast<double>(count);
}

double InfluenceValue(const BitVector& included, uint64_t n_in, uint64_t t, const BitVector& correct,
                      uint64_t correct_total) {
  const uint64_t hits_in = included.count_and(correct);
  return Accuracy(hits_in, n_in) - Accuracy(correct_total - hits_in, t - n_in);
}

}  // namespace

ConditionalEstimate ConditionalDifference(uint64_t hits_in, uint64_t n_in, uint64_t hits_out, uint64_t n_out) {
  ConditionalEstimate e;
  e.n_in = n_in;
  e.n_out = n_out;
  e.acc_in = Accuracy(hits_in, n_in);
  e.acc_out = Accuracy(hits_out, n_out);
  e.fallback_used = n_in == 0 || n_out == 0;
  e.estimate = e.acc_in - e.acc_out;
  const auto variance = [](double acc, uint64_t count) {
    return count == 0 ? 0.25 : acc * (1.0 - acc) / static_cast<double>(count);
  };
  e.stderr_proxy = std::sqrt(variance(e.acc_in, n_in) + variance(e.acc_out, n_out));
  return e;
}

std::vector<double> MemEstimateTable::estimates() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.estimate);
  return out;
}

InfluenceTable InfluenceTable::Dense(uint64_t n, uint64_t n_test, std::vector<double> values,
                                     std::vector<uint64_t> n_in, uint64_t t) {
  if (values.size() != n * n_test || n_in.size() != n) throw std::invalid_argument("dense influence shape mismatch");
  InfluenceTable table;
  table.mode_ = Mode::kDense;
  table.n_ = n;
  table.n_test_ = n_test;
  table.t_ = t;
  table.dense_ = std::move(values);
  table.n_in_ = std::move(n_in);
  return table;
}

InfluenceTable InfluenceTable::Sparse(uint64_t n, uint64_t n_test, double floor, std::vector<Entry> entries,
                                      std::vector<uint64_t> n_in, uint64_t t) {
  if (n_in.size() != n) throw std::invalid_argument("sparse influence shape mismatch");
  for (const auto& e : entries) {
    if (e.i >= n || e.j >= n_test || e.estimate < floor) throw std::invalid_argument("invalid sparse influence entry");
  }
  InfluenceTable table;
  table.mode_ = Mode::kSparse;
  table.n_ = n;
  table.n_test_ = n_test;
  table.t_ = t;
  table.floor_ = floor;
  table.sparse_ = std::move(entries);
  std::sort(table.sparse_.begin(), table.sparse_.end(),
            [](const Entry& a, const Entry& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
  table.n_in_ = std::move(n_in);
  return table;
}

std::optional<double> InfluenceTable::Lookup(size_t i, size_t j) const {
  if (i >= n_ || j >= n_test_) throw std::out_of_range("influence index out of range");
  if (mode_ == Mode::kDense) return dense_[i * n_test_ + j];
  const auto it = std::lower_bound(sparse_.begin(), sparse_.end(), std::pair<size_t, size_t>(i, j),
                                   [](const Entry& e, const std::pair<size_t, size_t>& key) {
                                     return std::pair<size_t, size_t>(e.i, e.j) < key;
                                   });
  if (it != sparse_.end() && it->i == i && it->j == j) return it->estimate;
  return std::nullopt;
}

std::vector<InfluenceTable::Entry> InfluenceTable::EntriesAtLeast(double threshold) const {
  std::vector<Entry> out;
  if (mode_ == Mode::kDense) {
    for (uint64_t i = 0; i < n_; ++i) {
      for (uint64_t j = 0; j < n_test_; ++j) {
        const double v = dense_[i * n_test_ + j];
        if (v >= threshold) out.push_back({static_cast<uint32_t>(i), static_cast<uint32_t>(j), v});
      }
    }
  } else {
    for (const auto& e : sparse_) {
      if (e.estimate >= threshold) out.push_back(e);
    }
  }
  return out;
}

MemEstimateTable EstimateMemorization(const TrialStore& store) {
  const IndexMajor cols = Transpose(store);
  MemEstimateTable table;
  table.t = store.t();
  table.rows.reserve(store.n());
  for (size_t i = 0; i < store.n(); ++i) {
    const uint64_t n_in = cols.included[i].count();
    const uint64_t hits = cols.train_correct[i].count();
    const uint64_t hits_in = cols.included[i].count_and(cols.train_correct[i]);
    table.rows.push_back(ConditionalDifference(hits_in, n_in, hits - hits_in, store.t() - n_in));
  }
  return table;
}

InfluenceTable EstimateInfluence(const TrialStore& store, InfluenceMode mode) {
  const IndexMajor cols = Transpose(store);
  const uint64_t n = store.n();
  const uint64_t n_test = store.n_test();
  const uint64_t t = store.t();
  std::vector<uint64_t> n_in = InclusionCounts(cols);
  std::vector<uint64_t> correct_total;
  correct_total.reserve(n_test);
  for (const auto& c : cols.test_correct) correct_total.push_back(c.count());

  if (mode.mode == InfluenceTable::Mode::kDense) {
    if (n * n_test > kDenseInfluenceBudget) {
      throw std::invalid_argument("dense influence matrix of " + std::to_string(n * n_test) +
                                  " entries exceeds the budget; use sparse mode");
    }
    std::vector<double> values(n * n_test);
    for (uint64_t i = 0; i < n; ++i) {
      for (uint64_t j = 0; j < n_test; ++j) {
        values[i * n_test + j] = InfluenceValue(cols.included[i], n_in[i], t, cols.test_correct[j], correct_total[j]);
      }
    }
    return InfluenceTable::Dense(n, n_test, std::move(values), std::move(n_in), t);
  }
  std::vector<InfluenceTable::Entry> entries;
  for (uint64_t i = 0; i < n; ++i) {
    for (uint64_t j = 0; j < n_test; ++j) {
      const double v = InfluenceValue(cols.included[i], n_in[i], t, cols.test_correct[j], correct_total[j]);
      if (v >= mode.floor) entries.push_back({static_cast<uint32_t>(i), static_cast<uint32_t>(j), v});
    }
  }
  return InfluenceTable::Sparse(n, n_test, mode.floor, std::move(entries), std::move(n_in), t);
}

std::vector<double> EstimateTrainInfluence(const TrialStore& store) {
  const IndexMajor cols = Transpose(store);
  const uint64_t n = store.n();
  const std::vector<uint64_t> n_in = InclusionCounts(cols);
  std::vector<double> values(n * n);
  for (uint64_t j = 0; j < n; ++j) {
    const uint64_t total = cols.train_correct[j].count();
    for (uint64_t i = 0; i < n; ++i) {
      values[i * n + j] = InfluenceValue(cols.included[i], n_in[i], store.t(), cols.train_correct[j], total);
    }
  }
  return values;
}

double Lemma1Bound(double p, uint64_t t) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0, 1)");
  if (t < 1) throw std::invalid_argument("t must be >= 1");
  const double td = static_cast<double>(t);
  return 1.0 / (p * td) + 1.0 / ((1.0 - p) * td) + std::exp(-p * td / 16.0) / 2.0;
}

double SubsetBalance(uint64_t n, uint64_t m) {
  const double ratio = static_cast<double>(m) / static_cast<double>(n);
  return std::min(ratio, 1.0 - ratio);
}

std::vector<double> EmpiricalMse(const std::vector<std::vector<double>>& repetitions,
                                 const std::vector<double>& exact) {
  if (repetitions.empty()) throw std::invalid_argument("no repetitions");
  std::vector<double> mse(exact.size(), 0.0);
  for (const auto& rep : repetitions) {
    if (rep.size() != exact.size()) throw std::invalid_argument("estimate and exact value shapes differ");
    for (size_t k = 0; k < exact.size(); ++k) {
      const double diff = rep[k] - exact[k];
      mse[k] += diff * diff;
    }
  }
  for (double& v : mse) v /= static_cast<double>(repetitions.size());
  return mse;
}

std::string MemTableCsv(const MemEstimateTable& table) {
  std::string out = "i,estimate,n_in,n_out,acc_in,acc_out,stderr,fallback\n";
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    out += std::to_string(i) + ',' + FormatDouble(r.estimate) + ',' + std::to_string(r.n_in) + ',' +
           std::to_string(r.n_out) + ',' + FormatDouble(r.acc_in) + ',' + FormatDouble(r.acc_out) + ',' +
           FormatDouble(r.stderr_proxy) + ',' + (r.fallback_used ? "1" : "0") + '\n';
  }
  return out;
}

std::string MemTableJson(const MemEstimateTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    rows.push_back({{"i", i},
                    {"estimate", r.estimate},
                    {"n_in", r.n_in},
                    {"n_out", r.n_out},
                    {"acc_in", r.acc_in},
                    {"acc_out", r.acc_out},
                    {"stderr", r.stderr_proxy},
                    {"fallback", r.fallback_used}});
  }
  return nlohmann::json{{"t", table.t}, {"rows", rows}}.dump(1) + "\n";
}

std::string InfluenceCsv(const InfluenceTable& table) {
  std::string out = "i,j,estimate\n";
  const double threshold = table.mode() == InfluenceTable::Mode::kDense ? -2.0 : table.floor();
  for (const auto& e : table.EntriesAtLeast(threshold)) {
    out += std::to_string(e.i) + ',' + std::to_string(e.j) + ',' + FormatDouble(e.estimate) + '\n';
  }
  return out;
}

}  // namespace tailmem
