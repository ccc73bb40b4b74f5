#include "tailmem/analysis.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"
#include "tailmem/parallel.h"
#include "tailmem/rng.h"
#include "tailmem/text_io.h"
#include "tailmem/trials.h"

namespace tailmem {

namespace {

void CheckThreshold(double theta) {
  if (!(theta >= -1.0 && theta <= 1.0)) throw std::invalid_argument("threshold out of range");
}

double TestAccuracy(const Predictor& predictor, const LabeledDataset& test) {
  return static_cast<double>(predictor.CorrectBits(test).count()) / static_cast<double>(test.size());
}

std::vector<uint32_t> Complement(uint64_t n, const std::vector<bool>& removed) {
  std::vector<uint32_t> kept;
  for (uint32_t i = 0; i < n; ++i) {
    if (!removed[i]) kept.push_back(i);
  }
  return kept;
}

// Empty string when `kept` can be trained on; otherwise why not.
std::string KeptSetProblem(const LabeledDataset& train, const std::vector<uint32_t>& kept) {
  if (kept.empty()) return "no training examples left";
  std::vector<bool> full(train.num_classes(), false);
  std::vector<bool> left(train.num_classes(), false);
  for (size_t i = 0; i < train.size(); ++i) full[train.label(i)] = true;
  for (uint32_t i : kept) left[train.label(i)] = true;
  for (int c = 0; c < train.num_classes(); ++c) {
    if (full[c] && !left[c]) return "class " + std::to_string(c) + " has no examples left";
  }
  return "";
}

std::vector<uint32_t> RandomKept(uint64_t n, uint64_t remove, uint64_t key) {
  KeyedRng rng(key);
  std::vector<bool> removed(n, false);
  for (uint32_t i : SampleSubset(n, remove, rng)) removed[i] = true;
  return Complement(n, removed);
}

nlohmann::json StatsJson(std::span<const double> values) {
  return {{"mean", Mean(values)}, {"std", SampleStd(values)}, {"values", std::vector<double>(values.begin(), values.end())}};
}

}  // namespace

double Mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double SampleStd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = Mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::vector<InfluencePair> SelectPairs(std::span<const double> mem, const InfluenceTable& infl, double theta_mem,
                                       double theta_infl, std::span<const int> train_labels,
                                       std::span<const int> test_labels) {
  CheckThreshold(theta_mem);
  CheckThreshold(theta_infl);
  if (mem.size() != infl.n() || train_labels.size() != infl.n() || test_labels.size() != infl.n_test()) {
    throw std::invalid_argument("memorization, influence and label shapes differ");
  }
  if (infl.mode() == InfluenceTable::Mode::kSparse && infl.floor() > theta_infl) {
    throw std::invalid_argument("sparse influence floor is above the influence threshold");
  }
  std::vector<InfluencePair> pairs;
  for (const auto& e : infl.EntriesAtLeast(theta_infl)) {
    if (mem[e.i] >= theta_mem && train_labels[e.i] == test_labels[e.j]) {
      pairs.push_back({e.i, e.j, e.estimate, mem[e.i], true});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const InfluencePair& a, const InfluencePair& b) {
    if (a.infl_estimate != b.infl_estimate) return a.infl_estimate > b.infl_estimate;
    return std::tie(a.train_idx, a.test_idx) < std::tie(b.train_idx, b.test_idx);
  });
  return pairs;
}

PairStatistics ComputePairStatistics(std::span<const InfluencePair> pairs, uint64_t n_test) {
  std::map<uint32_t, uint64_t> per_test;
  for (const auto& p : pairs) ++per_test[p.test_idx];
  PairStatistics stats;
  stats.n_pairs = pairs.size();
  stats.n_unique_test = per_test.size();
  for (const auto& [j, count] : per_test) stats.n_single_influencer += count == 1;
  stats.fraction_of_test_set =
      n_test == 0 ? 0.0 : static_cast<double>(stats.n_unique_test) / static_cast<double>(n_test);
  return stats;
}

std::vector<std::vector<uint32_t>> PickRepresentative(std::span<const InfluencePair> pairs, int n_copies, int n_egs) {
  if (n_copies < 1 || n_egs < 1) throw std::invalid_argument("n_copies and n_egs must be >= 1");
  std::map<uint32_t, double> max_infl;
  for (const auto& p : pairs) {
    auto [it, inserted] = max_infl.emplace(p.train_idx, p.infl_estimate);
    if (!inserted) it->second = std::max(it->second, p.infl_estimate);
  }
  if (max_infl.size() < static_cast<size_t>(n_copies)) {
    throw std::invalid_argument("need at least " + std::to_string(n_copies) + " distinct training examples, have " +
                                std::to_string(max_infl.size()));
  }
  std::vector<std::pair<uint32_t, double>> order(max_infl.begin(), max_infl.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  const double last = static_cast<double>(order.size() - n_copies);
  // Same arithmetic as numpy.linspace(0, last, n_egs).astype(int).
  const double step = n_egs == 1 ? 0.0 : last / static_cast<double>(n_egs - 1);
  std::vector<size_t> base(n_egs);
  for (int k = 0; k < n_egs; ++k) {
    base[k] = static_cast<size_t>(k == n_egs - 1 && n_egs > 1 ? last : static_cast<double>(k) * step);
  }
  std::vector<std::vector<uint32_t>> grid(n_copies);
  for (int c = 0; c < n_copies; ++c) {
    for (size_t b : base) grid[c].push_back(order[b + c].first);
  }
  return grid;
}

RemovalCurve RemovalExperiment(const LabeledDataset& train, const LabeledDataset& test, const LearnerSpec& learner,
                               std::span<const double> mem, std::span<const double> thresholds, int repeats,
                               uint64_t seed, int parallelism) {
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  if (mem.size() != train.size()) throw std::invalid_argument("memorization table does not match the training set");
  for (double theta : thresholds) CheckThreshold(theta);
  const LearnerSpec prepared = PrepareLearner(learner, train);
  const uint64_t n = train.size();
  const auto reps = static_cast<uint64_t>(repeats);

  RemovalCurve curve;
  curve.repeats = reps;
  std::vector<std::vector<uint32_t>> kept_by_row;
  for (double theta : thresholds) {
    RemovalRow row;
    row.threshold = theta;
    std::vector<bool> removed(n);
    for (size_t i = 0; i < n; ++i) {
      removed[i] = mem[i] >= theta;
      row.removed_count += removed[i];
    }
    kept_by_row.push_back(Complement(n, removed));
    row.skip_reason = KeptSetProblem(train, kept_by_row.back());
    row.skipped = !row.skip_reason.empty();
    if (!row.skipped) {
      row.memorized_accuracy.assign(reps, 0.0);
      row.random_accuracy.assign(reps, 0.0);
    }
    curve.rows.push_back(std::move(row));
  }

  // Job layout: baseline repeats, then per row [memorized repeats, random repeats].
  const std::vector<uint32_t> all = AllIndices(n);
  curve.baseline_accuracy.assign(reps, 0.0);
  const uint64_t jobs = reps * (1 + 2 * curve.rows.size());
  ParallelFor(jobs, parallelism, "removal job", [&](uint64_t job) {
    const uint64_t r = job % reps;
    const uint64_t block = job / reps;
    if (block == 0) {
      const auto h = Train(prepared, TrainingView{train, all}, DeriveKey(seed, {kRemovalStream, 0, r}));
      curve.baseline_accuracy[r] = TestAccuracy(*h, test);
      return;
    }
    const uint64_t k = (block - 1) / 2;
    const bool random_arm = (block - 1) % 2 == 1;
    RemovalRow& row = curve.rows[k];
    if (row.skipped) return;
    if (!random_arm) {
      const auto h = Train(prepared, TrainingView{train, kept_by_row[k]}, DeriveKey(seed, {kRemovalStream, 1, k, r}));
      row.memorized_accuracy[r] = TestAccuracy(*h, test);
    } else {
      const auto kept = RandomKept(n, row.removed_count, DeriveKey(seed, {kRemovalStream, 2, k, r}));
      const auto h = Train(prepared, TrainingView{train, kept}, DeriveKey(seed, {kRemovalStream, 3, k, r}));
      row.random_accuracy[r] = TestAccuracy(*h, test);
    }
  });
  curve.baseline_mean = Mean(curve.baseline_accuracy);
  curve.baseline_std = SampleStd(curve.baseline_accuracy);
  for (auto& row : curve.rows) {
    row.memorized_mean = Mean(row.memorized_accuracy);
    row.memorized_std = SampleStd(row.memorized_accuracy);
    row.random_mean = Mean(row.random_accuracy);
    row.random_std = SampleStd(row.random_accuracy);
  }
  return curve;
}

MarginalUtilityReport MarginalUtility(const LabeledDataset& train, const LabeledDataset& test,
                                      const LearnerSpec& learner, std::span<const InfluencePair> pairs, int repeats,
                                      uint64_t seed, int parallelism) {
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  const uint64_t n = train.size();
  std::vector<bool> removed(n, false);
  std::set<uint32_t> affected;
  for (const auto& p : pairs) {
    if (p.train_idx >= n || p.test_idx >= test.size()) throw std::invalid_argument("pair index out of range");
    removed[p.train_idx] = true;
    affected.insert(p.test_idx);
  }
  const std::vector<uint32_t> kept = Complement(n, removed);
  const std::string problem = KeptSetProblem(train, kept);
  if (!problem.empty()) throw std::invalid_argument("cannot remove the influencing examples: " + problem);
  const LearnerSpec prepared = PrepareLearner(learner, train);
  const std::vector<uint32_t> all = AllIndices(n);
  const auto reps = static_cast<uint64_t>(repeats);

  MarginalUtilityReport report;
  report.repeats = reps;
  report.n_removed = n - kept.size();
  report.n_test_affected = affected.size();
  report.n_test = test.size();

  std::vector<double> acc_full(reps), acc_removed(reps), sub_full(reps), sub_removed(reps);
  const auto restricted = [&](const BitVector& correct) {
    if (affected.empty()) return 0.0;
    uint64_t hits = 0;
    for (uint32_t j : affected) hits += correct.test(j);
    return static_cast<double>(hits) / static_cast<double>(affected.size());
  };
  ParallelFor(2 * reps, parallelism, "marginal job", [&](uint64_t job) {
    const uint64_t r = job / 2;
    const bool without = job % 2 == 1;
    const auto h = Train(prepared, TrainingView{train, without ? kept : all},
                         DeriveKey(seed, {kRemovalStream, 4, r, without ? 1u : 0u}));
    const BitVector correct = h->CorrectBits(test);
    const double acc = static_cast<double>(correct.count()) / static_cast<double>(test.size());
    (without ? acc_removed : acc_full)[r] = acc;
    (without ? sub_removed : sub_full)[r] = restricted(correct);
  });

  std::vector<double> overall(reps), sub(reps), contribution(reps);
  const double share = static_cast<double>(affected.size()) / static_cast<double>(test.size());
  for (uint64_t r = 0; r < reps; ++r) {
    overall[r] = acc_full[r] - acc_removed[r];
    sub[r] = sub_full[r] - sub_removed[r];
    contribution[r] = sub[r] * share;
  }
  report.full_mean = Mean(acc_full);
  report.full_std = SampleStd(acc_full);
  report.removed_mean = Mean(acc_removed);
  report.removed_std = SampleStd(acc_removed);
  report.overall_diff_mean = Mean(overall);
  report.overall_diff_std = SampleStd(overall);
  report.restricted_full_mean = Mean(sub_full);
  report.restricted_removed_mean = Mean(sub_removed);
  report.restricted_diff_mean = Mean(sub);
  report.restricted_diff_std = SampleStd(sub);
  report.contribution_mean = Mean(contribution);
  report.contribution_std = SampleStd(contribution);
  return report;
}

namespace {

ConsistencyRow CompareSets(double theta, const std::set<std::pair<uint32_t, uint32_t>>& a,
                           const std::set<std::pair<uint32_t, uint32_t>>& b,
                           const std::function<std::pair<double, bool>(std::pair<uint32_t, uint32_t>, bool)>& value) {
  ConsistencyRow row;
  row.threshold = theta;
  row.size_a = a.size();
  row.size_b = b.size();
  std::set<std::pair<uint32_t, uint32_t>> united = a;
  united.insert(b.begin(), b.end());
  row.union_size = united.size();
  row.intersection = a.size() + b.size() - united.size();
  if (united.empty()) return row;
  row.jaccard = static_cast<double>(row.intersection) / static_cast<double>(row.union_size);
  double total = 0.0;
  for (const auto& key : united) {
    const auto [va, imputed_a] = value(key, true);
    const auto [vb, imputed_b] = value(key, false);
    row.imputed += imputed_a + imputed_b;
    total += std::abs(va - vb);
  }
  row.mean_abs_diff = total / static_cast<double>(united.size());
  return row;
}

}  // namespace

ConsistencyReport MemConsistency(std::span<const double> mem_a, std::span<const double> mem_b,
                                 std::span<const double> thresholds) {
  if (mem_a.size() != mem_b.size()) throw std::invalid_argument("memorization tables differ in shape");
  ConsistencyReport report{"mem", {}};
  for (double theta : thresholds) {
    CheckThreshold(theta);
    std::set<std::pair<uint32_t, uint32_t>> a, b;
    for (uint32_t i = 0; i < mem_a.size(); ++i) {
      if (mem_a[i] >= theta) a.insert({i, 0});
      if (mem_b[i] >= theta) b.insert({i, 0});
    }
    report.rows.push_back(CompareSets(theta, a, b, [&](std::pair<uint32_t, uint32_t> key, bool first) {
      return std::pair<double, bool>((first ? mem_a : mem_b)[key.first], false);
    }));
  }
  return report;
}

ConsistencyReport InfluenceConsistency(const InfluenceTable& infl_a, std::span<const double> mem_a,
                                       const InfluenceTable& infl_b, std::span<const double> mem_b,
                                       std::span<const double> thresholds, std::optional<double> mem_constraint) {
  if (infl_a.n() != infl_b.n() || infl_a.n_test() != infl_b.n_test() || mem_a.size() != infl_a.n() ||
      mem_b.size() != infl_b.n()) {
    throw std::invalid_argument("influence tables differ in shape");
  }
  for (double theta : thresholds) CheckThreshold(theta);
  if (!thresholds.empty()) {
    const double lowest = *std::min_element(thresholds.begin(), thresholds.end());
    for (const InfluenceTable* table : {&infl_a, &infl_b}) {
      if (table->mode() == InfluenceTable::Mode::kSparse && table->floor() > lowest - 0.05) {
        throw std::invalid_argument("sparse influence floor must be <= min(threshold) - 0.05");
      }
    }
  }
  const auto select = [&](const InfluenceTable& table, std::span<const double> mem, double theta) {
    std::set<std::pair<uint32_t, uint32_t>> out;
    for (const auto& e : table.EntriesAtLeast(theta)) {
      if (!mem_constraint || mem[e.i] >= *mem_constraint) out.insert({e.i, e.j});
    }
    return out;
  };
  ConsistencyReport report{"infl", {}};
  for (double theta : thresholds) {
    report.rows.push_back(CompareSets(theta, select(infl_a, mem_a, theta), select(infl_b, mem_b, theta),
                                      [&](std::pair<uint32_t, uint32_t> key, bool first) {
                                        const InfluenceTable& table = first ? infl_a : infl_b;
                                        const auto v = table.Lookup(key.first, key.second);
                                        return v ? std::pair<double, bool>(*v, false)
                                                 : std::pair<double, bool>(table.floor(), true);
                                      }));
  }
  return report;
}

PairedTestResult PairedOneSidedTest(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("paired test needs two equal samples of size >= 2");
  std::vector<double> diff(x.size());
  for (size_t k = 0; k < x.size(); ++k) diff[k] = x[k] - y[k];
  PairedTestResult result;
  result.n = diff.size();
  result.mean_diff = Mean(diff);
  const double se = SampleStd(diff) / std::sqrt(static_cast<double>(diff.size()));
  if (se == 0.0) {
    result.t_statistic = result.mean_diff > 0 ? INFINITY : (result.mean_diff < 0 ? -INFINITY : 0.0);
    result.p_value = result.mean_diff > 0 ? 0.0 : 1.0;
    return result;
  }
  result.t_statistic = result.mean_diff / se;
  const boost::math::students_t dist(static_cast<double>(diff.size() - 1));
  result.p_value = boost::math::cdf(boost::math::complement(dist, result.t_statistic));
  return result;
}

std::string PairsCsv(std::span<const InfluencePair> pairs) {
  std::string out = "train_idx,test_idx,infl_estimate,mem_estimate\n";
  for (const auto& p : pairs) {
    out += std::to_string(p.train_idx) + ',' + std::to_string(p.test_idx) + ',' + FormatDouble(p.infl_estimate) +
           ',' + FormatDouble(p.mem_estimate) + '\n';
  }
  return out;
}

std::string PairStatisticsJson(const PairStatistics& stats) {
  return nlohmann::json{{"n_pairs", stats.n_pairs},
                        {"n_unique_test", stats.n_unique_test},
                        {"n_single_influencer", stats.n_single_influencer},
                        {"fraction_of_test_set", stats.fraction_of_test_set}}
             .dump(1) +
         "\n";
}

std::string PicksCsv(const std::vector<std::vector<uint32_t>>& picks) {
  std::string out = "copy,position,train_idx\n";
  for (size_t c = 0; c < picks.size(); ++c) {
    for (size_t k = 0; k < picks[c].size(); ++k) {
      out += std::to_string(c) + ',' + std::to_string(k) + ',' + std::to_string(picks[c][k]) + '\n';
    }
  }
  return out;
}

std::string RemovalCurveCsv(const RemovalCurve& curve) {
  std::string out = "threshold,removed_count,skipped,memorized_mean,memorized_std,random_mean,random_std,repeats\n";
  for (const auto& row : curve.rows) {
    out += FormatDouble(row.threshold) + ',' + std::to_string(row.removed_count) + ',' + (row.skipped ? "1" : "0");
    if (row.skipped) {
      out += ",,,,," + std::to_string(curve.repeats) + '\n';
      continue;
    }
    out += ',' + FormatDouble(row.memorized_mean) + ',' + FormatDouble(row.memorized_std) + ',' +
           FormatDouble(row.random_mean) + ',' + FormatDouble(row.random_std) + ',' + std::to_string(curve.repeats) +
           '\n';
  }
  return out;
}

std::string RemovalCurveJson(const RemovalCurve& curve) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : curve.rows) {
    nlohmann::json r{{"threshold", row.threshold}, {"removed_count", row.removed_count}, {"skipped", row.skipped}};
    if (row.skipped) {
      r["skip_reason"] = row.skip_reason;
    } else {
      r["memorized"] = StatsJson(row.memorized_accuracy);
      r["random"] = StatsJson(row.random_accuracy);
    }
    rows.push_back(std::move(r));
  }
  return nlohmann::json{{"repeats", curve.repeats}, {"baseline", StatsJson(curve.baseline_accuracy)}, {"rows", rows}}
             .dump(1) +
         "\n";
}

std::string RemovalPlotData(const RemovalCurve& curve, const std::string& arm) {
  if (arm != "memorized" && arm != "random") throw std::invalid_argument("unknown removal arm: " + arm);
  std::string out = "# threshold accuracy_mean accuracy_std (" + arm + " removal)\n";
  for (const auto& row : curve.rows) {
    if (row.skipped) continue;
    const bool mem = arm == "memorized";
    out += FormatDouble(row.threshold) + ' ' + FormatDouble(mem ? row.memorized_mean : row.random_mean) + ' ' +
           FormatDouble(mem ? row.memorized_std : row.random_std) + '\n';
  }
  return out;
}

std::string MarginalUtilityJson(const MarginalUtilityReport& r) {
  return nlohmann::json{{"repeats", r.repeats},
                        {"n_removed", r.n_removed},
                        {"n_test_affected", r.n_test_affected},
                        {"n_test", r.n_test},
                        {"full", {{"mean", r.full_mean}, {"std", r.full_std}}},
                        {"removed", {{"mean", r.removed_mean}, {"std", r.removed_std}}},
                        {"overall_diff", {{"mean", r.overall_diff_mean}, {"std", r.overall_diff_std}}},
                        {"restricted_full_mean", r.restricted_full_mean},
                        {"restricted_removed_mean", r.restricted_removed_mean},
                        {"restricted_diff", {{"mean", r.restricted_diff_mean}, {"std", r.restricted_diff_std}}},
                        {"contribution", {{"mean", r.contribution_mean}, {"std", r.contribution_std}}}}
             .dump(1) +
         "\n";
}

std::string ConsistencyCsv(const ConsistencyReport& report) {
  std::string out = "kind,threshold,size_a,size_b,intersection,union,jaccard,mean_abs_diff,imputed\n";
  for (const auto& row : report.rows) {
    out += report.kind + ',' + FormatDouble(row.threshold) + ',' + std::to_string(row.size_a) + ',' +
           std::to_string(row.size_b) + ',' + std::to_string(row.intersection) + ',' +
           std::to_string(row.union_size) + ',' + FormatDouble(row.jaccard) + ',' + FormatDouble(row.mean_abs_diff) +
           ',' + std::to_string(row.imputed) + '\n';
  }
  return out;
}

std::string ConsistencyJson(const ConsistencyReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"threshold", row.threshold},
                    {"size_a", row.size_a},
                    {"size_b", row.size_b},
                    {"intersection", row.intersection},
                    {"union", row.union_size},
                    {"jaccard", row.jaccard},
                    {"mean_abs_diff", row.mean_abs_diff},
                    {"imputed", row.imputed}});
  }
  return nlohmann::json{{"kind", report.kind}, {"rows", rows}}.dump(1) + "\n";
}

}  // namespace tailmem
