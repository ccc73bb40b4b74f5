#include "tailmem/pipeline.h"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "tailmem/analysis.h"
#include "tailmem/oracle.h"
#include "tailmem/text_io.h"

namespace tailmem {

namespace {

void EchoConfig(const RunConfig& config) {
  WriteTextFile(RunPaths{config.output_dir}.config(), EffectiveConfigText(config));
}

struct TruthColumns {
  std::vector<int> subpop;
  std::vector<bool> mislabeled;
};

TruthColumns ReadTruth(const std::filesystem::path& path, const LabeledDataset& data) {
  const std::string text = ReadTextFile(path);
  TruthColumns out;
  size_t row = 0;
  for (const auto line : SplitFields(text, '\n')) {
    if (Trim(line).empty()) continue;
    ++row;
    if (row == 1) continue;  // header
    const auto fields = SplitFields(Trim(line), ',');
    long long subpop = 0;
    long long mislabeled = 0;
    const size_t k = out.subpop.size();
    if (fields.size() != 3 || !ParseInt(fields[1], subpop) || !ParseInt(fields[2], mislabeled) || k >= data.size() ||
        fields[0] != data.id(k)) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + ": does not match the dataset");
    }
    out.subpop.push_back(static_cast<int>(subpop));
    out.mislabeled.push_back(mislabeled != 0);
  }
  if (out.subpop.size() != data.size()) throw ParseError(path.string() + ": row count does not match the dataset");
  return out;
}

InfluenceMode ModeOf(const RunConfig& config) {
  return config.sparse_floor ? InfluenceMode::Sparse(*config.sparse_floor) : InfluenceMode::Dense();
}

std::vector<InfluencePair> PairsOf(const RunConfig& config, const RunData& data, const TrialStore& store) {
  const auto mem = EstimateMemorization(store).estimates();
  const auto infl = EstimateInfluence(store, ModeOf(config));
  return SelectPairs(mem, infl, config.theta_mem, config.theta_infl, data.train.labels(), data.test.labels());
}

}  // namespace

void CmdGen(const RunConfig& config) {
  if (config.source != "synthetic") throw std::invalid_argument("gen needs dataset.source=synthetic");
  const RunPaths paths{config.output_dir};
  const SyntheticData data = GenerateLongtail(config.synthetic);
  SaveCsv(data.train, paths.train_csv());
  SaveCsv(data.test, paths.test_csv());
  SaveGroundTruthCsv(data.train, data.truth.train_subpop, data.truth.train_mislabeled, paths.train_truth());
  SaveGroundTruthCsv(data.test, data.truth.test_subpop, std::vector<bool>(data.test.size(), false),
                     paths.test_truth());
  EchoConfig(config);
}

RunData LoadRunData(const RunConfig& config) {
  const RunPaths paths{config.output_dir};
  if (config.source == "csv") {
    LabeledDataset train = LoadCsv(config.train_csv, config.num_classes);
    LabeledDataset test = LoadCsv(config.test_csv, train.num_classes());
    return {std::move(train), std::move(test), std::nullopt, std::nullopt, std::nullopt};
  }
  if (!std::filesystem::exists(paths.train_csv()) || !std::filesystem::exists(paths.test_csv())) CmdGen(config);
  LabeledDataset train = LoadCsv(paths.train_csv(), config.synthetic.num_classes);
  LabeledDataset test = LoadCsv(paths.test_csv(), config.synthetic.num_classes);
  RunData data{std::move(train), std::move(test), std::nullopt, std::nullopt, std::nullopt};
  if (std::filesystem::exists(paths.train_truth()) && std::filesystem::exists(paths.test_truth())) {
    TruthColumns tr = ReadTruth(paths.train_truth(), data.train);
    data.train_subpop = std::move(tr.subpop);
    data.train_mislabeled = std::move(tr.mislabeled);
    data.test_subpop = ReadTruth(paths.test_truth(), data.test).subpop;
  }
  return data;
}

TrialStore LoadRunStore(const RunConfig& config, const RunData& data) {
  const RunPaths paths{config.output_dir};
  if (!std::filesystem::exists(paths.store())) {
    throw std::runtime_error("no trial store at " + paths.store().string() + "; run `trials` first");
  }
  TrialStore store = LoadStore(paths.store());
  if (store.n() != data.train.size() || store.n_test() != data.test.size()) {
    throw std::invalid_argument("store/config mismatch: store has n=" + std::to_string(store.n()) +
                                ", n_test=" + std::to_string(store.n_test()) + " but the datasets have " +
                                std::to_string(data.train.size()) + " and " + std::to_string(data.test.size()));
  }
  if (store.learner_blob() != SerializeLearnerSpec(config.learner)) {
    throw std::invalid_argument("store/config mismatch: the store was trained with a different learner");
  }
  if (store.m() != config.SubsetSize(data.train.size())) {
    throw std::invalid_argument("store/config mismatch: store has m=" + std::to_string(store.m()) +
                                ", config gives m=" + std::to_string(config.SubsetSize(data.train.size())));
  }
  if (store.t() == 0) throw std::invalid_argument("trial store is empty");
  return store;
}

std::string CmdTrials(const RunConfig& config) {
  const RunPaths paths{config.output_dir};
  const RunData data = LoadRunData(config);
  const uint64_t n = data.train.size();
  const uint64_t m = config.SubsetSize(n);
  EchoConfig(config);

  if (config.mode == "enumerate") {
    const uint64_t total = Choose(n, m);
    if (std::filesystem::exists(paths.store())) {
      const TrialStore store = LoadRunStore(config, data);
      if (store.t() == total && store.seed() == 0) return "store complete: " + std::to_string(total) + " subsets";
      throw std::invalid_argument("store/config mismatch: existing store is not an enumeration store");
    }
    SaveStore(EnumerateTrials(data.train, data.test, m, config.learner, config.enumeration_cap, config.parallelism),
              paths.store());
    return "enumerated " + std::to_string(total) + " subsets";
  }

  TrialPlan plan{n, data.test.size(), m, config.t, config.seed, config.learner};
  if (!std::filesystem::exists(paths.store())) {
    SaveStore(RunTrials(data.train, data.test, plan, config.parallelism), paths.store());
    return "ran " + std::to_string(config.t) + " trials";
  }
  const TrialStore existing = LoadRunStore(config, data);
  if (existing.seed() != config.seed) {
    throw std::invalid_argument("store/config mismatch: store seed " + std::to_string(existing.seed()) +
                                ", config seed " + std::to_string(config.seed));
  }
  if (existing.t() >= config.t) return "store complete: " + std::to_string(existing.t()) + " trials";
  const uint64_t missing = config.t - existing.t();
  const TrialStore extra = RunTrialRange(data.train, data.test, plan, existing.t(), missing, config.parallelism);
  SaveStore(Merge(existing, extra), paths.store());
  return "extended store by " + std::to_string(missing) + " trials to " + std::to_string(config.t);
}

void CmdEstimate(const RunConfig& config) {
  const RunPaths paths{config.output_dir};
  const RunData data = LoadRunData(config);
  const TrialStore store = LoadRunStore(config, data);
  const MemEstimateTable mem = EstimateMemorization(store);
  WriteTextFile(paths.estimates_dir() / "mem.csv", MemTableCsv(mem));
  WriteTextFile(paths.estimates_dir() / "mem.json", MemTableJson(mem));
  WriteTextFile(paths.estimates_dir() / "infl.csv", InfluenceCsv(EstimateInfluence(store, ModeOf(config))));
  EchoConfig(config);
}

void CmdSelect(const RunConfig& config) {
  const RunPaths paths{config.output_dir};
  const RunData data = LoadRunData(config);
  const TrialStore store = LoadRunStore(config, data);
  const auto pairs = PairsOf(config, data, store);
  const PairStatistics stats = ComputePairStatistics(pairs, data.test.size());

  nlohmann::json summary = nlohmann::json::parse(PairStatisticsJson(stats));
  summary["theta_mem"] = config.theta_mem;
  summary["theta_infl"] = config.theta_infl;
  if (data.train_subpop && data.test_subpop) {
    uint64_t same = 0;
    for (const auto& p : pairs) same += (*data.train_subpop)[p.train_idx] == (*data.test_subpop)[p.test_idx];
    summary["same_subpop_fraction"] = pairs.empty() ? 0.0 : static_cast<double>(same) / pairs.size();
  }
  std::string picks = "copy,position,train_idx\n";
  try {
    picks = PicksCsv(PickRepresentative(pairs, config.n_copies, config.n_egs));
  } catch (const std::invalid_argument& e) {
    summary["picks_error"] = e.what();
  }
  WriteTextFile(paths.pairs_dir() / "pairs.csv", PairsCsv(pairs));
  WriteTextFile(paths.pairs_dir() / "stats.json", summary.dump(1) + "\n");
  WriteTextFile(paths.pairs_dir() / "picks.csv", picks);
  EchoConfig(config);
}

void CmdOracle(const RunConfig& config) {
  const RunPaths paths{config.output_dir};
  const RunData data = LoadRunData(config);
  const TrialStore store = LoadRunStore(config, data);
  const uint64_t n = data.train.size();
  const uint64_t m = store.m();
  const auto cap = config.enumeration_cap;

  const MemEstimateTable mem = EstimateMemorization(store);
  const InfluenceTable infl = EstimateInfluence(store, InfluenceMode::Dense());
  const auto self_def = ExactSubsampledInfluenceMatrix(data.train, data.train, config.learner, m, cap);
  const auto self_single = ExactSingleSizeInfluenceMatrix(data.train, data.train, config.learner, m, cap);
  const auto test_def = ExactSubsampledInfluenceMatrix(data.train, data.test, config.learner, m, cap);
  const auto test_single = ExactSingleSizeInfluenceMatrix(data.train, data.test, config.learner, m, cap);

  double mem_dev = 0.0, mem_dev_single = 0.0, infl_dev = 0.0, infl_dev_single = 0.0, infl_sq = 0.0;
  std::string mem_csv = "i,estimate,exact,exact_single_size\n";
  for (uint64_t i = 0; i < n; ++i) {
    const double est = mem.rows[i].estimate;
    const double exact = self_def[i * n + i];
    const double single = self_single[i * n + i];
    mem_dev = std::max(mem_dev, std::abs(est - exact));
    mem_dev_single = std::max(mem_dev_single, std::abs(est - single));
    mem_csv += std::to_string(i) + ',' + FormatDouble(est) + ',' + FormatDouble(exact) + ',' + FormatDouble(single) +
               '\n';
  }
  std::string infl_csv = "i,j,estimate,exact,exact_single_size\n";
  const uint64_t n_test = data.test.size();
  for (uint64_t i = 0; i < n; ++i) {
    for (uint64_t j = 0; j < n_test; ++j) {
      const double est = infl.DenseAt(i, j);
      const double exact = test_def[i * n_test + j];
      const double single = test_single[i * n_test + j];
      infl_dev = std::max(infl_dev, std::abs(est - exact));
      infl_dev_single = std::max(infl_dev_single, std::abs(est - single));
      infl_sq += (est - exact) * (est - exact);
      infl_csv += std::to_string(i) + ',' + std::to_string(j) + ',' + FormatDouble(est) + ',' + FormatDouble(exact) +
                  ',' + FormatDouble(single) + '\n';
    }
  }
  nlohmann::json report{{"n", n},
                        {"m", m},
                        {"t", store.t()},
                        {"max_abs_dev_mem", mem_dev},
                        {"max_abs_dev_mem_single_size", mem_dev_single},
                        {"max_abs_dev_infl", infl_dev},
                        {"max_abs_dev_infl_single_size", infl_dev_single},
                        {"mean_sq_err_infl", n * n_test == 0 ? 0.0 : infl_sq / static_cast<double>(n * n_test)}};
  if (m < n) {
    const double p = SubsetBalance(n, m);
    report["p"] = p;
    report["mse_bound"] = Lemma1Bound(p, store.t());
    const LooCostReport cost = ProjectLooCost(n, m, config.oracle_sigma);
    report["cost"] = {{"sigma", cost.sigma},
                      {"loo_trainings", cost.loo_trainings},
                      {"subsampled_trainings", cost.subsampled_trainings}};
  }
  WriteTextFile(paths.reports_dir() / "oracle_mem.csv", mem_csv);
  WriteTextFile(paths.reports_dir() / "oracle_infl.csv", infl_csv);
  WriteTextFile(paths.reports_dir() / "oracle.json", report.dump(1) + "\n");
  EchoConfig(config);
}

void CmdRemoval(const RunConfig& config) {
  const RunPaths paths{config.output_dir};
  const RunData data = LoadRunData(config);
  const TrialStore store = LoadRunStore(config, data);
  const auto mem = EstimateMemorization(store).estimates();
  const RemovalCurve curve = RemovalExperiment(data.train, data.test, config.learner, mem, config.thresholds,
                                               config.repeats, config.experiment_seed, config.parallelism);
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& row : curve.rows) {
    if (row.skipped || row.random_accuracy.size() < 2) continue;
    // Positive mean difference: removing memorized examples costs more accuracy.
    const PairedTestResult t = PairedOneSidedTest(row.random_accuracy, row.memorized_accuracy);
    tests.push_back({{"threshold", row.threshold},
                     {"mean_diff", t.mean_diff},
                     {"t_statistic", t.t_statistic},
                     {"p_value", t.p_value}});
  }
  WriteTextFile(paths.reports_dir() / "removal.csv", RemovalCurveCsv(curve));
  WriteTextFile(paths.reports_dir() / "removal.json", RemovalCurveJson(curve));
  WriteTextFile(paths.reports_dir() / "removal_memorized.dat", RemovalPlotData(curve, "memorized"));
  WriteTextFile(paths.reports_dir() / "removal_random.dat", RemovalPlotData(curve, "random"));
  WriteTextFile(paths.reports_dir() / "removal_test.json", tests.dump(1) + "\n");
  EchoConfig(config);
}

void CmdMarginal(const RunConfig& config) {
  const RunPaths paths{config.output_dir};
  const RunData data = LoadRunData(config);
  const TrialStore store = LoadRunStore(config, data);
  const auto pairs = PairsOf(config, data, store);
  const MarginalUtilityReport report = MarginalUtility(data.train, data.test, config.learner, pairs, config.repeats,
                                                       config.experiment_seed, config.parallelism);
  WriteTextFile(paths.reports_dir() / "marginal.json", MarginalUtilityJson(report));
  EchoConfig(config);
}

void CmdConsistency(const RunConfig& a, const RunConfig& b) {
  const RunData data_a = LoadRunData(a);
  const RunData data_b = LoadRunData(b);
  if (!(data_a.train == data_b.train) || !(data_a.test == data_b.test)) {
    throw std::invalid_argument("consistency needs both runs on identical datasets");
  }
  const TrialStore store_a = LoadRunStore(a, data_a);
  const TrialStore store_b = LoadRunStore(b, data_b);
  const auto mem_a = EstimateMemorization(store_a).estimates();
  const auto mem_b = EstimateMemorization(store_b).estimates();
  const ConsistencyReport mem = MemConsistency(mem_a, mem_b, a.thresholds);
  const std::vector<double> infl_thresholds{a.theta_infl};
  const ConsistencyReport infl =
      InfluenceConsistency(EstimateInfluence(store_a, ModeOf(a)), mem_a, EstimateInfluence(store_b, ModeOf(b)), mem_b,
                           infl_thresholds, a.theta_mem);
  const RunPaths paths{a.output_dir};
  WriteTextFile(paths.reports_dir() / "consistency_mem.csv", ConsistencyCsv(mem));
  WriteTextFile(paths.reports_dir() / "consistency_mem.json", ConsistencyJson(mem));
  WriteTextFile(paths.reports_dir() / "consistency_infl.csv", ConsistencyCsv(infl));
  WriteTextFile(paths.reports_dir() / "consistency_infl.json", ConsistencyJson(infl));
  WriteTextFile(paths.reports_dir() / "consistency_other_config.ini", EffectiveConfigText(b));
  EchoConfig(a);
}

}  // namespace tailmem
