#ifndef TAILMEM_PIPELINE_H_
#define TAILMEM_PIPELINE_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tailmem/config.h"
#include "tailmem/dataset.h"
#include "tailmem/estimator.h"
#include "tailmem/trials.h"

namespace tailmem {

// Output directory layout of one run.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path dataset_dir() const { return root / "dataset"; }
  std::filesystem::path train_csv() const { return dataset_dir() / "train.csv"; }
  std::filesystem::path test_csv() const { return dataset_dir() / "test.csv"; }
  std::filesystem::path train_truth() const { return dataset_dir() / "train_truth.csv"; }
  std::filesystem::path test_truth() const { return dataset_dir() / "test_truth.csv"; }
  std::filesystem::path store() const { return root / "trials" / "store.bin"; }
  std::filesystem::path estimates_dir() const { return root / "estimates"; }
  std::filesystem::path pairs_dir() const { return root / "pairs"; }
  std::filesystem::path reports_dir() const { return root / "reports"; }
  std::filesystem::path config() const { return root / "config.ini"; }
};

struct RunData {
  LabeledDataset train;
  LabeledDataset test;
  // Subpopulation per example, when the dataset came with ground truth.
  std::optional<std::vector<int>> train_subpop;
  std::optional<std::vector<int>> test_subpop;
  std::optional<std::vector<bool>> train_mislabeled;
};

// Synthetic sources are generated into dataset/ on first use; CSV sources are
// read from the configured paths.
RunData LoadRunData(const RunConfig& config);

// Store on disk, checked against the configuration and datasets.
TrialStore LoadRunStore(const RunConfig& config, const RunData& data);

void CmdGen(const RunConfig& config);
// Returns a one-line status ("ran N trials", "store complete", ...).
std::string CmdTrials(const RunConfig& config);
void CmdEstimate(const RunConfig& config);
void CmdSelect(const RunConfig& config);
void CmdOracle(const RunConfig& config);
void CmdRemoval(const RunConfig& config);
void CmdMarginal(const RunConfig& config);
// Reports go under a's reports/.
void CmdConsistency(const RunConfig& a, const RunConfig& b);

}  // namespace tailmem

#endif  // TAILMEM_PIPELINE_H_
