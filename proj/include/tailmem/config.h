#ifndef TAILMEM_CONFIG_H_
#define TAILMEM_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tailmem/dataset.h"
#include "tailmem/learners.h"

namespace tailmem {

inline constexpr const char* kParallelismEnv = "TAILMEM_PARALLELISM";

// Everything a pipeline run depends on. Sections of the INI file map to the
// comment groups below; keys are written `section.key` on the command line.
struct RunConfig {
  // [run]
  std::filesystem::path output_dir = "run";

  // [dataset]
  std::string source = "synthetic";  // synthetic | csv
  SyntheticSpec synthetic;
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
  std::optional<int> num_classes;

  // [learner]
  LearnerSpec learner{KnnSpec{}};

  // [trials]
  std::string mode = "sample";  // sample | enumerate
  double m_fraction = 0.7;
  std::optional<uint64_t> m;  // overrides m_fraction
  uint64_t t = 2000;
  uint64_t seed = 0;
  int parallelism = 1;
  uint64_t enumeration_cap = 1'000'000;

  // [select]
  double theta_mem = 0.25;
  double theta_infl = 0.15;
  std::optional<double> sparse_floor;  // dense influence when absent
  int n_copies = 3;
  int n_egs = 5;

  // [experiment]
  std::vector<double> thresholds{0.25};
  int repeats = 20;
  uint64_t experiment_seed = 0;
  double oracle_sigma = 0.1;

  // Subset size for a training set of n examples.
  uint64_t SubsetSize(uint64_t n) const;
  void Validate() const;
};

// Reads `path` (INI) when given, then TAILMEM_PARALLELISM, then `overrides`
// of the form `section.key=value`, in that order of increasing precedence.
// Unknown keys are rejected with a message listing all of them.
RunConfig LoadConfig(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides);

// INI text that LoadConfig reads back to the same configuration.
std::string EffectiveConfigText(const RunConfig& config);

}  // namespace tailmem

#endif  // TAILMEM_CONFIG_H_
