#ifndef TAILMEM_DATASET_H_
#define TAILMEM_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tailmem {

// Malformed input files. Treated as a validation failure by the CLI.
class ParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Immutable labeled dataset: ids, a row-major n x d feature matrix and labels in
// [0, num_classes).
class LabeledDataset {
 public:
  LabeledDataset(std::vector<std::string> ids, std::vector<double> features, std::vector<int> labels,
                 int dim, int num_classes);

  size_t size() const { return labels_.size(); }
  int dim() const { return dim_; }
  int num_classes() const { return num_classes_; }

  std::span<const double> features(size_t i) const {
    return {features_.data() + i * static_cast<size_t>(dim_), static_cast<size_t>(dim_)};
  }
  std::span<const double> feature_matrix() const { return features_; }
  int label(size_t i) const { return labels_[i]; }
  std::span<const int> labels() const { return labels_; }
  const std::string& id(size_t i) const { return ids_[i]; }
  std::span<const std::string> ids() const { return ids_; }

  // Copy of the examples at `indices`, in the given order.
  LabeledDataset Subset(std::span<const uint32_t> indices) const;

  // Same examples with `extra` appended (dimensions and class counts must agree).
  LabeledDataset Concat(const LabeledDataset& extra) const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  std::vector<std::string> ids_;
  std::vector<double> features_;
  std::vector<int> labels_;
  int dim_;
  int num_classes_;
};

// Normalized Zipf weights: entry k (1-indexed) proportional to k^-s.
std::vector<double> ZipfFrequencies(size_t count, double exponent);

struct SyntheticSpec {
  int n_subpop = 100;
  double zipf_exponent = 1.0;
  int n_train = 1000;
  int n_test = 500;
  int dim = 16;
  int num_classes = 10;
  // Minimum distance between subpopulation centers, in units of the
  // per-coordinate standard deviation (which is 1).
  double cluster_sep = 6.0;
  // Fraction of training labels flipped to a uniformly random wrong class.
  double noise_rate = 0.02;
  uint64_t seed = 17;

  void Validate() const;
};

struct GroundTruth {
  std::vector<int> train_subpop;
  std::vector<bool> train_mislabeled;
  std::vector<int> test_subpop;
  std::vector<int> train_count_of_subpop;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct SyntheticData {
  LabeledDataset train;
  LabeledDataset test;
  GroundTruth truth;
};

// Mixture of isotropic unit-variance Gaussian subpopulations with Zipf
// frequencies. Subpopulation k carries class k mod C. A pure function of spec.
SyntheticData GenerateLongtail(const SyntheticSpec& spec);

// CSV rows are `id,label,f0,...,f{d-1}`; a header row is recognized by a
// non-numeric label field. When `num_classes` is absent it is inferred as
// max(label)+1, at least 2.
LabeledDataset LoadCsv(const std::filesystem::path& path, std::optional<int> num_classes = std::nullopt);
void SaveCsv(const LabeledDataset& dataset, const std::filesystem::path& path);

// Side file `id,subpop,mislabeled`.
void SaveGroundTruthCsv(const LabeledDataset& dataset, std::span<const int> subpop,
                        const std::vector<bool>& mislabeled, const std::filesystem::path& path);

}  // namespace tailmem

#endif  // TAILMEM_DATASET_H_
