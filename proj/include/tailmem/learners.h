#ifndef TAILMEM_LEARNERS_H_
#define TAILMEM_LEARNERS_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tailmem/bitset.h"
#include "tailmem/dataset.h"
#include "tailmem/dense_net.h"

namespace tailmem {

struct KnnSpec {
  int k = 1;
};

struct LogregSpec {
  int epochs = 20;
  double learning_rate = 0.1;
  int batch_size = 32;
  double l2 = 1e-4;
  double momentum = 0.0;
};

struct MlpSpec {
  int hidden_width = 64;
  int hidden_layers = 1;
  int epochs = 40;
  double learning_rate = 0.1;
  int batch_size = 32;
  double l2 = 0.0;
  double momentum = 0.0;
};

// Predicts a fixed label, or the majority label of the full dataset a view
// refers to (ties to the lowest class) when `label` is empty.
struct ConstantSpec {
  std::optional<int> label;
};

class RepresentationMap;

// Linear softmax head over a representation fitted once on the full training
// set. `representation` is filled by PrepareLearner.
struct FrozenLinearSpec {
  MlpSpec base;
  LogregSpec head;
  uint64_t representation_seed = 0;
  std::shared_ptr<const RepresentationMap> representation;
};

struct LearnerSpec {
  std::variant<KnnSpec, LogregSpec, MlpSpec, ConstantSpec, FrozenLinearSpec> params;

  // True iff training is a pure function of the training subset.
  bool deterministic() const;
  std::string kind() const;
  void Validate() const;
};

// Canonical `key=value` lines; this text is what trial stores embed.
std::string SerializeLearnerSpec(const LearnerSpec& spec);
LearnerSpec ParseLearnerSpec(std::string_view text);
// Keyed form used by config files. Unknown keys are rejected.
LearnerSpec LearnerSpecFromKeyValues(const std::vector<std::pair<std::string, std::string>>& entries);
std::vector<std::string> LearnerSpecKeys();

// A training subset: rows `indices` of `data`, in that order. The order is the
// "training-subset position" used by kNN distance tie-breaking.
struct TrainingView {
  const LabeledDataset& data;
  std::span<const uint32_t> indices;
};

std::vector<uint32_t> AllIndices(size_t n);

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual int Predict(std::span<const double> x) const = 0;

  // Bit i set iff Predict(dataset.features(i)) == dataset.label(i).
  virtual BitVector CorrectBits(const LabeledDataset& dataset) const;
};

// Frozen mapping from raw features to the last hidden layer of an MLP.
class RepresentationMap {
 public:
  RepresentationMap(Standardizer standardizer, DenseNet net, std::vector<double> params);

  int dim() const { return net_.layer_sizes()[net_.layer_sizes().size() - 2]; }
  void Map(std::span<const double> x, std::span<double> out) const;
  std::vector<double> MapRows(std::span<const double> rows) const;

 private:
  Standardizer standardizer_;
  DenseNet net_;
  std::vector<double> params_;
};

// Trains the MLP described by `spec` on all of `full_train` and keeps its last
// hidden layer.
std::shared_ptr<const RepresentationMap> FitRepresentation(const MlpSpec& spec, const LabeledDataset& full_train,
                                                           uint64_t seed);

// Resolves anything that depends on the full training set (the frozen
// representation). Other learners are returned unchanged.
LearnerSpec PrepareLearner(const LearnerSpec& spec, const LabeledDataset& full_train);

std::unique_ptr<Predictor> Train(const LearnerSpec& spec, const TrainingView& view, uint64_t seed);

// Majority label among `neighbor_labels`; vote ties go to the lowest class.
int KnnVote(std::span<const int> neighbor_labels, int num_classes);

}  // namespace tailmem

#endif  // TAILMEM_LEARNERS_H_
