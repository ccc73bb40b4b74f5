#include "tailmem/learners.h"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "tailmem/rng.h"
#include "tailmem/text_io.h"

namespace tailmem {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

SgdOptions ToSgd(const LogregSpec& s) { return {s.epochs, s.learning_rate, s.batch_size, s.l2, s.momentum}; }
SgdOptions ToSgd(const MlpSpec& s) { return {s.epochs, s.learning_rate, s.batch_size, s.l2, s.momentum}; }

void ValidateSgd(const SgdOptions& o, const std::string& what) {
  if (o.epochs < 1) throw std::invalid_argument(what + ": epochs must be >= 1");
  if (!(o.learning_rate > 0.0)) throw std::invalid_argument(what + ": learning_rate must be > 0");
  if (o.batch_size < 1) throw std::invalid_argument(what + ": batch_size must be >= 1");
  if (!(o.l2 >= 0.0)) throw std::invalid_argument(what + ": l2 must be >= 0");
  if (!(o.momentum >= 0.0 && o.momentum < 1.0)) throw std::invalid_argument(what + ": momentum must be in [0, 1)");
}

void ValidateMlp(const MlpSpec& s) {
  if (s.hidden_width < 1) throw std::invalid_argument("mlp: hidden_width must be >= 1");
  if (s.hidden_layers < 1) throw std::invalid_argument("mlp: hidden_layers must be >= 1");
  ValidateSgd(ToSgd(s), "mlp");
}

std::vector<int> MlpLayers(const MlpSpec& s, int inputs, int classes) {
  std::vector<int> sizes{inputs};
  for (int l = 0; l < s.hidden_layers; ++l) sizes.push_back(s.hidden_width);
  sizes.push_back(classes);
  return sizes;
}

std::vector<double> GatherRows(const TrainingView& view) {
  std::vector<double> rows;
  rows.reserve(view.indices.size() * view.data.dim());
  for (const uint32_t i : view.indices) {
    const auto x = view.data.features(i);
    rows.insert(rows.end(), x.begin(), x.end());
  }
  return rows;
}

std::vector<int> GatherLabels(const TrainingView& view) {
  std::vector<int> labels;
  labels.reserve(view.indices.size());
  for (const uint32_t i : view.indices) labels.push_back(view.data.label(i));
  return labels;
}

// --- predictors -----------------------------------------------------------

class ConstantPredictor final : public Predictor {
 public:
  explicit ConstantPredictor(int label) : label_(label) {}
  int Predict(std::span<const double>) const override { return label_; }

 private:
  int label_;
};

class KnnPredictor final : public Predictor {
 public:
  KnnPredictor(std::vector<double> points, std::vector<int> labels, int dim, int k, int num_classes)
      : points_(std::move(points)), labels_(std::move(labels)), dim_(dim), k_(k), num_classes_(num_classes) {}

  int Predict(std::span<const double> x) const override {
    const size_t n = labels_.size();
    if (k_ == 1) {
      double best = std::numeric_limits<double>::infinity();
      size_t best_pos = 0;
      for (size_t p = 0; p < n; ++p) {
        const double d = SquaredDistance(p, x, best);
        if (d < best) {
          best = d;
          best_pos = p;
        }
      }
      return labels_[best_pos];
    }
    std::vector<std::pair<double, size_t>> dist(n);
    for (size_t p = 0; p < n; ++p) {
      dist[p] = {SquaredDistance(p, x, std::numeric_limits<double>::infinity()), p};
    }
    const size_t k = std::min<size_t>(k_, n);
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::vector<int> votes(k);
    for (size_t r = 0; r < k; ++r) votes[r] = labels_[dist[r].second];
    return KnnVote(votes, num_classes_);
  }

 private:
  // Returns early (with a value >= cutoff) once the partial sum reaches cutoff.
  double SquaredDistance(size_t p, std::span<const double> x, double cutoff) const {
    const double* row = points_.data() + p * dim_;
    double sum = 0.0;
    for (int f = 0; f < dim_; ++f) {
      const double diff = row[f] - x[f];
      sum += diff * diff;
      if (sum > cutoff) return sum;
    }
    return sum;
  }

  std::vector<double> points_;
  std::vector<int> labels_;
  int dim_;
  int k_;
  int num_classes_;
};

class NetPredictor final : public Predictor {
 public:
  NetPredictor(Standardizer standardizer, DenseNet net, std::vector<double> params)
      : standardizer_(std::move(standardizer)), net_(std::move(net)), params_(std::move(params)) {}

  int Predict(std::span<const double> x) const override {
    std::vector<double> z(standardizer_.dim());
    standardizer_.Apply(x, z);
    return net_.Predict(params_, z);
  }

 private:
  Standardizer standardizer_;
  DenseNet net_;
  std::vector<double> params_;
};

class FrozenLinearPredictor final : public Predictor {
 public:
  FrozenLinearPredictor(std::shared_ptr<const RepresentationMap> representation, NetPredictor head)
      : representation_(std::move(representation)), head_(std::move(head)) {}

  int Predict(std::span<const double> x) const override {
    std::vector<double> mapped(representation_->dim());
    representation_->Map(x, mapped);
    return head_.Predict(mapped);
  }

 private:
  std::shared_ptr<const RepresentationMap> representation_;
  NetPredictor head_;
};

NetPredictor TrainNet(std::vector<int> layer_sizes, std::span<const double> rows, std::span<const int> labels,
                      const SgdOptions& options, uint64_t seed) {
  const size_t dim = layer_sizes.front();
  Standardizer standardizer(rows, dim);
  const std::vector<double> inputs = standardizer.ApplyRows(rows);
  DenseNet net(std::move(layer_sizes));
  KeyedRng rng(seed);
  std::vector<double> params = net.Train(inputs, labels, options, rng);
  return NetPredictor(std::move(standardizer), std::move(net), std::move(params));
}

int MajorityLabel(const LabeledDataset& data) {
  std::vector<size_t> counts(data.num_classes(), 0);
  for (const int y : data.labels()) ++counts[y];
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

// --- key/value codec --------------------------------------------------------

using Entries = std::vector<std::pair<std::string, std::string>>;

int ToInt(const std::string& key, const std::string& value) {
  long long v = 0;
  if (!ParseInt(value, v) || v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw std::invalid_argument("learner key '" + key + "': expected an integer, got '" + value + "'");
  }
  return static_cast<int>(v);
}

uint64_t ToU64(const std::string& key, const std::string& value) {
  long long v = 0;
  if (!ParseInt(value, v) || v < 0) {
    throw std::invalid_argument("learner key '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  return static_cast<uint64_t>(v);
}

double ToDouble(const std::string& key, const std::string& value) {
  double v = 0;
  if (!ParseDouble(value, v)) {
    throw std::invalid_argument("learner key '" + key + "': expected a number, got '" + value + "'");
  }
  return v;
}

const std::vector<std::string> kMlpKeys = {"hidden_width", "hidden_layers", "epochs", "learning_rate",
                                           "batch_size", "l2", "momentum"};
const std::vector<std::string> kLogregKeys = {"epochs", "learning_rate", "batch_size", "l2", "momentum"};
const std::vector<std::string> kHeadKeys = {"head_epochs", "head_learning_rate", "head_batch_size", "head_l2",
                                            "head_momentum", "representation_seed"};

bool ApplyLogregKey(LogregSpec& s, const std::string& key, const std::string& value) {
  if (key == "epochs") s.epochs = ToInt(key, value);
  else if (key == "learning_rate") s.learning_rate = ToDouble(key, value);
  else if (key == "batch_size") s.batch_size = ToInt(key, value);
  else if (key == "l2") s.l2 = ToDouble(key, value);
  else if (key == "momentum") s.momentum = ToDouble(key, value);
  else return false;
  return true;
}

bool ApplyMlpKey(MlpSpec& s, const std::string& key, const std::string& value) {
  if (key == "hidden_width") s.hidden_width = ToInt(key, value);
  else if (key == "hidden_layers") s.hidden_layers = ToInt(key, value);
  else if (key == "epochs") s.epochs = ToInt(key, value);
  else if (key == "learning_rate") s.learning_rate = ToDouble(key, value);
  else if (key == "batch_size") s.batch_size = ToInt(key, value);
  else if (key == "l2") s.l2 = ToDouble(key, value);
  else if (key == "momentum") s.momentum = ToDouble(key, value);
  else return false;
  return true;
}

void AppendLogreg(Entries& out, const LogregSpec& s, const std::string& prefix) {
  out.emplace_back(prefix + "epochs", std::to_string(s.epochs));
  out.emplace_back(prefix + "learning_rate", FormatDouble(s.learning_rate));
  out.emplace_back(prefix + "batch_size", std::to_string(s.batch_size));
  out.emplace_back(prefix + "l2", FormatDouble(s.l2));
  out.emplace_back(prefix + "momentum", FormatDouble(s.momentum));
}

void AppendMlp(Entries& out, const MlpSpec& s) {
  out.emplace_back("hidden_width", std::to_string(s.hidden_width));
  out.emplace_back("hidden_layers", std::to_string(s.hidden_layers));
  out.emplace_back("epochs", std::to_string(s.epochs));
  out.emplace_back("learning_rate", FormatDouble(s.learning_rate));
  out.emplace_back("batch_size", std::to_string(s.batch_size));
  out.emplace_back("l2", FormatDouble(s.l2));
  out.emplace_back("momentum", FormatDouble(s.momentum));
}

Entries ToEntries(const LearnerSpec& spec) {
  Entries out{{"kind", spec.kind()}};
  std::visit(Overloaded{
                 [&](const KnnSpec& s) {
                   out.emplace_back("k", std::to_string(s.k));
                   out.emplace_back("metric", "euclidean");
                 },
                 [&](const LogregSpec& s) { AppendLogreg(out, s, ""); },
                 [&](const MlpSpec& s) { AppendMlp(out, s); },
                 [&](const ConstantSpec& s) {
                   out.emplace_back("label", s.label ? std::to_string(*s.label) : "majority");
                 },
                 [&](const FrozenLinearSpec& s) {
                   AppendMlp(out, s.base);
                   AppendLogreg(out, s.head, "head_");
                   out.emplace_back("representation_seed", std::to_string(s.representation_seed));
                 },
             },
             spec.params);
  return out;
}

}  // namespace

bool LearnerSpec::deterministic() const {
  return std::holds_alternative<KnnSpec>(params) || std::holds_alternative<ConstantSpec>(params);
}

std::string LearnerSpec::kind() const {
  return std::visit(Overloaded{
                        [](const KnnSpec&) { return std::string("knn"); },
                        [](const LogregSpec&) { return std::string("logreg"); },
                        [](const MlpSpec&) { return std::string("mlp"); },
                        [](const ConstantSpec&) { return std::string("constant"); },
                        [](const FrozenLinearSpec&) { return std::string("frozen_linear"); },
                    },
                    params);
}

void LearnerSpec::Validate() const {
  std::visit(Overloaded{
                 [](const KnnSpec& s) {
                   if (s.k < 1) throw std::invalid_argument("knn: k must be >= 1");
                 },
                 [](const LogregSpec& s) { ValidateSgd(ToSgd(s), "logreg"); },
                 [](const MlpSpec& s) { ValidateMlp(s); },
                 [](const ConstantSpec& s) {
                   if (s.label && *s.label < 0) throw std::invalid_argument("constant: label must be >= 0");
                 },
                 [](const FrozenLinearSpec& s) {
                   ValidateMlp(s.base);
                   ValidateSgd(ToSgd(s.head), "frozen_linear head");
                 },
             },
             params);
}

std::vector<std::string> LearnerSpecKeys() {
  std::set<std::string> keys{"kind", "k", "metric", "label"};
  keys.insert(kMlpKeys.begin(), kMlpKeys.end());
  keys.insert(kHeadKeys.begin(), kHeadKeys.end());
  return {keys.begin(), keys.end()};
}

LearnerSpec LearnerSpecFromKeyValues(const Entries& entries) {
  std::string kind;
  for (const auto& [key, value] : entries) {
    if (key == "kind") kind = value;
  }
  LearnerSpec spec;
  std::vector<std::string> unknown;
  const auto reject = [&](const std::string& key) { unknown.push_back(key); };
  if (kind == "knn") {
    KnnSpec s;
    for (const auto& [key, value] : entries) {
      if (key == "kind") continue;
      if (key == "k") s.k = ToInt(key, value);
      else if (key == "metric") {
        if (value != "euclidean") throw std::invalid_argument("knn: unsupported metric '" + value + "'");
      } else reject(key);
    }
    spec.params = s;
  } else if (kind == "logreg") {
    LogregSpec s;
    for (const auto& [key, value] : entries) {
      if (key != "kind" && !ApplyLogregKey(s, key, value)) reject(key);
    }
    spec.params = s;
  } else if (kind == "mlp") {
    MlpSpec s;
    for (const auto& [key, value] : entries) {
      if (key != "kind" && !ApplyMlpKey(s, key, value)) reject(key);
    }
    spec.params = s;
  } else if (kind == "constant") {
    ConstantSpec s;
    for (const auto& [key, value] : entries) {
      if (key == "kind") continue;
      if (key == "label") {
        if (value == "majority") s.label.reset();
        else s.label = ToInt(key, value);
      } else reject(key);
    }
    spec.params = s;
  } else if (kind == "frozen_linear") {
    FrozenLinearSpec s;
    for (const auto& [key, value] : entries) {
      if (key == "kind" || ApplyMlpKey(s.base, key, value)) continue;
      if (key == "representation_seed") s.representation_seed = ToU64(key, value);
      else if (key.rfind("head_", 0) != 0 || !ApplyLogregKey(s.head, key.substr(5), value)) reject(key);
    }
    spec.params = s;
  } else {
    throw std::invalid_argument("unknown learner kind '" + kind + "'");
  }
  if (!unknown.empty()) {
    std::string msg = "unknown keys for learner '" + kind + "':";
    for (const auto& k : unknown) msg += " " + k;
    throw std::invalid_argument(msg);
  }
  spec.Validate();
  return spec;
}

std::string SerializeLearnerSpec(const LearnerSpec& spec) {
  std::string out;
  for (const auto& [key, value] : ToEntries(spec)) out += key + "=" + value + "\n";
  return out;
}

LearnerSpec ParseLearnerSpec(std::string_view text) {
  Entries entries;
  for (const auto line : SplitFields(text, '\n')) {
    const auto trimmed = Trim(line);
    if (trimmed.empty()) continue;
    const size_t eq = trimmed.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("learner spec line without '='");
    entries.emplace_back(std::string(Trim(trimmed.substr(0, eq))), std::string(Trim(trimmed.substr(eq + 1))));
  }
  return LearnerSpecFromKeyValues(entries);
}

std::vector<uint32_t> AllIndices(size_t n) {
  std::vector<uint32_t> indices(n);
  std::iota(indices.begin(), indices.end(), 0u);
  return indices;
}

BitVector Predictor::CorrectBits(const LabeledDataset& dataset) const {
  BitVector bits(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) {
    if (Predict(dataset.features(i)) == dataset.label(i)) bits.set(i);
  }
  return bits;
}

RepresentationMap::RepresentationMap(Standardizer standardizer, DenseNet net, std::vector<double> params)
    : standardizer_(std::move(standardizer)), net_(std::move(net)), params_(std::move(params)) {}

void RepresentationMap::Map(std::span<const double> x, std::span<double> out) const {
  std::vector<double> z(standardizer_.dim());
  standardizer_.Apply(x, z);
  net_.LastHidden(params_, z, out);
}

std::vector<double> RepresentationMap::MapRows(std::span<const double> rows) const {
  const size_t in = standardizer_.dim();
  const size_t n = rows.size() / in;
  std::vector<double> out(n * dim());
  for (size_t r = 0; r < n; ++r) Map(rows.subspan(r * in, in), std::span<double>(out).subspan(r * dim(), dim()));
  return out;
}

std::shared_ptr<const RepresentationMap> FitRepresentation(const MlpSpec& spec, const LabeledDataset& full_train,
                                                           uint64_t seed) {
  ValidateMlp(spec);
  if (full_train.size() == 0) throw std::invalid_argument("cannot fit a representation on an empty dataset");
  const auto rows = full_train.feature_matrix();
  Standardizer standardizer(rows, full_train.dim());
  const std::vector<double> inputs = standardizer.ApplyRows(rows);
  DenseNet net(MlpLayers(spec, full_train.dim(), full_train.num_classes()));
  KeyedRng rng(DeriveKey(seed, {kLearnerStream}));
  std::vector<double> params = net.Train(inputs, full_train.labels(), ToSgd(spec), rng);
  return std::make_shared<const RepresentationMap>(std::move(standardizer), std::move(net), std::move(params));
}

LearnerSpec PrepareLearner(const LearnerSpec& spec, const LabeledDataset& full_train) {
  spec.Validate();
  if (const auto* frozen = std::get_if<FrozenLinearSpec>(&spec.params); frozen && !frozen->representation) {
    FrozenLinearSpec bound = *frozen;
    bound.representation = FitRepresentation(frozen->base, full_train, frozen->representation_seed);
    return LearnerSpec{bound};
  }
  return spec;
}

std::unique_ptr<Predictor> Train(const LearnerSpec& spec, const TrainingView& view, uint64_t seed) {
  if (view.indices.empty()) throw std::invalid_argument("cannot train on an empty subset");
  const LabeledDataset& data = view.data;
  return std::visit(
      Overloaded{
          [&](const ConstantSpec& s) -> std::unique_ptr<Predictor> {
            return std::make_unique<ConstantPredictor>(s.label ? *s.label : MajorityLabel(data));
          },
          [&](const KnnSpec& s) -> std::unique_ptr<Predictor> {
            return std::make_unique<KnnPredictor>(GatherRows(view), GatherLabels(view), data.dim(), s.k,
                                                  data.num_classes());
          },
          [&](const LogregSpec& s) -> std::unique_ptr<Predictor> {
            return std::make_unique<NetPredictor>(
                TrainNet({data.dim(), data.num_classes()}, GatherRows(view), GatherLabels(view), ToSgd(s), seed));
          },
          [&](const MlpSpec& s) -> std::unique_ptr<Predictor> {
            return std::make_unique<NetPredictor>(TrainNet(MlpLayers(s, data.dim(), data.num_classes()),
                                                           GatherRows(view), GatherLabels(view), ToSgd(s), seed));
          },
          [&](const FrozenLinearSpec& s) -> std::unique_ptr<Predictor> {
            if (!s.representation) {
              throw std::invalid_argument("frozen_linear needs a fitted representation (see PrepareLearner)");
            }
            const std::vector<double> mapped = s.representation->MapRows(GatherRows(view));
            NetPredictor head = TrainNet({s.representation->dim(), data.num_classes()}, mapped, GatherLabels(view),
                                         ToSgd(s.head), seed);
            return std::make_unique<FrozenLinearPredictor>(s.representation, std::move(head));
          },
      },
      spec.params);
}

int KnnVote(std::span<const int> neighbor_labels, int num_classes) {
  std::vector<int> counts(num_classes, 0);
  for (const int y : neighbor_labels) ++counts[y];
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace tailmem
