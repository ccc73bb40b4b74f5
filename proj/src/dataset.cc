#include "tailmem/dataset.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string_view>
#include <unordered_set>

#include "tailmem/rng.h"
#include "tailmem/text_io.h"

namespace tailmem {

LabeledDataset::LabeledDataset(std::vector<std::string> ids, std::vector<double> features, std::vector<int> labels,
                               int dim, int num_classes)
    : ids_(std::move(ids)), features_(std::move(features)), labels_(std::move(labels)), dim_(dim),
      num_classes_(num_classes) {
  if (dim_ < 1) throw std::invalid_argument("feature dimension must be >= 1");
  if (num_classes_ < 2) throw std::invalid_argument("class count must be >= 2");
  if (ids_.size() != labels_.size()) throw std::invalid_argument("ids and labels differ in length");
  if (features_.size() != labels_.size() * static_cast<size_t>(dim_)) {
    throw std::invalid_argument("feature matrix does not match n x d");
  }
  for (const int label : labels_) {
    if (label < 0 || label >= num_classes_) throw std::invalid_argument("label out of range");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) throw std::invalid_argument("duplicate id '" + id + "'");
  }
}

LabeledDataset LabeledDataset::Subset(std::span<const uint32_t> indices) const {
  std::vector<std::string> ids;
  std::vector<double> features;
  std::vector<int> labels;
  ids.reserve(indices.size());
  labels.reserve(indices.size());
  features.reserve(indices.size() * static_cast<size_t>(dim_));
  for (const uint32_t i : indices) {
    ids.push_back(ids_.at(i));
    labels.push_back(labels_[i]);
    const auto row = this->features(i);
    features.insert(features.end(), row.begin(), row.end());
  }
  return LabeledDataset(std::move(ids), std::move(features), std::move(labels), dim_, num_classes_);
}

LabeledDataset LabeledDataset::Concat(const LabeledDataset& extra) const {
  if (extra.dim_ != dim_ || extra.num_classes_ != num_classes_) {
    throw std::invalid_argument("cannot concatenate datasets of different shape");
  }
  std::vector<std::string> ids = ids_;
  ids.insert(ids.end(), extra.ids_.begin(), extra.ids_.end());
  std::vector<double> features = features_;
  features.insert(features.end(), extra.features_.begin(), extra.features_.end());
  std::vector<int> labels = labels_;
  labels.insert(labels.end(), extra.labels_.begin(), extra.labels_.end());
  return LabeledDataset(std::move(ids), std::move(features), std::move(labels), dim_, num_classes_);
}

std::vector<double> ZipfFrequencies(size_t count, double exponent) {
  if (count == 0) throw std::invalid_argument("zipf: subpopulation count must be >= 1");
  if (!(exponent > 0.0)) throw std::invalid_argument("zipf: exponent must be > 0");
  std::vector<double> weights(count);
  for (size_t k = 0; k < count; ++k) weights[k] = std::pow(static_cast<double>(k + 1), -exponent);
  // Smallest terms first keeps the rounding error of the total small.
  double total = 0.0;
  for (size_t k = count; k-- > 0;) total += weights[k];
  for (double& w : weights) w /= total;
  return weights;
}

void SyntheticSpec::Validate() const {
  if (n_subpop < 1) throw std::invalid_argument("n_subpop must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (n_subpop < num_classes) throw std::invalid_argument("n_subpop must be >= num_classes");
  if (!(zipf_exponent > 0.0)) throw std::invalid_argument("zipf_exponent must be > 0");
  if (n_train < 1) throw std::invalid_argument("n_train must be >= 1");
  if (n_test < 0) throw std::invalid_argument("n_test must be >= 0");
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  if (!(cluster_sep > 0.0)) throw std::invalid_argument("cluster_sep must be > 0");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw std::invalid_argument("noise_rate must be in [0, 1)");
}

namespace {

constexpr int kMaxCenterRejections = 10000;
constexpr double kHypercubeGrowth = 1.25;

std::vector<double> SampleCenters(const SyntheticSpec& spec, KeyedRng& rng) {
  const size_t d = static_cast<size_t>(spec.dim);
  double side = spec.cluster_sep * std::pow(static_cast<double>(spec.n_subpop), 1.0 / spec.dim);
  const double min_sq = spec.cluster_sep * spec.cluster_sep;
  std::vector<double> centers;
  centers.reserve(d * static_cast<size_t>(spec.n_subpop));
  std::vector<double> candidate(d);
  int rejections = 0;
  while (centers.size() < d * static_cast<size_t>(spec.n_subpop)) {
    for (double& c : candidate) c = rng.Uniform(0.0, side);
    bool separated = true;
    for (size_t offset = 0; offset < centers.size() && separated; offset += d) {
      double sq = 0.0;
      for (size_t f = 0; f < d; ++f) {
        const double diff = centers[offset + f] - candidate[f];
        sq += diff * diff;
      }
      separated = sq >= min_sq;
    }
    if (separated) {
      centers.insert(centers.end(), candidate.begin(), candidate.end());
    } else if (++rejections >= kMaxCenterRejections) {
      side *= kHypercubeGrowth;
      rejections = 0;
    }
  }
  return centers;
}

struct Draw {
  std::vector<double> features;
  std::vector<int> subpop;
};

Draw DrawExamples(int count, const std::vector<double>& cumulative, const std::vector<double>& centers, int dim,
                  KeyedRng& rng) {
  Draw draw;
  draw.features.reserve(static_cast<size_t>(count) * dim);
  draw.subpop.reserve(count);
  for (int e = 0; e < count; ++e) {
    const double u = rng.Uniform();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const int k = std::min(static_cast<int>(it - cumulative.begin()), static_cast<int>(cumulative.size()) - 1);
    draw.subpop.push_back(k);
    for (int f = 0; f < dim; ++f) draw.features.push_back(centers[static_cast<size_t>(k) * dim + f] + rng.Normal());
  }
  return draw;
}

std::vector<std::string> MakeIds(const std::string& prefix, int count) {
  std::vector<std::string> ids;
  ids.reserve(count);
  for (int i = 0; i < count; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

}  // namespace

SyntheticData GenerateLongtail(const SyntheticSpec& spec) {
  spec.Validate();
  KeyedRng center_rng(DeriveKey(spec.seed, {11}));
  KeyedRng train_rng(DeriveKey(spec.seed, {12}));
  KeyedRng test_rng(DeriveKey(spec.seed, {13}));
  KeyedRng noise_rng(DeriveKey(spec.seed, {14}));

  const std::vector<double> centers = SampleCenters(spec, center_rng);
  const std::vector<double> freqs = ZipfFrequencies(spec.n_subpop, spec.zipf_exponent);
  std::vector<double> cumulative(freqs.size());
  std::partial_sum(freqs.begin(), freqs.end(), cumulative.begin());

  Draw train = DrawExamples(spec.n_train, cumulative, centers, spec.dim, train_rng);
  Draw test = DrawExamples(spec.n_test, cumulative, centers, spec.dim, test_rng);

  const auto class_of = [&](int subpop) { return subpop % spec.num_classes; };
  std::vector<int> train_labels(train.subpop.size());
  std::transform(train.subpop.begin(), train.subpop.end(), train_labels.begin(), class_of);
  std::vector<int> test_labels(test.subpop.size());
  std::transform(test.subpop.begin(), test.subpop.end(), test_labels.begin(), class_of);

  // Partial Fisher-Yates picks exactly round(noise_rate * n_train) distinct examples.
  const size_t flips = static_cast<size_t>(std::llround(spec.noise_rate * spec.n_train));
  std::vector<uint32_t> order(spec.n_train);
  std::iota(order.begin(), order.end(), 0u);
  std::vector<bool> mislabeled(spec.n_train, false);
  for (size_t f = 0; f < flips; ++f) {
    const size_t j = f + static_cast<size_t>(noise_rng.Below(order.size() - f));
    std::swap(order[f], order[j]);
    const uint32_t i = order[f];
    const int offset = 1 + static_cast<int>(noise_rng.Below(spec.num_classes - 1));
    train_labels[i] = (train_labels[i] + offset) % spec.num_classes;
    mislabeled[i] = true;
  }

  GroundTruth truth;
  truth.train_count_of_subpop.assign(spec.n_subpop, 0);
  for (const int k : train.subpop) ++truth.train_count_of_subpop[k];
  truth.train_subpop = train.subpop;
  truth.test_subpop = test.subpop;
  truth.train_mislabeled = std::move(mislabeled);

  return SyntheticData{
      LabeledDataset(MakeIds("train-", spec.n_train), std::move(train.features), std::move(train_labels), spec.dim,
                     spec.num_classes),
      LabeledDataset(MakeIds("test-", spec.n_test), std::move(test.features), std::move(test_labels), spec.dim,
                     spec.num_classes),
      std::move(truth)};
}

LabeledDataset LoadCsv(const std::filesystem::path& path, std::optional<int> num_classes) {
  const std::string text = ReadTextFile(path);
  std::vector<std::string> ids;
  std::vector<double> features;
  std::vector<int> labels;
  size_t expected_fields = 0;
  bool first = true;
  size_t line_no = 0;
  size_t pos = 0;
  const auto fail = [&](const std::string& what) {
    throw ParseError(path.string() + ": row " + std::to_string(line_no) + ": " + what);
  };
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line = Trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = SplitFields(line);
    long long label = 0;
    const bool label_numeric = fields.size() >= 2 && ParseInt(fields[1], label);
    if (first) {
      first = false;
      if (fields.size() >= 2 && !label_numeric) {
        expected_fields = fields.size();
        continue;
      }
    }
    if (fields.size() < 3) fail("expected id,label and at least one feature");
    if (expected_fields == 0) expected_fields = fields.size();
    if (fields.size() != expected_fields) {
      fail("expected " + std::to_string(expected_fields) + " fields, got " + std::to_string(fields.size()));
    }
    if (!label_numeric) fail("non-integer label '" + std::string(fields[1]) + "'");
    if (label < 0 || (num_classes && label >= *num_classes)) fail("label " + std::to_string(label) + " out of range");
    for (size_t c = 2; c < fields.size(); ++c) {
      double value = 0.0;
      if (!ParseDouble(fields[c], value)) {
        fail("non-numeric feature '" + std::string(fields[c]) + "' in column " + std::to_string(c));
      }
      features.push_back(value);
    }
    ids.emplace_back(Trim(fields[0]));
    labels.push_back(static_cast<int>(label));
  }
  if (labels.empty()) throw ParseError(path.string() + ": no rows");
  const int dim = static_cast<int>(expected_fields) - 2;
  const int classes = num_classes.value_or(std::max(2, *std::max_element(labels.begin(), labels.end()) + 1));
  try {
    return LabeledDataset(std::move(ids), std::move(features), std::move(labels), dim, classes);
  } catch (const std::invalid_argument& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void SaveCsv(const LabeledDataset& dataset, const std::filesystem::path& path) {
  std::string out = "id,label";
  for (int f = 0; f < dataset.dim(); ++f) out += ",f" + std::to_string(f);
  out += '\n';
  for (size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.id(i).find_first_of(",\n") != std::string::npos) {
      throw std::invalid_argument("id '" + dataset.id(i) + "' cannot be written to CSV");
    }
    out += dataset.id(i);
    out += ',';
    out += std::to_string(dataset.label(i));
    for (const double v : dataset.features(i)) {
      out += ',';
      out += FormatDouble(v);
    }
    out += '\n';
  }
  WriteTextFile(path, out);
}

void SaveGroundTruthCsv(const LabeledDataset& dataset, std::span<const int> subpop,
                        const std::vector<bool>& mislabeled, const std::filesystem::path& path) {
  if (subpop.size() != dataset.size() || (!mislabeled.empty() && mislabeled.size() != dataset.size())) {
    throw std::invalid_argument("ground truth length does not match dataset");
  }
  std::string out = "id,subpop,mislabeled\n";
  for (size_t i = 0; i < dataset.size(); ++i) {
    out += dataset.id(i) + ',' + std::to_string(subpop[i]) + ',' +
           ((!mislabeled.empty() && mislabeled[i]) ? "1" : "0") + '\n';
  }
  WriteTextFile(path, out);
}

}  // namespace tailmem
