#ifndef TAILMEM_DENSE_NET_H_
#define TAILMEM_DENSE_NET_H_

#include <span>
#include <vector>

#include "tailmem/rng.h"

namespace tailmem {

// Per-feature affine standardization fitted on a set of rows. Constant
// features get unit scale.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::span<const double> rows, size_t dim);

  void Apply(std::span<const double> x, std::span<double> out) const;
  std::vector<double> ApplyRows(std::span<const double> rows) const;
  size_t dim() const { return mean_.size(); }

 private:
  std::vector<double> mean_;
  std::vector<double> inv_scale_;
};

struct SgdOptions {
  int epochs = 20;
  double learning_rate = 0.1;
  int batch_size = 32;
  double l2 = 0.0;
  double momentum = 0.0;
};

// Fully connected network: ReLU hidden layers, linear output scored with
// softmax cross-entropy. With no hidden layers it is multinomial logistic
// regression. Parameters live in one flat vector, layer by layer, each layer
// as an out x in row-major weight block followed by its bias.
class DenseNet {
 public:
  // layer_sizes = {inputs, hidden..., classes}; at least two entries.
  explicit DenseNet(std::vector<int> layer_sizes);

  size_t num_params() const { return num_params_; }
  int inputs() const { return sizes_.front(); }
  int outputs() const { return sizes_.back(); }
  int num_hidden_layers() const { return static_cast<int>(sizes_.size()) - 2; }
  const std::vector<int>& layer_sizes() const { return sizes_; }

  // Xavier-normal weights, zero biases.
  std::vector<double> InitParams(KeyedRng& rng) const;

  // Mean cross-entropy over `rows` of the row-major `inputs` matrix plus
  // 0.5 * l2 * sum of squared weights (biases excluded). Overwrites `grad`.
  double LossAndGradient(std::span<const double> params, std::span<const double> inputs, std::span<const int> labels,
                         std::span<const uint32_t> rows, double l2, std::span<double> grad) const;

  // Output scores for one input.
  void Logits(std::span<const double> params, std::span<const double> x, std::span<double> out) const;

  // Activations of the last hidden layer; requires at least one hidden layer.
  void LastHidden(std::span<const double> params, std::span<const double> x, std::span<double> out) const;

  // Argmax of the logits, lowest class on ties.
  int Predict(std::span<const double> params, std::span<const double> x) const;

  // Minibatch SGD with per-epoch reshuffling drawn from `rng`.
  std::vector<double> Train(std::span<const double> inputs, std::span<const int> labels, const SgdOptions& options,
                            KeyedRng& rng) const;

 private:
  // Runs layers [0, layer_count) and leaves activations in `acts`.
  void ForwardLayers(std::span<const double> params, std::span<const double> x, size_t layer_count,
                     std::vector<std::vector<double>>& acts) const;

  std::vector<int> sizes_;
  std::vector<size_t> offsets_;
  size_t num_params_ = 0;
};

}  // namespace tailmem

#endif  // TAILMEM_DENSE_NET_H_
