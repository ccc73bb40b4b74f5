#include "tailmem/dense_net.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tailmem {

Standardizer::Standardizer(std::span<const double> rows, size_t dim) : mean_(dim, 0.0), inv_scale_(dim, 1.0) {
  const size_t n = dim == 0 ? 0 : rows.size() / dim;
  if (n == 0) return;
  for (size_t r = 0; r < n; ++r) {
    for (size_t f = 0; f < dim; ++f) mean_[f] += rows[r * dim + f];
  }
  for (double& m : mean_) m /= static_cast<double>(n);
  std::vector<double> var(dim, 0.0);
  for (size_t r = 0; r < n; ++r) {
    for (size_t f = 0; f < dim; ++f) {
      const double diff = rows[r * dim + f] - mean_[f];
      var[f] += diff * diff;
    }
  }
  for (size_t f = 0; f < dim; ++f) {
    const double sd = std::sqrt(var[f] / static_cast<double>(n));
    inv_scale_[f] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
}

void Standardizer::Apply(std::span<const double> x, std::span<double> out) const {
  for (size_t f = 0; f < mean_.size(); ++f) out[f] = (x[f] - mean_[f]) * inv_scale_[f];
}

std::vector<double> Standardizer::ApplyRows(std::span<const double> rows) const {
  std::vector<double> out(rows.size());
  const size_t dim = mean_.size();
  for (size_t r = 0; r * dim < rows.size(); ++r) {
    Apply(rows.subspan(r * dim, dim), std::span<double>(out).subspan(r * dim, dim));
  }
  return out;
}

DenseNet::DenseNet(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("network needs input and output layers");
  for (const int s : sizes_) {
    if (s < 1) throw std::invalid_argument("layer width must be >= 1");
  }
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(num_params_);
    num_params_ += static_cast<size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
}

std::vector<double> DenseNet::InitParams(KeyedRng& rng) const {
  std::vector<double> params(num_params_, 0.0);
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double scale = std::sqrt(2.0 / (sizes_[l] + sizes_[l + 1]));
    const size_t weights = static_cast<size_t>(sizes_[l + 1]) * sizes_[l];
    for (size_t w = 0; w < weights; ++w) params[offsets_[l] + w] = scale * rng.Normal();
  }
  return params;
}

void DenseNet::ForwardLayers(std::span<const double> params, std::span<const double> x, size_t layer_count,
                             std::vector<std::vector<double>>& acts) const {
  acts.resize(layer_count + 1);
  acts[0].assign(x.begin(), x.end());
  const size_t last = sizes_.size() - 2;
  for (size_t l = 0; l < layer_count; ++l) {
    const size_t in = sizes_[l];
    const size_t out = sizes_[l + 1];
    const double* w = params.data() + offsets_[l];
    const double* b = w + out * in;
    const std::vector<double>& prev = acts[l];
    std::vector<double>& next = acts[l + 1];
    next.resize(out);
    for (size_t o = 0; o < out; ++o) {
      double z = b[o];
      const double* row = w + o * in;
      for (size_t i = 0; i < in; ++i) z += row[i] * prev[i];
      next[o] = (l == last) ? z : std::max(z, 0.0);
    }
  }
}

double DenseNet::LossAndGradient(std::span<const double> params, std::span<const double> inputs,
                                 std::span<const int> labels, std::span<const uint32_t> rows, double l2,
                                 std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const size_t layers = sizes_.size() - 1;
  const size_t in_dim = sizes_.front();
  std::vector<std::vector<double>> acts;
  std::vector<double> delta;
  std::vector<double> prev_delta;
  double loss = 0.0;
  for (const uint32_t r : rows) {
    ForwardLayers(params, inputs.subspan(r * in_dim, in_dim), layers, acts);
    std::vector<double>& logits = acts.back();
    const double top = *std::max_element(logits.begin(), logits.end());
    double norm = 0.0;
    delta.resize(logits.size());
    for (size_t c = 0; c < logits.size(); ++c) {
      delta[c] = std::exp(logits[c] - top);
      norm += delta[c];
    }
    const int y = labels[r];
    loss += std::log(norm) - (logits[y] - top);
    for (double& p : delta) p /= norm;
    delta[y] -= 1.0;

    for (size_t l = layers; l-- > 0;) {
      const size_t in = sizes_[l];
      const size_t out = sizes_[l + 1];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + out * in;
      const std::vector<double>& a = acts[l];
      for (size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* grow = gw + o * in;
        for (size_t i = 0; i < in; ++i) grow[i] += d * a[i];
        gb[o] += d;
      }
      if (l == 0) break;
      const double* w = params.data() + offsets_[l];
      prev_delta.assign(in, 0.0);
      for (size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = w + o * in;
        for (size_t i = 0; i < in; ++i) prev_delta[i] += d * row[i];
      }
      // ReLU derivative: hidden activation a == max(z, 0) is positive iff z > 0.
      for (size_t i = 0; i < in; ++i) {
        if (a[i] <= 0.0) prev_delta[i] = 0.0;
      }
      delta.swap(prev_delta);
    }
  }
  const double inv = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());
  loss *= inv;
  for (double& g : grad) g *= inv;
  if (l2 > 0.0) {
    for (size_t l = 0; l < layers; ++l) {
      const size_t weights = static_cast<size_t>(sizes_[l + 1]) * sizes_[l];
      for (size_t w = 0; w < weights; ++w) {
        const double v = params[offsets_[l] + w];
        loss += 0.5 * l2 * v * v;
        grad[offsets_[l] + w] += l2 * v;
      }
    }
  }
  return loss;
}

void DenseNet::Logits(std::span<const double> params, std::span<const double> x, std::span<double> out) const {
  std::vector<std::vector<double>> acts;
  ForwardLayers(params, x, sizes_.size() - 1, acts);
  std::copy(acts.back().begin(), acts.back().end(), out.begin());
}

void DenseNet::LastHidden(std::span<const double> params, std::span<const double> x, std::span<double> out) const {
  if (num_hidden_layers() < 1) throw std::logic_error("network has no hidden layer");
  std::vector<std::vector<double>> acts;
  ForwardLayers(params, x, sizes_.size() - 2, acts);
  std::copy(acts.back().begin(), acts.back().end(), out.begin());
}

int DenseNet::Predict(std::span<const double> params, std::span<const double> x) const {
  std::vector<std::vector<double>> acts;
  ForwardLayers(params, x, sizes_.size() - 1, acts);
  const auto& logits = acts.back();
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::vector<double> DenseNet::Train(std::span<const double> inputs, std::span<const int> labels,
                                    const SgdOptions& options, KeyedRng& rng) const {
  std::vector<double> params = InitParams(rng);
  std::vector<double> grad(num_params_);
  std::vector<double> velocity(options.momentum > 0.0 ? num_params_ : 0, 0.0);
  std::vector<uint32_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0u);
  const size_t batch = std::max<size_t>(1, std::min<size_t>(options.batch_size, order.size()));
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.Shuffle(order);
    for (size_t start = 0; start < order.size(); start += batch) {
      const size_t len = std::min(batch, order.size() - start);
      LossAndGradient(params, inputs, labels, std::span<const uint32_t>(order).subspan(start, len), options.l2, grad);
      if (options.momentum > 0.0) {
        for (size_t p = 0; p < num_params_; ++p) {
          velocity[p] = options.momentum * velocity[p] + grad[p];
          params[p] -= options.learning_rate * velocity[p];
        }
      } else {
        for (size_t p = 0; p < num_params_; ++p) params[p] -= options.learning_rate * grad[p];
      }
    }
  }
  return params;
}

}  // namespace tailmem
