#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "apsim/rng.hpp"

namespace apsim {

/// Fully connected network with ReLU hidden layers and a linear output layer.
/// All parameters live in one flat vector: for each layer, the (out x in)
/// row-major weight block followed by the bias block.
class Mlp {
 public:
  /// Activations kept from a forward pass for the backward pass.
  struct Workspace {
    std::vector<std::vector<double>> values;  // values[0] = input, values[l + 1] = layer l output
  };

  Mlp() = default;

  explicit Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need input and output sizes");
    for (int s : sizes_) {
      if (s < 1) throw std::invalid_argument("Mlp: layer sizes must be positive");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weight_offsets_.push_back(offset);
      offset += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
      bias_offsets_.push_back(offset);
      offset += static_cast<std::size_t>(sizes_[l + 1]);
    }
    params_.assign(offset, 0.0);
  }

  /// Weights and biases uniform on +-1/sqrt(fan_in).
  void randomize(Rng& rng) {
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      const std::size_t end = bias_offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]);
      for (std::size_t i = weight_offsets_[l]; i < end; ++i) params_[i] = rng.uniform(-bound, bound);
    }
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::size_t num_layers() const { return sizes_.empty() ? 0 : sizes_.size() - 1; }
  std::size_t input_size() const { return static_cast<std::size_t>(sizes_.front()); }
  std::size_t output_size() const { return static_cast<std::size_t>(sizes_.back()); }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::size_t weight_offset(std::size_t layer) const { return weight_offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const { return bias_offsets_.at(layer); }

  double& weight(std::size_t layer, std::size_t row, std::size_t col) {
    return params_[weight_offsets_.at(layer) + row * static_cast<std::size_t>(sizes_[layer]) + col];
  }
  double& bias(std::size_t layer, std::size_t row) { return params_[bias_offsets_.at(layer) + row]; }

  void forward(std::span<const double> input, Workspace& ws) const {
    if (input.size() != input_size()) throw std::invalid_argument("Mlp::forward: input size mismatch");
    ws.values.resize(sizes_.size());
    ws.values[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const auto n_in = static_cast<std::size_t>(sizes_[l]);
      const auto n_out = static_cast<std::size_t>(sizes_[l + 1]);
      const double* w = params_.data() + weight_offsets_[l];
      const double* b = params_.data() + bias_offsets_[l];
      const std::vector<double>& x = ws.values[l];
      std::vector<double>& y = ws.values[l + 1];
      y.resize(n_out);
      const bool hidden = l + 1 < num_layers();
      for (std::size_t r = 0; r < n_out; ++r) {
        const double* row = w + r * n_in;
        double z = b[r];
        for (std::size_t c = 0; c < n_in; ++c) z += row[c] * x[c];
        y[r] = hidden ? std::max(z, 0.0) : z;
      }
    }
  }

  std::vector<double> forward(std::span<const double> input) const {
    Workspace ws;
    forward(input, ws);
    return std::move(ws.values.back());
  }

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  /// A hidden unit whose output is zero passes no gradient.
  void backward(const Workspace& ws, std::span<const double> output_grad,
                std::span<double> grad) const {
    if (output_grad.size() != output_size()) throw std::invalid_argument("Mlp::backward: gradient size mismatch");
    if (grad.size() != params_.size()) throw std::invalid_argument("Mlp::backward: parameter size mismatch");
    std::vector<double> delta(output_grad.begin(), output_grad.end());
    std::vector<double> upstream;
    for (std::size_t l = num_layers(); l-- > 0;) {
      const auto n_in = static_cast<std::size_t>(sizes_[l]);
      const auto n_out = static_cast<std::size_t>(sizes_[l + 1]);
      const double* w = params_.data() + weight_offsets_[l];
      double* gw = grad.data() + weight_offsets_[l];
      double* gb = grad.data() + bias_offsets_[l];
      const std::vector<double>& x = ws.values[l];
      upstream.assign(n_in, 0.0);
      for (std::size_t r = 0; r < n_out; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        gb[r] += d;
        const double* row = w + r * n_in;
        double* grow = gw + r * n_in;
        for (std::size_t c = 0; c < n_in; ++c) {
          grow[c] += d * x[c];
          upstream[c] += d * row[c];
        }
      }
      if (l == 0) break;
      for (std::size_t c = 0; c < n_in; ++c) {
        if (!(x[c] > 0.0)) upstream[c] = 0.0;
      }
      delta.swap(upstream);
    }
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    return a.sizes_ == b.sizes_ && a.params_ == b.params_;
  }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> weight_offsets_;
  std::vector<std::size_t> bias_offsets_;
  std::vector<double> params_;
};

/// Adam first-order optimizer state for one flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(n, 0.0), v_(n, 0.0) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("Adam: learning rate must be positive");
  }

  void step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
      throw std::invalid_argument("Adam::step: size mismatch");
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

  long steps() const { return steps_; }
  double learning_rate() const { return lr_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  double lr_ = 5e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

/// target <- (1 - tau) target + tau online.
inline void ema_update(Mlp& target, const Mlp& online, double tau) {
  if (target.layer_sizes() != online.layer_sizes()) throw std::invalid_argument("ema_update: shape mismatch");
  auto t = target.parameters();
  auto o = online.parameters();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - tau) * t[i] + tau * o[i];
}

}  // namespace apsim
