#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

#include "apsim/rng.hpp"

namespace apsim {

/// Probability vector over a finite action set of size N.
template <std::size_t N>
struct Distribution {
  std::array<double, N> p{};

  static constexpr std::size_t size() { return N; }

  double operator[](std::size_t i) const { return p[i]; }
  double& operator[](std::size_t i) { return p[i]; }

  static Distribution uniform() {
    Distribution d;
    d.p.fill(1.0 / static_cast<double>(N));
    return d;
  }

  static Distribution one_hot(std::size_t i) {
    if (i >= N) throw std::out_of_range("one_hot: index out of range");
    Distribution d;
    d.p[i] = 1.0;
    return d;
  }

  bool is_valid(double tol = 1e-9) const {
    double sum = 0.0;
    for (double x : p) {
      if (!(x >= 0.0) || !std::isfinite(x)) return false;
      sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
  }

  bool full_support() const {
    return std::all_of(p.begin(), p.end(), [](double x) { return x > 0.0; });
  }

  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  friend bool operator==(const Distribution&, const Distribution&) = default;
};

template <std::size_t N>
Distribution<N> normalized(const std::array<double, N>& weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("normalized: bad weight");
    sum += w;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("normalized: weights sum to zero");
  Distribution<N> d;
  for (std::size_t i = 0; i < N; ++i) d.p[i] = weights[i] / sum;
  return d;
}

/// exp(logits) / Z with the max logit subtracted first.
template <std::size_t N>
Distribution<N> softmax(const std::array<double, N>& logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::array<double, N> w{};
  for (std::size_t i = 0; i < N; ++i) w[i] = std::exp(logits[i] - top);
  return normalized(w);
}

/// KL(p || q) in nats, 0 log 0 = 0. Infinite when p puts mass where q has none.
template <std::size_t N>
double kl_divergence(const Distribution<N>& p, const Distribution<N>& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

template <std::size_t N>
double total_variation(const Distribution<N>& p, const Distribution<N>& q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < N; ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

/// Inverse-CDF draw; the last index absorbs rounding slack.
template <std::size_t N>
std::size_t sample_index(const Distribution<N>& d, double u) {
  double cumulative = 0.0;
  for (std::size_t i = 0; i + 1 < N; ++i) {
    cumulative += d[i];
    if (u < cumulative) return i;
  }
  return N - 1;
}

template <std::size_t N>
std::size_t sample_index(const Distribution<N>& d, Rng& rng) {
  return sample_index(d, rng.uniform());
}

}  // namespace apsim
