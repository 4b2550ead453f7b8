#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace apsim {

/// Uniform grid on [0, 1] including both endpoints.
class BeliefLattice {
 public:
  explicit BeliefLattice(std::size_t size) : size_(size) {
    if (size < 2) throw std::invalid_argument("BeliefLattice: need at least two points");
  }

  std::size_t size() const { return size_; }
  double spacing() const { return 1.0 / static_cast<double>(size_ - 1); }
  double point(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(size_ - 1); }

  std::size_t nearest(double b) const {
    const double x = std::clamp(b, 0.0, 1.0) * static_cast<double>(size_ - 1);
    return static_cast<std::size_t>(std::lround(x));
  }

  /// Piecewise-linear interpolation of grid values at belief b.
  double interpolate(std::span<const double> values, double b) const {
    const double x = std::clamp(b, 0.0, 1.0) * static_cast<double>(size_ - 1);
    const auto lo = std::min(static_cast<std::size_t>(x), size_ - 2);
    const double frac = x - static_cast<double>(lo);
    return (1.0 - frac) * values[lo] + frac * values[lo + 1];
  }

 private:
  std::size_t size_;
};

}  // namespace apsim
