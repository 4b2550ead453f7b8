#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "apsim/belief_lattice.hpp"
#include "apsim/belief_mdp.hpp"
#include "apsim/soft_q.hpp"

namespace apsim {

/// Soft-Q fixed point of the belief-discretized checkpoint problem, computed
/// by synchronous sweeps over every (round, distance, belief point). Serves as
/// the reference solution for the network learner.
class TabularSoftQ {
 public:
  using Row = std::array<double, kNumAgentActions>;

  TabularSoftQ(const Scenario& s, const BeliefFilter& filter, std::size_t grid_size, double sigma,
               double tol = 1e-12, int max_sweeps = 1000)
      : scenario_(s), lattice_(grid_size), sigma_(sigma) {
    s.validate();
    if (!(sigma > 0.0)) throw std::invalid_argument("TabularSoftQ: sigma must be positive");
    q_.assign(cells(), Row{});

    // Lookaheads do not change between sweeps.
    std::vector<std::array<Lookahead, kNumAgentActions>> steps(cells());
    for (int t = 0; t < s.horizon; ++t) {
      for (int d = s.start_distance - t; d <= s.start_distance; ++d) {
        for (std::size_t i = 0; i < lattice_.size(); ++i) {
          for (AgentAction a : kAgentActions) {
            steps[cell(t, d, i)][index(a)] = lookahead(s, filter, lattice_.point(i), d, a);
          }
        }
      }
    }

    std::vector<double> v(cells(), 0.0);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      for (std::size_t c = 0; c < cells(); ++c) v[c] = soft_value(q_[c], sigma_);
      double residual = 0.0;
      std::vector<Row> next = q_;
      for (int t = 0; t < s.horizon; ++t) {
        for (int d = s.start_distance - t; d <= s.start_distance; ++d) {
          for (std::size_t i = 0; i < lattice_.size(); ++i) {
            const std::size_t c = cell(t, d, i);
            for (AgentAction a : kAgentActions) {
              const Lookahead& la = steps[c][index(a)];
              double value = la.expected_reward;
              if (t + 1 < s.horizon) {
                for (std::size_t k = 0; k < kNumOpponentActions; ++k) {
                  const std::span<const double> layer(v.data() + cell(t + 1, la.distance[k], 0),
                                                      lattice_.size());
                  value += s.gamma * la.reaction[k] * lattice_.interpolate(layer, la.belief[k]);
                }
              }
              residual = std::max(residual, std::abs(value - q_[c][index(a)]));
              next[c][index(a)] = value;
            }
          }
        }
      }
      q_ = std::move(next);
      residuals_.push_back(residual);
      if (residual < tol) break;
    }
  }

  const BeliefLattice& lattice() const { return lattice_; }
  double sigma() const { return sigma_; }
  const std::vector<double>& residuals() const { return residuals_; }
  bool converged(double tol = 1e-12) const { return !residuals_.empty() && residuals_.back() < tol; }

  const Row& q(int round, int distance, std::size_t belief_index) const {
    if (!scenario_.feasible(distance, round) || round >= scenario_.horizon) {
      throw std::out_of_range("TabularSoftQ: infeasible (distance, round)");
    }
    return q_[cell(round, distance, belief_index)];
  }

  /// Q interpolated linearly in belief.
  Row q_at(int round, int distance, double b) const {
    const double x = std::clamp(b, 0.0, 1.0) * static_cast<double>(lattice_.size() - 1);
    const auto lo = std::min(static_cast<std::size_t>(x), lattice_.size() - 2);
    const double frac = x - static_cast<double>(lo);
    const Row& a = q(round, distance, lo);
    const Row& c = q(round, distance, lo + 1);
    Row out{};
    for (std::size_t k = 0; k < kNumAgentActions; ++k) out[k] = (1.0 - frac) * a[k] + frac * c[k];
    return out;
  }

  double value_at(int round, int distance, double b) const {
    return soft_value(q_at(round, distance, b), sigma_);
  }

  AgentDistribution policy_at(int round, int distance, double b) const {
    return soft_policy(q_at(round, distance, b), sigma_);
  }

 private:
  std::size_t cells() const {
    return static_cast<std::size_t>(scenario_.horizon + 1) *
           static_cast<std::size_t>(scenario_.start_distance + 1) * lattice_.size();
  }
  std::size_t cell(int t, int d, std::size_t i) const {
    return (static_cast<std::size_t>(t) * static_cast<std::size_t>(scenario_.start_distance + 1) +
            static_cast<std::size_t>(d)) *
               lattice_.size() +
           i;
  }

  Scenario scenario_;
  BeliefLattice lattice_;
  double sigma_;
  std::vector<Row> q_;
  std::vector<double> residuals_;
};

}  // namespace apsim
