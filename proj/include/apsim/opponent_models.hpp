#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "apsim/checkpoint.hpp"
#include "apsim/distribution.hpp"
#include "apsim/quadrature.hpp"
#include "apsim/rng.hpp"

namespace apsim {

/// Reaction probabilities of a neutral opponent; depends only on the agent's action.
inline OpponentDistribution neutral_policy(AgentAction a) {
  switch (a) {
    case AgentAction::Hand: return {{0.60, 0.40}};
    case AgentAction::Loudspeaker: return {{0.75, 0.25}};
    case AgentAction::Flare: return {{0.90, 0.10}};
  }
  throw std::invalid_argument("neutral_policy: unknown action");
}

/// Dense goal reward of the adversary: 1.1^(d0 - d) - 1.
inline double adversary_mdp_reward(int start_distance, int distance) {
  if (distance < 0 || distance > start_distance) {
    throw std::out_of_range("adversary_mdp_reward: distance " + std::to_string(distance) +
                            " outside [0, " + std::to_string(start_distance) + "]");
  }
  return std::pow(1.1, start_distance - distance) - 1.0;
}

/// Optimal action values of the goal-seeking adversary, keyed on distance.
/// The agent's action never enters the adversary's reward or transition, so
/// distance alone is a sufficient state.
class AdversaryQTable {
 public:
  AdversaryQTable() = default;
  explicit AdversaryQTable(std::vector<std::array<double, kNumOpponentActions>> q)
      : q_(std::move(q)) {}

  int max_distance() const { return static_cast<int>(q_.size()) - 1; }

  double operator()(int distance, OpponentAction a) const { return row(distance)[index(a)]; }

  const std::array<double, kNumOpponentActions>& row(int distance) const {
    if (distance < 0 || distance > max_distance()) {
      throw std::out_of_range("AdversaryQTable: distance out of range");
    }
    return q_[static_cast<std::size_t>(distance)];
  }

  /// Sup-norm change of the final sweep, one entry per sweep.
  std::vector<double> residuals;

 private:
  std::vector<std::array<double, kNumOpponentActions>> q_;
};

/// Infinite-horizon value iteration; reward is collected on the successor distance.
inline AdversaryQTable solve_adversary_q(double gamma_o, double tol, int start_distance = 12) {
  if (!(gamma_o > 0.0 && gamma_o < 1.0)) throw std::invalid_argument("gamma_o must lie in (0, 1)");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const auto n = static_cast<std::size_t>(start_distance + 1);
  std::vector<std::array<double, kNumOpponentActions>> q(n, {0.0, 0.0});
  std::vector<double> reward(n);
  for (int d = 0; d <= start_distance; ++d) reward[d] = adversary_mdp_reward(start_distance, d);

  std::vector<double> residuals;
  for (;;) {
    auto next = q;
    double residual = 0.0;
    for (int d = 0; d <= start_distance; ++d) {
      for (OpponentAction a : kOpponentActions) {
        const int successor = step_distance(d, a, start_distance);
        const auto& qs = q[static_cast<std::size_t>(successor)];
        const double value = reward[successor] + gamma_o * std::max(qs[0], qs[1]);
        residual = std::max(residual, std::abs(value - q[d][index(a)]));
        next[d][index(a)] = value;
      }
    }
    q = std::move(next);
    residuals.push_back(residual);
    if (residual < tol) break;
  }
  AdversaryQTable table(std::move(q));
  table.residuals = std::move(residuals);
  return table;
}

/// Boltzmann-rational goal policy exp(alpha Q(d, .)) / Z.
inline OpponentDistribution soft_rational_policy(const AdversaryQTable& q, double alpha,
                                                 int distance) {
  if (!(alpha > 0.0)) throw std::invalid_argument("soft_rational_policy: alpha must be positive");
  const auto& row = q.row(distance);
  return softmax(std::array<double, kNumOpponentActions>{alpha * row[0], alpha * row[1]});
}

/// Minimizer of KL(pi || goal) + beta KL(pi || neutral) over the simplex,
/// which is the geometric interpolation goal^(1/(1+beta)) neutral^(beta/(1+beta)).
template <std::size_t N>
Distribution<N> kl_blend(const Distribution<N>& goal, const Distribution<N>& neutral,
                         double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("kl_blend: beta must be >= 0");
  if (!goal.full_support() || !neutral.full_support()) {
    throw std::invalid_argument("kl_blend: inputs must have full support");
  }
  const double w_goal = 1.0 / (1.0 + beta);
  const double w_neutral = beta / (1.0 + beta);
  std::array<double, N> logits{};
  for (std::size_t i = 0; i < N; ++i) {
    logits[i] = w_goal * std::log(goal[i]) + w_neutral * std::log(neutral[i]);
  }
  return softmax(logits);
}

/// Member (alpha, beta) of the generative adversary family.
struct AdversaryParams {
  double alpha = 1.5;  // rationality
  double beta = 1.5;   // deception

  static constexpr double kLower = 1.0;
  static constexpr double kUpper = 2.0;

  bool in_support() const {
    return alpha >= kLower && alpha <= kUpper && beta >= kLower && beta <= kUpper;
  }

  friend bool operator==(const AdversaryParams&, const AdversaryParams&) = default;
};

/// Draw from the uniform hyper-prior on [1, 2]^2.
inline AdversaryParams sample_adversary_params(Rng& rng) {
  const double alpha = rng.uniform(AdversaryParams::kLower, AdversaryParams::kUpper);
  const double beta = rng.uniform(AdversaryParams::kLower, AdversaryParams::kUpper);
  return {alpha, beta};
}

/// Goal-seeking adversary MDP solution plus the hyper-prior-averaged reaction
/// model used for filtering. Immutable after construction.
class OpponentModel {
 public:
  static constexpr int kDefaultQuadratureNodes = 8;
  static constexpr double kValueIterationTol = 1e-10;

  explicit OpponentModel(const Scenario& scenario = {},
                         int quadrature_nodes = kDefaultQuadratureNodes)
      : start_distance_(scenario.start_distance),
        quadrature_nodes_(quadrature_nodes),
        q_(solve_adversary_q(scenario.gamma, kValueIterationTol, scenario.start_distance)) {
    averaged_.resize(static_cast<std::size_t>(start_distance_ + 1));
    for (int d = 0; d <= start_distance_; ++d) {
      for (AgentAction a : kAgentActions) {
        averaged_[d][index(a)] = integrate(d, a, quadrature_nodes_);
      }
    }
  }

  int start_distance() const { return start_distance_; }
  int quadrature_nodes() const { return quadrature_nodes_; }
  const AdversaryQTable& q_table() const { return q_; }

  OpponentDistribution goal_policy(int distance, double alpha) const {
    return soft_rational_policy(q_, alpha, distance);
  }

  /// One family member. The agent's action enters only through the neutral term.
  OpponentDistribution adversary_policy(int distance, AgentAction a,
                                        const AdversaryParams& params) const {
    if (!params.in_support()) {
      throw std::invalid_argument("adversary_policy: (alpha, beta) outside [1, 2]^2");
    }
    return kl_blend(goal_policy(distance, params.alpha), neutral_policy(a), params.beta);
  }

  /// Tensor-product Gauss-Legendre average of the family over the hyper-prior.
  OpponentDistribution integrate(int distance, AgentAction a, int nodes) const {
    const QuadratureRule rule =
        gauss_legendre(nodes, AdversaryParams::kLower, AdversaryParams::kUpper);
    std::array<double, kNumOpponentActions> acc{};
    for (int i = 0; i < nodes; ++i) {
      for (int j = 0; j < nodes; ++j) {
        const auto member = adversary_policy(distance, a, {rule.nodes[i], rule.nodes[j]});
        const double w = rule.weights[i] * rule.weights[j];
        for (std::size_t k = 0; k < kNumOpponentActions; ++k) acc[k] += w * member[k];
      }
    }
    return normalized(acc);
  }

  const OpponentDistribution& averaged_adversary_policy(int distance, AgentAction a) const {
    if (distance < 0 || distance > start_distance_) {
      throw std::out_of_range("averaged_adversary_policy: distance out of range");
    }
    return averaged_[static_cast<std::size_t>(distance)][index(a)];
  }

 private:
  int start_distance_;
  int quadrature_nodes_;
  AdversaryQTable q_;
  std::vector<std::array<OpponentDistribution, kNumAgentActions>> averaged_;
};

}  // namespace apsim
