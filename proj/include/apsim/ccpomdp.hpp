#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "apsim/belief_lattice.hpp"
#include "apsim/belief_mdp.hpp"
#include "apsim/episode.hpp"
#include "apsim/rng.hpp"

namespace apsim {

/// Reaction probabilities treated as independent Gaussians around the nominal
/// filtering model, one per (intent, agent action, reaction) entry.
struct UncertaintyModel {
  double variance = 0.001;
  double epsilon = 0.05;

  void validate() const {
    if (!(variance >= 0.0) || !std::isfinite(variance)) throw std::invalid_argument("variance must be >= 0");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  }

  /// Standard normal quantile z_{1 - epsilon}.
  double z() const {
    return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), 1.0 - epsilon);
  }
};

struct CcProblem {
  Scenario scenario;
  UncertaintyModel uncertainty;
  RewardTerms terms;
};

/// Successor value X = gamma sum_intent b(intent) sum_o pi(o | intent) V(b'_o)
/// as a Gaussian in the perturbed probabilities, with its chance-constrained
/// threshold mean - z stddev.
struct ChanceTerms {
  double mean = 0.0;
  double stddev = 0.0;
  double threshold = 0.0;
  std::array<double, kNumOpponentActions> successor_value{};
  Lookahead step;
};

/// V_{t+1}(distance, belief).
using ValueLookup = std::function<double(int, double)>;

inline ChanceTerms chance_terms(const CcProblem& p, const BeliefFilter& filter, double b,
                                int distance, AgentAction a, const ValueLookup& v_next) {
  ChanceTerms out;
  out.step = lookahead(p.scenario, filter, b, distance, a, p.terms);
  const double gamma = p.scenario.gamma;
  double second_moment = 0.0;
  for (OpponentAction o : kOpponentActions) {
    const std::size_t k = index(o);
    const double v = v_next(out.step.distance[k], out.step.belief[k]);
    out.successor_value[k] = v;
    out.mean += gamma * out.step.reaction[k] * v;
    second_moment += v * v;
  }
  // Each intent contributes its own independent perturbation per reaction.
  const double weight2 = b * b + (1.0 - b) * (1.0 - b);
  out.stddev = gamma * std::sqrt(p.uncertainty.variance * weight2 * second_moment);
  out.threshold = out.mean - p.uncertainty.z() * out.stddev;
  return out;
}

struct BackupResult {
  double value = 0.0;
  AgentAction action = AgentAction::Hand;
  std::array<double, kNumAgentActions> action_values{};
};

/// max over actions of expected reward + chance-constrained successor value;
/// ties go to the lowest action index.
inline BackupResult cc_backup(const CcProblem& p, const BeliefFilter& filter, double b,
                              int distance, int round, const ValueLookup& v_next) {
  if (!p.scenario.feasible(distance, round) || round >= p.scenario.horizon) {
    throw std::out_of_range("cc_backup: infeasible (distance " + std::to_string(distance) +
                            ", round " + std::to_string(round) + ")");
  }
  BackupResult out;
  for (AgentAction a : kAgentActions) {
    const ChanceTerms ct = chance_terms(p, filter, b, distance, a, v_next);
    const double value = ct.step.expected_reward + ct.threshold;
    out.action_values[index(a)] = value;
    if (a == AgentAction::Hand || value > out.value) {
      out.value = value;
      out.action = a;
    }
  }
  return out;
}

/// Value and action tables over (round, distance, belief point).
class BeliefGrid {
 public:
  BeliefGrid(const Scenario& s, std::size_t grid_size, UncertaintyModel uncertainty)
      : scenario_(s), lattice_(grid_size), uncertainty_(uncertainty) {
    const std::size_t n = static_cast<std::size_t>(s.horizon + 1) *
                          static_cast<std::size_t>(s.start_distance + 1) * grid_size;
    values_.assign(n, 0.0);
    actions_.assign(n, AgentAction::Hand);
  }

  const Scenario& scenario() const { return scenario_; }
  const BeliefLattice& lattice() const { return lattice_; }
  const UncertaintyModel& uncertainty() const { return uncertainty_; }

  double& value(int round, int distance, std::size_t i) { return values_[cell(round, distance, i)]; }
  double value(int round, int distance, std::size_t i) const { return values_[cell(round, distance, i)]; }
  AgentAction& action(int round, int distance, std::size_t i) { return actions_[cell(round, distance, i)]; }
  AgentAction action(int round, int distance, std::size_t i) const { return actions_[cell(round, distance, i)]; }

  std::span<const double> value_layer(int round, int distance) const {
    return {values_.data() + cell(round, distance, 0), lattice_.size()};
  }

  double interpolate_value(int round, int distance, double b) const {
    return lattice_.interpolate(value_layer(round, distance), b);
  }

  friend bool operator==(const BeliefGrid& a, const BeliefGrid& b) {
    return a.lattice_.size() == b.lattice_.size() && a.values_ == b.values_ && a.actions_ == b.actions_;
  }

 private:
  std::size_t cell(int t, int d, std::size_t i) const {
    if (t < 0 || t > scenario_.horizon || d < 0 || d > scenario_.start_distance || i >= lattice_.size()) {
      throw std::out_of_range("BeliefGrid: index out of range");
    }
    return (static_cast<std::size_t>(t) * static_cast<std::size_t>(scenario_.start_distance + 1) +
            static_cast<std::size_t>(d)) *
               lattice_.size() +
           i;
  }

  Scenario scenario_;
  BeliefLattice lattice_;
  UncertaintyModel uncertainty_;
  std::vector<double> values_;
  std::vector<AgentAction> actions_;
};

/// Backward induction from the terminal round; values at the horizon are zero
/// and successor values are interpolated linearly in belief.
inline BeliefGrid solve_ccpomdp(const CcProblem& p, const BeliefFilter& filter,
                                std::size_t grid_size) {
  p.scenario.validate();
  p.uncertainty.validate();
  BeliefGrid grid(p.scenario, grid_size, p.uncertainty);
  const Scenario& s = p.scenario;
  for (int t = s.horizon - 1; t >= 0; --t) {
    const ValueLookup v_next = [&grid, t](int d, double b) { return grid.interpolate_value(t + 1, d, b); };
    for (int d = s.start_distance - t; d <= s.start_distance; ++d) {
      for (std::size_t i = 0; i < grid_size; ++i) {
        const BackupResult r = cc_backup(p, filter, grid.lattice().point(i), d, t, v_next);
        grid.value(t, d, i) = r.value;
        grid.action(t, d, i) = r.action;
      }
    }
  }
  return grid;
}

/// Deterministic action at the grid point nearest to b.
inline AgentAction cc_policy(const BeliefGrid& grid, double b, int distance, int round) {
  const Scenario& s = grid.scenario();
  if (!s.feasible(distance, round) || round >= s.horizon) {
    throw std::out_of_range("cc_policy: infeasible (distance " + std::to_string(distance) +
                            ", round " + std::to_string(round) + ")");
  }
  return grid.action(round, distance, grid.lattice().nearest(b));
}

inline AgentPolicy cc_agent_policy(std::shared_ptr<const BeliefGrid> grid) {
  return [grid = std::move(grid)](const AgentObservation& obs) {
    return AgentDistribution::one_hot(index(cc_policy(*grid, obs.belief, obs.state.distance, obs.state.round)));
  };
}

/// Monte Carlo draw of the successor value X with freshly sampled reaction
/// probabilities. With `renormalize`, each sampled row is clamped to [0, 1]
/// and rescaled to sum to one.
inline double sample_successor_value(const CcProblem& p, const BeliefFilter& filter, double b,
                                     int distance, AgentAction a, const ChanceTerms& ct, Rng& rng,
                                     bool renormalize = false) {
  const double sd = std::sqrt(p.uncertainty.variance);
  double x = 0.0;
  for (Intent intent : {Intent::Adversary, Intent::Neutral}) {
    const double weight = intent == Intent::Adversary ? b : 1.0 - b;
    std::array<double, kNumOpponentActions> pi{};
    for (OpponentAction o : kOpponentActions) {
      pi[index(o)] = filter.likelihood(intent, distance, a, o) + sd * rng.normal();
    }
    if (renormalize) {
      double sum = 0.0;
      for (double& v : pi) sum += (v = std::clamp(v, 0.0, 1.0));
      if (sum > 0.0) {
        for (double& v : pi) v /= sum;
      }
    }
    for (std::size_t k = 0; k < kNumOpponentActions; ++k) {
      x += p.scenario.gamma * weight * pi[k] * ct.successor_value[k];
    }
  }
  return x;
}

}  // namespace apsim
