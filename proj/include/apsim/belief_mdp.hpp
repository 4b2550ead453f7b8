#pragma once

#include <array>

#include "apsim/belief_filter.hpp"
#include "apsim/checkpoint.hpp"

namespace apsim {

/// Which reward terms the belief-space planners optimize.
struct RewardTerms {
  bool entropy = true;
  bool state = true;
};

/// One-step consequence of an agent action under the filtering model.
struct Lookahead {
  OpponentDistribution reaction;                    // predictive P(o | b, d, a)
  std::array<double, kNumOpponentActions> belief{};  // posterior after each reaction
  std::array<int, kNumOpponentActions> distance{};   // distance after each reaction
  double expected_reward = 0.0;                      // paid on the posterior belief
};

inline Lookahead lookahead(const Scenario& s, const BeliefFilter& filter, double b, int distance,
                           AgentAction a, RewardTerms terms = {}) {
  Lookahead out;
  out.reaction = filter.predictive(b, distance, a);
  if (terms.state) out.expected_reward = expected_state_reward(b, a);
  for (OpponentAction o : kOpponentActions) {
    const std::size_t k = index(o);
    out.belief[k] = filter.update(b, distance, a, o);
    out.distance[k] = step_distance(distance, o, s.start_distance);
    if (terms.entropy) out.expected_reward -= out.reaction[k] * belief_entropy(out.belief[k]);
  }
  return out;
}

}  // namespace apsim
