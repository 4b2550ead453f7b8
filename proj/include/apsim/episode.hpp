#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "apsim/belief_filter.hpp"
#include "apsim/checkpoint.hpp"
#include "apsim/rng.hpp"

namespace apsim {

struct AgentObservation {
  double belief = 0.5;
  WorldState state;
};

/// What an opponent may condition on when reacting: the agent's belief before
/// the reaction, the world state and the agent's action of this round.
struct OpponentObservation {
  double belief = 0.5;
  WorldState state;
  AgentAction agent_action = AgentAction::Hand;
};

using AgentPolicy = std::function<AgentDistribution(const AgentObservation&)>;
using OpponentPolicy = std::function<OpponentDistribution(const OpponentObservation&)>;

struct RoundRecord {
  double belief_before = 0.0;
  AgentAction agent_action = AgentAction::Hand;
  OpponentAction opponent_action = OpponentAction::Stay;
  double belief_after = 0.0;
  int distance_before = 0;
  int distance_after = 0;
  double reward = 0.0;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct EpisodeRecord {
  Intent intent = Intent::Neutral;
  std::vector<RoundRecord> rounds;
  double final_belief = 0.0;
  double discounted_return = 0.0;

  double recompute_return(double gamma) const {
    double total = 0.0, g = 1.0;
    for (const auto& r : rounds) {
      total += g * r.reward;
      g *= gamma;
    }
    return total;
  }

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

/// Simulates one interaction from the start distance. Each round the agent
/// acts, the opponent reacts, the belief is filtered once and the agent is
/// paid on the post-observation belief.
inline EpisodeRecord run_episode(const Scenario& scenario, const BeliefFilter& filter,
                                 const AgentPolicy& agent, const OpponentPolicy& opponent,
                                 Intent intent, std::uint64_t seed) {
  Rng rng(seed);
  EpisodeRecord record;
  record.intent = intent;
  record.rounds.reserve(static_cast<std::size_t>(scenario.horizon));

  double belief = scenario.prior;
  WorldState state{scenario.start_distance, 0};
  double g = 1.0;
  for (int t = 0; t < scenario.horizon; ++t) {
    state.round = t;
    const AgentDistribution pa = agent({belief, state});
    if (!pa.is_valid(1e-6)) throw std::runtime_error("run_episode: agent returned an invalid distribution");
    const AgentAction a = agent_action_at(sample_index(pa, rng));

    const OpponentDistribution po = opponent({belief, state, a});
    if (!po.is_valid(1e-6)) throw std::runtime_error("run_episode: opponent returned an invalid distribution");
    const OpponentAction o = opponent_action_at(sample_index(po, rng));

    RoundRecord round;
    round.belief_before = belief;
    round.agent_action = a;
    round.opponent_action = o;
    round.distance_before = state.distance;
    round.belief_after = filter.update(belief, state.distance, a, o);
    round.distance_after = step_distance(state.distance, o, scenario.start_distance);
    round.reward = hybrid_reward(round.belief_after, intent, a);

    record.discounted_return += g * round.reward;
    g *= scenario.gamma;
    belief = round.belief_after;
    state.distance = round.distance_after;
    record.rounds.push_back(round);
  }
  record.final_belief = belief;
  return record;
}

/// Opponent policies that do not look at the observation.
inline OpponentPolicy constant_opponent(OpponentDistribution d) {
  return [d](const OpponentObservation&) { return d; };
}

inline OpponentPolicy neutral_opponent() {
  return [](const OpponentObservation& obs) { return neutral_policy(obs.agent_action); };
}

inline OpponentPolicy generative_opponent(std::shared_ptr<const OpponentModel> model,
                                          AdversaryParams params) {
  if (!params.in_support()) throw std::invalid_argument("generative_opponent: params outside support");
  return [model = std::move(model), params](const OpponentObservation& obs) {
    return model->adversary_policy(obs.state.distance, obs.agent_action, params);
  };
}

/// Plays the hyper-prior-averaged reaction model each round.
inline OpponentPolicy averaged_opponent(std::shared_ptr<const OpponentModel> model) {
  return [model = std::move(model)](const OpponentObservation& obs) {
    return model->averaged_adversary_policy(obs.state.distance, obs.agent_action);
  };
}

inline AgentPolicy uniform_agent() {
  return [](const AgentObservation&) { return AgentDistribution::uniform(); };
}

inline AgentPolicy fixed_agent(AgentAction a) {
  return [a](const AgentObservation&) { return AgentDistribution::one_hot(index(a)); };
}

}  // namespace apsim
