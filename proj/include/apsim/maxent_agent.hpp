#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "apsim/belief_filter.hpp"
#include "apsim/checkpoint.hpp"
#include "apsim/episode.hpp"
#include "apsim/opponent_models.hpp"
#include "apsim/soft_q.hpp"

namespace apsim {

inline constexpr std::size_t kAgentFeatures = 3;
using AgentNetwork = SoftQNetwork<kAgentFeatures, kNumAgentActions>;

/// (b, d / d0, t / T); the round keeps the finite-horizon problem Markov.
inline std::array<double, kAgentFeatures> agent_features(const Scenario& s, double belief,
                                                         int distance, int round) {
  return {belief, static_cast<double>(distance) / s.start_distance,
          static_cast<double>(round) / s.horizon};
}

/// Agent transitions of an episode; the last one is terminal.
inline std::vector<Transition<kAgentFeatures>> agent_transitions(const Scenario& s,
                                                                 const EpisodeRecord& ep) {
  std::vector<Transition<kAgentFeatures>> out;
  out.reserve(ep.rounds.size());
  for (std::size_t t = 0; t < ep.rounds.size(); ++t) {
    const RoundRecord& r = ep.rounds[t];
    const int round = static_cast<int>(t);
    Transition<kAgentFeatures> tr;
    tr.features = agent_features(s, r.belief_before, r.distance_before, round);
    tr.action = index(r.agent_action);
    tr.reward = r.reward;
    tr.next_features = agent_features(s, r.belief_after, r.distance_after, round + 1);
    tr.terminal = round + 1 == s.horizon;
    out.push_back(tr);
  }
  return out;
}

inline AgentPolicy maxent_policy(std::shared_ptr<const AgentNetwork> net, const Scenario& s) {
  return [net = std::move(net), s](const AgentObservation& obs) {
    return net->policy(agent_features(s, obs.belief, obs.state.distance, obs.state.round));
  };
}

/// Soft-Q learning against the generative opponent population. Every episode
/// draws the intent from the prior and, for adversaries, (alpha, beta) from
/// the hyper-prior, and is played by the current MaxEnt policy.
inline AgentNetwork train_agent(const Scenario& scenario, const BeliefFilter& filter,
                                const SoftQConfig& config, std::uint64_t seed,
                                TrainingReport* report = nullptr) {
  scenario.validate();
  SoftQConfig cfg = config;
  cfg.gamma = scenario.gamma;
  const auto model = filter.shared_model();
  auto play = [&](const AgentNetwork& online, Rng& env) {
    const Intent intent = env.bernoulli(scenario.prior) ? Intent::Adversary : Intent::Neutral;
    const OpponentPolicy opponent = intent == Intent::Neutral
                                        ? neutral_opponent()
                                        : generative_opponent(model, sample_adversary_params(env));
    const AgentPolicy policy = [&online, &scenario](const AgentObservation& obs) {
      return online.policy(agent_features(scenario, obs.belief, obs.state.distance, obs.state.round));
    };
    return agent_transitions(scenario, run_episode(scenario, filter, policy, opponent, intent, env.next()));
  };
  return run_soft_q_training<kAgentFeatures, kNumAgentActions>(cfg, seed, play, report);
}

}  // namespace apsim
