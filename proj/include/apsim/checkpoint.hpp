#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "apsim/distribution.hpp"

namespace apsim {

enum class AgentAction : int { Hand = 0, Loudspeaker = 1, Flare = 2 };
enum class OpponentAction : int { Stay = 0, Proceed = 1 };
enum class Intent : int { Neutral = 0, Adversary = 1 };

inline constexpr std::size_t kNumAgentActions = 3;
inline constexpr std::size_t kNumOpponentActions = 2;

inline constexpr std::array<AgentAction, kNumAgentActions> kAgentActions{
    AgentAction::Hand, AgentAction::Loudspeaker, AgentAction::Flare};
inline constexpr std::array<OpponentAction, kNumOpponentActions> kOpponentActions{
    OpponentAction::Stay, OpponentAction::Proceed};

using AgentDistribution = Distribution<kNumAgentActions>;
using OpponentDistribution = Distribution<kNumOpponentActions>;

constexpr std::size_t index(AgentAction a) { return static_cast<std::size_t>(a); }
constexpr std::size_t index(OpponentAction a) { return static_cast<std::size_t>(a); }

inline AgentAction agent_action_at(std::size_t i) {
  if (i >= kNumAgentActions) throw std::out_of_range("agent action index out of range");
  return kAgentActions[i];
}

inline OpponentAction opponent_action_at(std::size_t i) {
  if (i >= kNumOpponentActions) throw std::out_of_range("opponent action index out of range");
  return kOpponentActions[i];
}

constexpr std::string_view to_string(AgentAction a) {
  switch (a) {
    case AgentAction::Hand: return "hand";
    case AgentAction::Loudspeaker: return "loudspeaker";
    case AgentAction::Flare: return "flare";
  }
  return "?";
}

constexpr std::string_view to_string(OpponentAction a) {
  return a == OpponentAction::Stay ? "stay" : "proceed";
}

constexpr std::string_view to_string(Intent i) {
  return i == Intent::Neutral ? "neutral" : "adversary";
}

/// Episode constants of the checkpoint interaction.
struct Scenario {
  int start_distance = 12;
  int horizon = 10;
  double gamma = 0.95;
  double prior = 0.5;  // b0 = P(adversary)

  void validate() const {
    if (start_distance < 1) throw std::invalid_argument("start_distance must be >= 1");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    if (!(prior >= 0.0 && prior <= 1.0)) throw std::invalid_argument("prior must lie in [0, 1]");
  }

  /// Reachable (distance, round) pairs: at most one unit of progress per round.
  bool feasible(int distance, int round) const {
    return round >= 0 && round <= horizon && distance <= start_distance &&
           distance >= start_distance - round && distance >= 0;
  }

  /// Sum of gamma^t over one episode.
  double discount_mass() const {
    double mass = 0.0, g = 1.0;
    for (int t = 0; t < horizon; ++t, g *= gamma) mass += g;
    return mass;
  }
};

struct WorldState {
  int distance = 12;
  int round = 0;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// Stay keeps the distance, Proceed closes one unit; clamped at the checkpoint.
inline int step_distance(int distance, OpponentAction a, int max_distance = 12) {
  if (distance < 0 || distance > max_distance) {
    throw std::out_of_range("step_distance: distance " + std::to_string(distance) +
                            " outside [0, " + std::to_string(max_distance) + "]");
  }
  if (a == OpponentAction::Stay) return distance;
  return distance > 0 ? distance - 1 : 0;
}

/// Cost of acting against a neutral; acting against an adversary is free.
inline double state_reward(Intent intent, AgentAction a) {
  if (intent == Intent::Adversary) return 0.0;
  switch (a) {
    case AgentAction::Hand: return -0.1;
    case AgentAction::Loudspeaker: return -0.3;
    case AgentAction::Flare: return -0.7;
  }
  return 0.0;
}

/// Belief-weighted state reward, b = P(adversary).
inline double expected_state_reward(double belief, AgentAction a) {
  return belief * state_reward(Intent::Adversary, a) +
         (1.0 - belief) * state_reward(Intent::Neutral, a);
}

/// Largest per-round loss: log 2 of entropy plus the flare penalty.
inline constexpr double kMaxStepLoss = 0.69314718055994530942 + 0.7;

}  // namespace apsim
