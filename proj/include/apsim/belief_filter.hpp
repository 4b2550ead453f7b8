#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "apsim/checkpoint.hpp"
#include "apsim/opponent_models.hpp"

namespace apsim {

/// Binary entropy in nats with 0 log 0 = 0.
inline double belief_entropy(double b) {
  if (!(b >= 0.0 && b <= 1.0)) throw std::domain_error("belief_entropy: belief outside [0, 1]");
  double h = 0.0;
  if (b > 0.0) h -= b * std::log(b);
  if (b < 1.0) h -= (1.0 - b) * std::log1p(-b);
  return h;
}

/// Per-round agent reward: negative entropy of the post-observation belief
/// plus the state reward under the true intent.
inline double hybrid_reward(double b_post, Intent intent, AgentAction a) {
  return -belief_entropy(b_post) + state_reward(intent, a);
}

/// Bayes filter over the opponent's intent. The adversary hypothesis uses the
/// hyper-prior-averaged reaction model regardless of which family member the
/// simulator actually plays.
class BeliefFilter {
 public:
  static constexpr double kFloor = 1e-12;

  explicit BeliefFilter(std::shared_ptr<const OpponentModel> model) : model_(std::move(model)) {
    if (!model_) throw std::invalid_argument("BeliefFilter: null opponent model");
  }

  const OpponentModel& model() const { return *model_; }
  std::shared_ptr<const OpponentModel> shared_model() const { return model_; }

  double likelihood(Intent intent, int distance, AgentAction a, OpponentAction o) const {
    if (intent == Intent::Neutral) return neutral_policy(a)[index(o)];
    return model_->averaged_adversary_policy(distance, a)[index(o)];
  }

  /// Predictive reaction distribution b * adversary + (1 - b) * neutral.
  OpponentDistribution predictive(double b, int distance, AgentAction a) const {
    OpponentDistribution out;
    for (OpponentAction o : kOpponentActions) {
      out[index(o)] = b * likelihood(Intent::Adversary, distance, a, o) +
                      (1.0 - b) * likelihood(Intent::Neutral, distance, a, o);
    }
    return out;
  }

  /// Posterior P(adversary) after observing reaction `o` to action `a` at `distance`.
  /// Certain beliefs stay certain; interior beliefs are kept inside [kFloor, 1 - kFloor].
  double update(double b, int distance, AgentAction a, OpponentAction o) const {
    if (!(b >= 0.0 && b <= 1.0)) throw std::domain_error("belief_update: belief outside [0, 1]");
    const double l_adv = likelihood(Intent::Adversary, distance, a, o);
    const double l_neu = likelihood(Intent::Neutral, distance, a, o);
    const double evidence = b * l_adv + (1.0 - b) * l_neu;
    if (!(evidence > 0.0)) throw std::domain_error("belief_update: observation has zero likelihood");
    const double posterior = b * l_adv / evidence;
    if (b == 0.0 || b == 1.0) return b;
    return std::clamp(posterior, kFloor, 1.0 - kFloor);
  }

 private:
  std::shared_ptr<const OpponentModel> model_;
};

}  // namespace apsim
