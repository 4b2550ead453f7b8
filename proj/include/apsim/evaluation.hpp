#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "apsim/belief_filter.hpp"
#include "apsim/checkpoint.hpp"
#include "apsim/episode.hpp"
#include "apsim/opponent_models.hpp"
#include "apsim/soft_q.hpp"

namespace apsim {

// ---------------------------------------------------------------------------
// Test adversaries
// ---------------------------------------------------------------------------

struct DeceptiveParams {
  double b_thre = 0.25;

  static constexpr double kMax = 0.5;

  void validate() const {
    if (!(b_thre >= 0.0 && b_thre <= kMax)) {
      throw std::invalid_argument("deceptive threshold " + std::to_string(b_thre) + " outside [0, 0.5]");
    }
  }
};

/// Threshold deception: under hand or loudspeaker, stay while the agent's
/// belief exceeds the threshold and proceed otherwise; always proceed under flare.
inline OpponentAction deceptive_policy(double b, AgentAction a, const DeceptiveParams& params) {
  if (a == AgentAction::Flare) return OpponentAction::Proceed;
  return b > params.b_thre ? OpponentAction::Stay : OpponentAction::Proceed;
}

inline OpponentPolicy deceptive_opponent(DeceptiveParams params) {
  params.validate();
  return [params](const OpponentObservation& obs) {
    return OpponentDistribution::one_hot(index(deceptive_policy(obs.belief, obs.agent_action, params)));
  };
}

inline constexpr std::size_t kAdversaryFeatures = 6;
using AdversaryNetwork = SoftQNetwork<kAdversaryFeatures, kNumOpponentActions>;

/// (b, one-hot agent action, d / d0, t / T) with b the agent's belief before the reaction.
inline std::array<double, kAdversaryFeatures> adversary_features(const Scenario& s, double belief,
                                                                 AgentAction a, int distance,
                                                                 int round) {
  std::array<double, kAdversaryFeatures> f{};
  f[0] = belief;
  f[1 + index(a)] = 1.0;
  f[4] = static_cast<double>(distance) / s.start_distance;
  f[5] = static_cast<double>(round) / s.horizon;
  return f;
}

/// Soft-Q adversary trained against a frozen agent with full access to its belief.
struct LearningAdversary {
  AdversaryNetwork network;
  double eta = 0.0;
  Scenario scenario;

  OpponentDistribution policy(const OpponentObservation& obs) const {
    return network.policy(adversary_features(scenario, obs.belief, obs.agent_action,
                                             obs.state.distance, obs.state.round));
  }
};

inline OpponentPolicy learning_opponent(std::shared_ptr<const LearningAdversary> adversary) {
  return [adversary = std::move(adversary)](const OpponentObservation& obs) {
    return adversary->policy(obs);
  };
}

/// Adversary transitions of an episode: reward is the negated agent reward
/// plus eta times the goal reward at the post-move distance.
inline std::vector<Transition<kAdversaryFeatures>> adversary_transitions(const Scenario& s,
                                                                         const EpisodeRecord& ep,
                                                                         double eta) {
  std::vector<Transition<kAdversaryFeatures>> out;
  out.reserve(ep.rounds.size());
  for (std::size_t t = 0; t < ep.rounds.size(); ++t) {
    const RoundRecord& r = ep.rounds[t];
    const int round = static_cast<int>(t);
    Transition<kAdversaryFeatures> tr;
    tr.features = adversary_features(s, r.belief_before, r.agent_action, r.distance_before, round);
    tr.action = index(r.opponent_action);
    tr.reward = -r.reward + eta * adversary_mdp_reward(s.start_distance, r.distance_after);
    tr.terminal = t + 1 == ep.rounds.size();
    if (!tr.terminal) {
      const RoundRecord& next = ep.rounds[t + 1];
      tr.next_features =
          adversary_features(s, next.belief_before, next.agent_action, next.distance_before, round + 1);
    }
    out.push_back(tr);
  }
  return out;
}

inline LearningAdversary train_learning_adversary(const Scenario& scenario,
                                                  const BeliefFilter& filter,
                                                  const AgentPolicy& agent, double eta,
                                                  const SoftQConfig& config, std::uint64_t seed,
                                                  TrainingReport* report = nullptr) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be >= 0");
  scenario.validate();
  SoftQConfig cfg = config;
  cfg.gamma = scenario.gamma;
  auto play = [&](const AdversaryNetwork& online, Rng& env) {
    const OpponentPolicy opponent = [&online, &scenario](const OpponentObservation& obs) {
      return online.policy(adversary_features(scenario, obs.belief, obs.agent_action,
                                              obs.state.distance, obs.state.round));
    };
    const EpisodeRecord ep = run_episode(scenario, filter, agent, opponent, Intent::Adversary, env.next());
    return adversary_transitions(scenario, ep, eta);
  };
  LearningAdversary out;
  out.network = run_soft_q_training<kAdversaryFeatures, kNumOpponentActions>(cfg, seed, play, report);
  out.eta = eta;
  out.scenario = scenario;
  return out;
}

// ---------------------------------------------------------------------------
// Adversary specifications
// ---------------------------------------------------------------------------

struct AdversarySpec {
  enum class Kind { Neutral, Generative, Deceptive, Learning, Population };

  Kind kind = Kind::Neutral;
  AdversaryParams params;
  DeceptiveParams deceptive;
  std::shared_ptr<const LearningAdversary> learning;

  static AdversarySpec neutral() { return {}; }
  static AdversarySpec generative(AdversaryParams p) {
    if (!p.in_support()) throw std::invalid_argument("generative adversary: (alpha, beta) outside [1, 2]^2");
    AdversarySpec s;
    s.kind = Kind::Generative;
    s.params = p;
    return s;
  }
  static AdversarySpec deceptive_threshold(double b_thre) {
    AdversarySpec s;
    s.kind = Kind::Deceptive;
    s.deceptive = {b_thre};
    s.deceptive.validate();
    return s;
  }
  static AdversarySpec learned(std::shared_ptr<const LearningAdversary> adversary) {
    if (!adversary) throw std::invalid_argument("learning adversary: null model");
    AdversarySpec s;
    s.kind = Kind::Learning;
    s.learning = std::move(adversary);
    return s;
  }
  /// The training population: intent from the prior, adversaries from the hyper-prior.
  static AdversarySpec population() {
    AdversarySpec s;
    s.kind = Kind::Population;
    return s;
  }

  std::string name() const {
    switch (kind) {
      case Kind::Neutral: return "neutral";
      case Kind::Generative: {
        char buf[64];
        std::snprintf(buf, sizeof buf, "generative:%g;%g", params.alpha, params.beta);
        return buf;
      }
      case Kind::Deceptive: return "deceptive";
      case Kind::Learning: return "learning";
      case Kind::Population: return "population";
    }
    return "?";
  }

  std::string param_name() const {
    switch (kind) {
      case Kind::Generative: return "alpha";
      case Kind::Deceptive: return "b_thre";
      case Kind::Learning: return "eta";
      default: return "none";
    }
  }

  double param_value() const {
    switch (kind) {
      case Kind::Generative: return params.alpha;
      case Kind::Deceptive: return deceptive.b_thre;
      case Kind::Learning: return learning->eta;
      default: return 0.0;
    }
  }
};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Reaction counts of adversary-intent opponents keyed on (round, distance, agent action).
class EmpiricalPolicyCounts {
 public:
  EmpiricalPolicyCounts() = default;
  explicit EmpiricalPolicyCounts(const Scenario& s)
      : horizon_(s.horizon), distances_(s.start_distance + 1),
        counts_(static_cast<std::size_t>(s.horizon) * static_cast<std::size_t>(distances_) * kNumAgentActions) {}

  void add(int round, int distance, AgentAction a, OpponentAction o, long n = 1) {
    counts_.at(key(round, distance, a))[index(o)] += n;
  }

  void merge(const EmpiricalPolicyCounts& other) {
    if (other.counts_.size() != counts_.size()) throw std::invalid_argument("EmpiricalPolicyCounts: shape mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      for (std::size_t k = 0; k < kNumOpponentActions; ++k) counts_[i][k] += other.counts_[i][k];
    }
  }

  const std::array<long, kNumOpponentActions>& at(int round, int distance, AgentAction a) const {
    return counts_.at(key(round, distance, a));
  }

  long visits(int round, int distance, AgentAction a) const {
    const auto& c = at(round, distance, a);
    return c[0] + c[1];
  }

  long total() const {
    long n = 0;
    for (const auto& c : counts_) n += c[0] + c[1];
    return n;
  }

  long distinct() const {
    long m = 0;
    for (const auto& c : counts_) m += (c[0] + c[1]) > 0 ? 1 : 0;
    return m;
  }

  int horizon() const { return horizon_; }
  int max_distance() const { return distances_ - 1; }

  friend bool operator==(const EmpiricalPolicyCounts&, const EmpiricalPolicyCounts&) = default;

 private:
  std::size_t key(int t, int d, AgentAction a) const {
    if (t < 0 || t >= horizon_ || d < 0 || d >= distances_) throw std::out_of_range("EmpiricalPolicyCounts: key out of range");
    return (static_cast<std::size_t>(t) * static_cast<std::size_t>(distances_) + static_cast<std::size_t>(d)) *
               kNumAgentActions +
           index(a);
  }

  int horizon_ = 0;
  int distances_ = 0;
  std::vector<std::array<long, kNumOpponentActions>> counts_;
};

/// Nominal reaction model pi(o | distance, agent action, round).
using NominalPolicy = std::function<OpponentDistribution(int, AgentAction, int)>;

/// Visitation-weighted KL between empirical and nominal reaction policies:
/// sum over visited (d, a, t) of N(d, a, t) / (N M) * KL(empirical || nominal).
inline double policy_uncertainty_index(const EmpiricalPolicyCounts& counts, const NominalPolicy& nominal) {
  const long n = counts.total();
  if (n <= 0) throw std::invalid_argument("policy_uncertainty_index: no data");
  const double norm = static_cast<double>(n) * static_cast<double>(counts.distinct());
  double u = 0.0;
  for (int t = 0; t < counts.horizon(); ++t) {
    for (int d = 0; d <= counts.max_distance(); ++d) {
      for (AgentAction a : kAgentActions) {
        const auto& c = counts.at(t, d, a);
        const long visits = c[0] + c[1];
        if (visits == 0) continue;
        OpponentDistribution empirical;
        for (std::size_t k = 0; k < kNumOpponentActions; ++k) {
          empirical[k] = static_cast<double>(c[k]) / static_cast<double>(visits);
        }
        const OpponentDistribution pi = nominal(d, a, t);
        if (!pi.full_support()) throw std::invalid_argument("policy_uncertainty_index: nominal policy lacks full support");
        u += static_cast<double>(visits) / norm * kl_divergence(empirical, pi);
      }
    }
  }
  return u;
}

inline NominalPolicy nominal_adversary(std::shared_ptr<const OpponentModel> model, AdversaryParams params) {
  return [model = std::move(model), params](int d, AgentAction a, int) {
    return model->adversary_policy(d, a, params);
  };
}

struct Agent {
  std::string label;
  AgentPolicy policy;
};

struct MetricsRow {
  std::string agent;
  std::string adversary;
  std::string param_name;
  double param_value = 0.0;
  long episodes = 0;
  double clap_mean = 0.0;
  double clap_stderr = 0.0;
  double tpr_mean = 0.0;
  double tpr_stderr = 0.0;
  double u_p = 0.0;
  std::vector<std::uint64_t> seeds;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// Per-episode data retained for aggregation.
struct EpisodeSummary {
  Intent intent = Intent::Neutral;
  double discounted_return = 0.0;
  double final_belief = 0.0;
  std::vector<std::array<int, 4>> reactions;  // (round, distance, agent action, reaction)
};

struct EvaluationOptions {
  Scenario scenario;
  long episodes = 10'000;  // per seed
  std::vector<std::uint64_t> seeds{0};
  AdversaryParams nominal{1.5, 1.5};
  unsigned workers = 1;
};

inline OpponentPolicy make_opponent(const AdversarySpec& spec, std::shared_ptr<const OpponentModel> model,
                                    Rng& rng, Intent& intent, double prior) {
  using Kind = AdversarySpec::Kind;
  intent = Intent::Adversary;
  switch (spec.kind) {
    case Kind::Neutral:
      intent = Intent::Neutral;
      return neutral_opponent();
    case Kind::Generative: return generative_opponent(std::move(model), spec.params);
    case Kind::Deceptive: return deceptive_opponent(spec.deceptive);
    case Kind::Learning: return learning_opponent(spec.learning);
    case Kind::Population:
      if (!rng.bernoulli(prior)) {
        intent = Intent::Neutral;
        return neutral_opponent();
      }
      return generative_opponent(std::move(model), sample_adversary_params(rng));
  }
  throw std::logic_error("make_opponent: unknown adversary kind");
}

inline EpisodeSummary summarize_episode(const EpisodeRecord& ep) {
  EpisodeSummary s;
  s.intent = ep.intent;
  s.discounted_return = ep.discounted_return;
  s.final_belief = ep.final_belief;
  if (ep.intent == Intent::Adversary) {
    s.reactions.reserve(ep.rounds.size());
    for (std::size_t t = 0; t < ep.rounds.size(); ++t) {
      const RoundRecord& r = ep.rounds[t];
      s.reactions.push_back({static_cast<int>(t), r.distance_before, static_cast<int>(index(r.agent_action)),
                             static_cast<int>(index(r.opponent_action))});
    }
  }
  return s;
}

/// Simulates every (seed, episode) pair. Episode k of seed s uses the stream
/// derive_seed(s, k), so results do not depend on how the work is sharded.
inline std::vector<EpisodeSummary> simulate_episodes(const Agent& agent, const AdversarySpec& spec,
                                                     const BeliefFilter& filter,
                                                     const EvaluationOptions& opt) {
  if (opt.episodes <= 0) throw std::invalid_argument("evaluate: episodes must be positive");
  if (opt.seeds.empty()) throw std::invalid_argument("evaluate: need at least one seed");
  const std::size_t per_seed = static_cast<std::size_t>(opt.episodes);
  const std::size_t total = per_seed * opt.seeds.size();
  std::vector<EpisodeSummary> out(total);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const std::uint64_t seed = derive_seed(opt.seeds[j / per_seed], j % per_seed);
      Rng setup(derive_seed(seed, 0x5eed));
      Intent intent = Intent::Adversary;
      const OpponentPolicy opponent = make_opponent(spec, filter.shared_model(), setup, intent, opt.scenario.prior);
      out[j] = summarize_episode(run_episode(opt.scenario, filter, agent.policy, opponent, intent, seed));
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(total)));
  if (workers == 1) {
    work(0, total);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (total + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(total, w * chunk);
      const std::size_t end = std::min(total, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          work(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return out;
}

/// Aggregates episodes in order: Cl^ap over all episodes, TPR and u_p over
/// adversary-intent episodes (NaN when there are none).
inline MetricsRow summarize(const std::vector<EpisodeSummary>& episodes, const Scenario& scenario,
                            const NominalPolicy& nominal) {
  if (episodes.empty()) throw std::invalid_argument("summarize: no episodes");
  MetricsRow row;
  row.episodes = static_cast<long>(episodes.size());
  double sum_loss = 0.0, sum_loss2 = 0.0, sum_b = 0.0, sum_b2 = 0.0;
  long positives = 0;
  EmpiricalPolicyCounts counts(scenario);
  for (const EpisodeSummary& e : episodes) {
    const double loss = -e.discounted_return;
    sum_loss += loss;
    sum_loss2 += loss * loss;
    if (e.intent == Intent::Adversary) {
      ++positives;
      sum_b += e.final_belief;
      sum_b2 += e.final_belief * e.final_belief;
      for (const auto& r : e.reactions) {
        counts.add(r[0], r[1], agent_action_at(static_cast<std::size_t>(r[2])),
                   opponent_action_at(static_cast<std::size_t>(r[3])));
      }
    }
  }
  auto stderr_of = [](double sum, double sum2, long n) {
    if (n < 2) return 0.0;
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, (sum2 - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
  };
  row.clap_mean = sum_loss / static_cast<double>(row.episodes);
  row.clap_stderr = stderr_of(sum_loss, sum_loss2, row.episodes);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (positives > 0) {
    row.tpr_mean = sum_b / static_cast<double>(positives);
    row.tpr_stderr = stderr_of(sum_b, sum_b2, positives);
    row.u_p = policy_uncertainty_index(counts, nominal);
  } else {
    row.tpr_mean = row.tpr_stderr = row.u_p = nan;
  }
  return row;
}

inline MetricsRow evaluate(const Agent& agent, const AdversarySpec& spec, const BeliefFilter& filter,
                           const EvaluationOptions& opt) {
  const auto episodes = simulate_episodes(agent, spec, filter, opt);
  MetricsRow row = summarize(episodes, opt.scenario, nominal_adversary(filter.shared_model(), opt.nominal));
  row.agent = agent.label;
  row.adversary = spec.name();
  row.param_name = spec.param_name();
  row.param_value = spec.param_value();
  row.seeds = opt.seeds;
  return row;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class SweepMode { Eta, BThre };

struct SweepOptions {
  EvaluationOptions evaluation;
  SoftQConfig adversary_learner;
  std::size_t adversary_seeds = 10;
  double eta_step = 0.25;
  double eta_max = 5.0;
  double bthre_step = 0.025;
  double bthre_max = 0.5;
  std::uint64_t base_seed = 0;
};

/// 0, step, 2 step, ..., max with values rounded to 1e-12.
inline std::vector<double> sweep_grid(double step, double max) {
  if (!(step > 0.0) || !(max >= 0.0)) throw std::invalid_argument("sweep_grid: step must be positive");
  const long n = std::lround(max / step);
  std::vector<double> grid;
  for (long k = 0; k <= n; ++k) grid.push_back(std::round(static_cast<double>(k) * step * 1e12) / 1e12);
  return grid;
}

/// Called after each grid point with (index, value).
using SweepProgress = std::function<void(std::size_t, double)>;

inline std::vector<MetricsRow> sweep(const Agent& agent, SweepMode mode, const BeliefFilter& filter,
                                     const SweepOptions& opt, const SweepProgress& progress = {}) {
  const NominalPolicy nominal = nominal_adversary(filter.shared_model(), opt.evaluation.nominal);
  std::vector<MetricsRow> rows;
  if (mode == SweepMode::BThre) {
    const auto grid = sweep_grid(opt.bthre_step, opt.bthre_max);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      rows.push_back(evaluate(agent, AdversarySpec::deceptive_threshold(grid[g]), filter, opt.evaluation));
      if (progress) progress(g, grid[g]);
    }
    return rows;
  }

  const auto grid = sweep_grid(opt.eta_step, opt.eta_max);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double eta = grid[g];
    std::vector<EpisodeSummary> pooled;
    for (std::size_t k = 0; k < opt.adversary_seeds; ++k) {
      const std::uint64_t seed = derive_seed(derive_seed(opt.base_seed, g), k);
      auto adversary = std::make_shared<const LearningAdversary>(train_learning_adversary(
          opt.evaluation.scenario, filter, agent.policy, eta, opt.adversary_learner, seed));
      auto part = simulate_episodes(agent, AdversarySpec::learned(std::move(adversary)), filter, opt.evaluation);
      pooled.insert(pooled.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    MetricsRow row = summarize(pooled, opt.evaluation.scenario, nominal);
    row.agent = agent.label;
    row.adversary = "learning";
    row.param_name = "eta";
    row.param_value = eta;
    row.seeds = opt.evaluation.seeds;
    rows.push_back(std::move(row));
    if (progress) progress(g, eta);
  }
  return rows;
}

}  // namespace apsim
