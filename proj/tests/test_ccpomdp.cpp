#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "apsim/ccpomdp.hpp"
#include "oracles.hpp"

using namespace apsim;

namespace {

const BeliefFilter& filter() {
  static const BeliefFilter f(std::make_shared<const OpponentModel>());
  return f;
}

void expect_matches_nominal(const UncertaintyModel& um) {
  const Scenario s;
  const int n = 101;
  const BeliefGrid grid = solve_ccpomdp({s, um, {}}, filter(), n);
  const oracle::NominalDp dp(s, filter().model(), n);
  double worst = 0.0;
  for (int t = 0; t < s.horizon; ++t) {
    for (int d = s.start_distance - t; d <= s.start_distance; ++d) {
      for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(grid.value(t, d, i) - dp.value(t, d, i)));
    }
  }
  EXPECT_LT(worst, 1e-9);
}

}  // namespace

TEST(ChanceTerms, QuantileValues) {
  EXPECT_NEAR((UncertaintyModel{0.001, 0.05}.z()), 1.6448536269514722, 1e-12);
  EXPECT_NEAR((UncertaintyModel{0.001, 0.5}.z()), 0.0, 1e-15);
  EXPECT_THROW((UncertaintyModel{0.001, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((UncertaintyModel{-1.0, 0.05}.validate()), std::invalid_argument);
}

TEST(ChanceTerms, DegenerateThresholds) {
  const Scenario s;
  const ValueLookup v = [](int d, double b) { return -0.1 * d - b; };
  const auto zero_var = chance_terms({s, {0.0, 0.05}, {}}, filter(), 0.4, 11, AgentAction::Hand, v);
  EXPECT_EQ(zero_var.threshold, zero_var.mean);
  const auto median = chance_terms({s, {0.001, 0.5}, {}}, filter(), 0.4, 11, AgentAction::Hand, v);
  EXPECT_NEAR(median.threshold, median.mean, 1e-15);
  const auto cc = chance_terms({s, {0.001, 0.05}, {}}, filter(), 0.4, 11, AgentAction::Hand, v);
  EXPECT_GT(cc.stddev, 0.0);
  EXPECT_NEAR(cc.threshold, cc.mean - 1.6448536269514722 * cc.stddev, 1e-14);
}

TEST(ChanceTerms, MonteCarloCoverage) {
  const Scenario s;
  const CcProblem p{s, {0.001, 0.05}, {}};
  const BeliefGrid grid = solve_ccpomdp(p, filter(), 201);
  Rng rng(31);
  const int draws = 1'000'000;
  for (int k = 0; k < 20; ++k) {
    const int t = static_cast<int>(rng.below(s.horizon - 1));
    const int d = s.start_distance - static_cast<int>(rng.below(t + 1));
    const double b = rng.uniform(0.02, 0.98);
    const AgentAction a = agent_action_at(rng.below(3));
    const ValueLookup v = [&](int dd, double bb) { return grid.interpolate_value(t + 1, dd, bb); };
    const ChanceTerms ct = chance_terms(p, filter(), b, d, a, v);
    long below = 0;
    for (int i = 0; i < draws; ++i) below += sample_successor_value(p, filter(), b, d, a, ct, rng) < ct.threshold;
    const double rate = static_cast<double>(below) / draws;
    const double se = std::sqrt(0.05 * 0.95 / draws);
    EXPECT_NEAR(rate, 0.05, 3 * se) << "t=" << t << " d=" << d << " b=" << b;
  }
}

TEST(Solver, DegenerateEquivalenceZeroVariance) { expect_matches_nominal({0.0, 0.05}); }

TEST(Solver, DegenerateEquivalenceMedian) { expect_matches_nominal({0.001, 0.5}); }

TEST(Solver, ZeroRewardsGiveZeroValueAndHand) {
  const Scenario s;
  const BeliefGrid grid = solve_ccpomdp({s, {}, {false, false}}, filter(), 21);
  for (int t = 0; t < s.horizon; ++t) {
    for (int d = s.start_distance - t; d <= s.start_distance; ++d) {
      for (std::size_t i = 0; i < 21; ++i) {
        EXPECT_EQ(grid.value(t, d, i), 0.0);
        EXPECT_EQ(grid.action(t, d, i), AgentAction::Hand);
      }
    }
  }
}

TEST(Solver, LastRoundIsOneStepOptimum) {
  const Scenario s;
  const BeliefGrid grid = solve_ccpomdp({s, {}, {}}, filter(), 51);
  for (int d = s.start_distance - 9; d <= s.start_distance; ++d) {
    for (std::size_t i = 0; i < 51; ++i) {
      double best = -1e300;
      for (AgentAction a : kAgentActions) {
        best = std::max(best, lookahead(s, filter(), grid.lattice().point(i), d, a).expected_reward);
      }
      EXPECT_EQ(grid.value(9, d, i), best);
    }
  }
}

TEST(Solver, GridSelfConvergence) {
  const Scenario s;
  const BeliefGrid coarse = solve_ccpomdp({s, {}, {}}, filter(), 201);
  const BeliefGrid fine = solve_ccpomdp({s, {}, {}}, filter(), 801);
  EXPECT_NEAR(coarse.value(0, 12, 100), fine.value(0, 12, 400), 1e-3);
}

TEST(Solver, RejectsInfeasibleStates) {
  const Scenario s;
  const ValueLookup v = [](int, double) { return 0.0; };
  EXPECT_THROW(cc_backup({s, {}, {}}, filter(), 0.5, 5, 0, v), std::out_of_range);
  const BeliefGrid grid = solve_ccpomdp({s, {}, {}}, filter(), 11);
  EXPECT_THROW(cc_policy(grid, 0.5, 5, 0), std::out_of_range);
  EXPECT_THROW(cc_policy(grid, 0.5, 12, 10), std::out_of_range);
}

TEST(Policy, GridPointQueriesReturnStoredAction) {
  const Scenario s;
  const BeliefGrid grid = solve_ccpomdp({s, {}, {}}, filter(), 201);
  for (int t = 0; t < s.horizon; ++t) {
    for (int d = s.start_distance - t; d <= s.start_distance; ++d) {
      for (std::size_t i = 0; i < 201; ++i) {
        ASSERT_EQ(cc_policy(grid, grid.lattice().point(i), d, t), grid.action(t, d, i));
      }
    }
  }
}

TEST(Policy, FlareUsageIsRecorded) {
  // The nominal optimum is expected to favour Hand and Loudspeaker; the share
  // of Flare cells is reported rather than asserted.
  const Scenario s;
  const BeliefGrid grid = solve_ccpomdp({s, {0.0, 0.05}, {}}, filter(), 201);
  long flare = 0, cells = 0;
  for (int t = 0; t < s.horizon; ++t) {
    for (int d = s.start_distance - t; d <= s.start_distance; ++d) {
      for (std::size_t i = 0; i < 201; ++i, ++cells) flare += grid.action(t, d, i) == AgentAction::Flare;
    }
  }
  RecordProperty("flare_cells", static_cast<int>(flare));
  RecordProperty("total_cells", static_cast<int>(cells));
  SUCCEED();
}

TEST(Policy, MonteCarloReturnMatchesGridValue) {
  const Scenario s;
  auto grid = std::make_shared<const BeliefGrid>(solve_ccpomdp({s, {0.0, 0.05}, {}}, filter(), 201));
  const auto agent = cc_agent_policy(grid);
  const auto adversary = averaged_opponent(filter().shared_model());
  Rng rng(12);
  const int episodes = 200000;
  double sum = 0.0;
  for (int k = 0; k < episodes; ++k) {
    const Intent intent = rng.bernoulli(s.prior) ? Intent::Adversary : Intent::Neutral;
    const auto& opp = intent == Intent::Adversary ? adversary : neutral_opponent();
    sum += run_episode(s, filter(), agent, opp, intent, rng.next()).discounted_return;
  }
  EXPECT_NEAR(sum / episodes, grid->interpolate_value(0, 12, s.prior), 0.02);
}
