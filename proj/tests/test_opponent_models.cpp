#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "apsim/opponent_models.hpp"
#include "oracles.hpp"

using namespace apsim;

using oracle::blend_objective;
using oracle::horizon_dp;

TEST(NeutralPolicy, TableValues) {
  EXPECT_EQ(neutral_policy(AgentAction::Flare)[0], 0.90);
  EXPECT_EQ(neutral_policy(AgentAction::Flare)[1], 0.10);
  EXPECT_EQ(neutral_policy(AgentAction::Hand)[0], 0.60);
  EXPECT_EQ(neutral_policy(AgentAction::Hand)[1], 0.40);
  EXPECT_EQ(neutral_policy(AgentAction::Loudspeaker)[0], 0.75);
  EXPECT_EQ(neutral_policy(AgentAction::Loudspeaker)[1], 0.25);
}

TEST(AdversaryReward, Values) {
  EXPECT_EQ(adversary_mdp_reward(12, 12), 0.0);
  EXPECT_NEAR(adversary_mdp_reward(12, 10), 0.21, 1e-14);
  EXPECT_NEAR(adversary_mdp_reward(12, 2), std::pow(1.1, 10) - 1.0, 1e-14);
  EXPECT_THROW(adversary_mdp_reward(12, 13), std::out_of_range);
  EXPECT_THROW(adversary_mdp_reward(12, -1), std::out_of_range);
}

TEST(AdversaryQ, MatchesLongHorizonDp) {
  const AdversaryQTable q = solve_adversary_q(0.95, 1e-10);
  const auto oracle = horizon_dp(12, 0.95, 500);
  for (int d = 0; d <= 12; ++d) {
    EXPECT_NEAR(q(d, OpponentAction::Stay), oracle[d][0], 1e-8);
    EXPECT_NEAR(q(d, OpponentAction::Proceed), oracle[d][1], 1e-8);
  }
  for (int d = 1; d <= 12; ++d) EXPECT_GT(oracle[d][1], oracle[d][0]) << "d=" << d;
  for (int d = 1; d <= 12; ++d) EXPECT_GT(q(d, OpponentAction::Proceed), q(d, OpponentAction::Stay));
}

TEST(AdversaryQ, AbsorbingClosedForm) {
  const AdversaryQTable q = solve_adversary_q(0.95, 1e-10);
  const double expected = (std::pow(1.1, 12) - 1.0) / 0.05;
  EXPECT_NEAR(q(0, OpponentAction::Stay), expected, 1e-7);
  EXPECT_NEAR(q(0, OpponentAction::Stay), 42.76856753442006, 1e-7);
  ASSERT_FALSE(q.residuals.empty());
  EXPECT_LT(q.residuals.back(), 1e-10);
}

TEST(AdversaryQ, RejectsBadArguments) {
  EXPECT_THROW(solve_adversary_q(1.0, 1e-10), std::invalid_argument);
  EXPECT_THROW(solve_adversary_q(0.95, 0.0), std::invalid_argument);
}

TEST(SoftRationalPolicy, EqualAndLimitCases) {
  const AdversaryQTable flat(std::vector<std::array<double, 2>>(13, {3.0, 3.0}));
  const auto p = soft_rational_policy(flat, 1.0, 4);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  const AdversaryQTable q = solve_adversary_q(0.95, 1e-10);
  const auto tiny = soft_rational_policy(q, 1e-12, 12);
  EXPECT_NEAR(tiny[0], 0.5, 1e-9);
  EXPECT_THROW(soft_rational_policy(q, 0.0, 3), std::invalid_argument);
}

TEST(SoftRationalPolicy, FavoursProceedAtSix) {
  const AdversaryQTable q = solve_adversary_q(0.95, 1e-10);
  const auto oracle = horizon_dp(12, 0.95, 500);
  const double gap = oracle[6][1] - oracle[6][0];
  const double proceed = 1.0 / (1.0 + std::exp(-gap));
  const auto p = soft_rational_policy(q, 1.0, 6);
  EXPECT_GT(p[1], p[0]);
  EXPECT_NEAR(p[1], proceed, 1e-8);
  EXPECT_NEAR(p[1], 0.76673003, 1e-7);
}

TEST(KlBlend, DegenerateCases) {
  const OpponentDistribution p{{0.3, 0.7}}, n{{0.9, 0.1}};
  const auto b0 = kl_blend(p, n, 0.0);
  EXPECT_NEAR(b0[0], 0.3, 1e-15);
  const auto same = kl_blend(p, p, 1.7);
  EXPECT_NEAR(same[0], 0.3, 1e-15);
  EXPECT_THROW(kl_blend(p, n, -0.1), std::invalid_argument);
  EXPECT_THROW(kl_blend(OpponentDistribution::one_hot(0), n, 1.0), std::invalid_argument);
}

TEST(KlBlend, GridMinimizerExample) {
  double best = 0.0, best_val = 1e300;
  for (int k = 1; k < 10000; ++k) {
    const double x = k * 1e-4;
    const double v = blend_objective(x, 0.8, 0.5, 1.0);
    if (v < best_val) best_val = v, best = x;
  }
  EXPECT_NEAR(best, 0.6667, 1e-12);
  const auto b = kl_blend<2>({{0.8, 0.2}}, {{0.5, 0.5}}, 1.0);
  EXPECT_NEAR(b[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(b[0], best, 1e-4);
}

TEST(KlBlend, MatchesNumericMinimizationOnRandomInstances) {
  Rng rng(2024);
  for (int k = 0; k < 150; ++k) {
    const double g = rng.uniform(0.01, 0.99);
    const double n = rng.uniform(0.01, 0.99);
    const double beta = rng.uniform(0.0, 5.0);
    const double x = oracle::blend_minimizer(g, n, beta);
    const auto closed = kl_blend<2>({{g, 1 - g}}, {{n, 1 - n}}, beta);
    EXPECT_NEAR(closed[0], x, 1e-6) << g << " " << n << " " << beta;
  }
}

TEST(AdversaryPolicy, ComposesComponents) {
  const OpponentModel model;
  const auto goal = soft_rational_policy(model.q_table(), 1.5, 6);
  const auto neu = neutral_policy(AgentAction::Flare);
  const double ws = std::pow(goal[0], 0.4) * std::pow(neu[0], 0.6);
  const double wp = std::pow(goal[1], 0.4) * std::pow(neu[1], 0.6);
  const auto p = model.adversary_policy(6, AgentAction::Flare, {1.5, 1.5});
  EXPECT_NEAR(p[0], ws / (ws + wp), 1e-12);
  EXPECT_THROW(model.adversary_policy(6, AgentAction::Flare, {0.5, 1.5}), std::invalid_argument);
}

TEST(AdversaryPolicy, BetaMovesTowardNeutral) {
  const OpponentModel model;
  for (AgentAction a : kAgentActions) {
    for (int d = 0; d <= 12; ++d) {
      for (double alpha : {1.0, 1.5, 2.0}) {
        double prev = 1e300;
        for (double beta : {1.0, 1.5, 2.0}) {
          const double tv = total_variation(model.adversary_policy(d, a, {alpha, beta}), neutral_policy(a));
          EXPECT_LE(tv, prev + 1e-15);
          prev = tv;
        }
      }
    }
  }
}

TEST(AveragedModel, QuadratureSelfConvergence) {
  const OpponentModel model;
  for (int d = 0; d <= 12; ++d) {
    for (AgentAction a : kAgentActions) {
      const auto coarse = model.averaged_adversary_policy(d, a);
      const auto fine = model.integrate(d, a, 32);
      EXPECT_NEAR(coarse[0], fine[0], 1e-3);
      EXPECT_TRUE(coarse.full_support());
      EXPECT_TRUE(coarse.is_valid(1e-12));
    }
  }
  EXPECT_THROW(model.averaged_adversary_policy(13, AgentAction::Hand), std::out_of_range);
}

TEST(AveragedModel, ConstantIntegrandIsReproduced) {
  // Weights of the rule on [1, 2]^2 sum to one, so a constant integrand is exact.
  const auto rule = gauss_legendre(8, 1.0, 2.0);
  double mass = 0.0;
  for (double wi : rule.weights) {
    for (double wj : rule.weights) mass += wi * wj;
  }
  EXPECT_NEAR(mass, 1.0, 1e-14);
}

TEST(HyperPrior, SampleStatistics) {
  Rng rng(99);
  const int n = 100000;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int i = 0; i < n; ++i) {
    const auto p = sample_adversary_params(rng);
    ASSERT_TRUE(p.in_support());
    sa += p.alpha, sb += p.beta, saa += p.alpha * p.alpha, sbb += p.beta * p.beta, sab += p.alpha * p.beta;
  }
  const double ma = sa / n, mb = sb / n;
  EXPECT_NEAR(ma, 1.5, 0.01);
  EXPECT_NEAR(mb, 1.5, 0.01);
  const double corr = (sab / n - ma * mb) / std::sqrt((saa / n - ma * ma) * (sbb / n - mb * mb));
  EXPECT_NEAR(corr, 0.0, 0.02);
}
