#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "sgame/equilibrium.hpp"
#include "test_support.hpp"

using namespace sgame;
using namespace sgame::testing;

namespace {

constexpr StateIndex kNormal = 0, kAttack = 1;
constexpr ActionIndex kAb = 0, kAm = 1;
constexpr ReactionIndex kRb = 0, kRm = 1;

Scenario one_step(Scenario s) {
  s.horizon = 1;
  return s;
}

Scenario with_concept(Scenario s, SolutionConcept c) {
  s.solution_concept = c;
  return s;
}

/// First near-argmax receiver branch against a fixed sender pair.
std::pair<std::size_t, double> receiver_best_response(
    const Scenario& s, const StrategySets& sets, const Branch& b,
    const Branch& m, BeliefState pi, StateIndex x) {
  std::size_t best = 0;
  double best_v = -INFINITY;
  for (std::size_t i = 0; i < sets.receiver.size(); ++i) {
    const StrategyTree p{s.horizon, s.num_states(), b, m, sets.receiver[i]};
    const double v = expected_utilities(s, p, pi, x).receiver;
    if (v > best_v + kArgmaxTolerance) best = i, best_v = v;
  }
  return {best, best_v};
}

/// Re-evaluates every unilateral deviation of the returned profile through
/// expected_utilities and checks none gains more than 1e-12.
void verify_best_responses(const Scenario& s, const EquilibriumResult& eq,
                           BeliefState pi, StateIndex x) {
  const auto sets = enumerate_strategy_trees(s.alphabets, s.horizon);
  const auto& p = eq.profile;
  const auto base = expected_utilities(s, p, pi, x);
  EXPECT_NEAR(base.sender_benign, eq.sender_value_b, 1e-15);
  EXPECT_NEAR(base.sender_malicious, eq.sender_value_m, 1e-15);
  EXPECT_NEAR(base.receiver, eq.receiver_value, 1e-15);

  for (const auto& r : sets.receiver) {
    const StrategyTree dev{p.depth, p.num_states, p.benign, p.malicious, r};
    ASSERT_LE(expected_utilities(s, dev, pi, x).receiver, base.receiver + 1e-12);
  }
  for (const auto& alt : sets.sender) {
    StrategyTree dev_b = p, dev_m = p;
    dev_b.benign = alt;
    dev_m.malicious = alt;
    if (s.solution_concept == SolutionConcept::kSignaling) {
      // The receiver re-optimizes against the deviating sender profile.
      dev_b.receiver =
          sets.receiver[receiver_best_response(s, sets, alt, p.malicious, pi, x).first];
      dev_m.receiver =
          sets.receiver[receiver_best_response(s, sets, p.benign, alt, pi, x).first];
    }
    ASSERT_LE(expected_utilities(s, dev_b, pi, x).sender_benign,
              base.sender_benign + 1e-12);
    ASSERT_LE(expected_utilities(s, dev_m, pi, x).sender_malicious,
              base.sender_malicious + 1e-12);
  }
}

}  // namespace

TEST(ExpectedUtilities, OneStepTableValues) {
  const auto s = one_step(table1_scenario());
  for (ReactionIndex r : {kRb, kRm}) {
    const auto p = uniform_profile(2, 1, kAb, kAm, r);
    EXPECT_DOUBLE_EQ(
        expected_utilities(s, p, BeliefState(0.3), kNormal).sender_benign, 1.0);
  }
  const auto p = uniform_profile(2, 1, kAb, kAm, kRb);
  EXPECT_DOUBLE_EQ(
      expected_utilities(s, p, BeliefState(0.3), kAttack).sender_malicious, 2.0);
  for (double pi : {0.0, 0.1, 0.25, 0.5, 0.9, 1.0})
    EXPECT_NEAR(expected_utilities(s, p, BeliefState(pi), kNormal).receiver,
                1.0 - pi, 1e-15);
}

TEST(ExpectedUtilities, RejectsDepthMismatch) {
  const auto s = table1_scenario();
  EXPECT_THROW(expected_utilities(s, uniform_profile(2, 1, 0, 0, 0),
                                  BeliefState(0.1), kNormal),
               std::invalid_argument);
}

// Every T = 2 joint profile at several beliefs and both roots, against exact
// rational enumeration of the state prefixes.
TEST(ExpectedUtilities, MatchesRationalOracleAllDepthTwoProfiles) {
  const auto s = table1_scenario();
  const auto sets = enumerate_strategy_trees(s.alphabets, 2);
  for (int i : {0, 2, 5, 7, 13, 20})
    for (StateIndex x : {kNormal, kAttack})
      for (const auto& b : sets.sender)
        for (const auto& m : sets.sender)
          for (const auto& r : sets.receiver) {
            const StrategyTree p{2, 2, b, m, r};
            const Rational pi = grid(i, 20);
            const auto v = expected_utilities(s, p, BeliefState(to_double(pi)), x);
            const auto o = oracle_window(s, p, pi, x);
            ASSERT_NEAR(v.sender_benign, to_double(o.sender_benign), 1e-12);
            ASSERT_NEAR(v.sender_malicious, to_double(o.sender_malicious), 1e-12);
            ASSERT_NEAR(v.receiver, to_double(o.receiver), 1e-12);
          }
}

// A worked T = 2 value: separating root (a_b, a_m), r_b everywhere, x_n.
TEST(ExpectedUtilities, SeparatingDepthTwoWorkedValue) {
  const auto s = table1_scenario();
  const auto p = uniform_profile(2, 2, kAb, kAm, kRb);
  const auto v = expected_utilities(s, p, BeliefState(0.1), kNormal);
  EXPECT_NEAR(v.sender_benign, (1 + 0.9) / 2, 1e-15);
  EXPECT_NEAR(v.sender_malicious, (1 + 0.8 * 1 + 0.2 * 2) / 2, 1e-15);
  // Receiver: root 0.9; after x_n the belief is 8/89, after x_a it is 2/11.
  const double next_n = 8.0 / 89, next_a = 2.0 / 11;
  EXPECT_NEAR(v.receiver,
              (0.9 + 0.9 * (1 - next_n) + 0.1 * (1 - next_a)) / 2, 1e-15);
}

// Constant unit utilities expose the path-weight total: it must be 1 per
// type at every depth, so each window value is exactly 1.
TEST(ExpectedUtilities, PathWeightsSumToOne) {
  std::mt19937_64 rng(17);
  for (int horizon = 1; horizon <= 3; ++horizon) {
    auto s = table4_scenario();
    s.horizon = horizon;
    for (SenderType t : {SenderType::kBenign, SenderType::kMalicious})
      for (StateIndex x = 0; x < 2; ++x)
        for (ActionIndex a = 0; a < 2; ++a)
          for (ReactionIndex r = 0; r < 2; ++r)
            s.utilities.set_sender(t, x, a, r, 1.0);
    const TreeShape shape(2, horizon);
    for (int trial = 0; trial < 200; ++trial) {
      StrategyTree p{horizon, 2, Branch(shape.node_count()),
                     Branch(shape.node_count()), Branch(shape.node_count())};
      for (std::size_t i = 0; i < shape.node_count(); ++i) {
        p.benign[i] = rng() % 2;
        p.malicious[i] = rng() % 2;
        p.receiver[i] = rng() % 2;
      }
      const auto v = expected_utilities(s, p, BeliefState((rng() % 101) / 100.0),
                                        rng() % 2);
      ASSERT_NEAR(v.sender_benign, 1.0, 1e-12);
      ASSERT_NEAR(v.sender_malicious, 1.0, 1e-12);
    }
  }
}

TEST(SolveBne, SmallBeliefSeparates) {
  const auto eq = solve_bne(table1_scenario(), BeliefState(0.1), kNormal);
  EXPECT_EQ(eq.root_action(SenderType::kMalicious), kAm);
  EXPECT_EQ(eq.root_action(SenderType::kBenign), kAb);
  EXPECT_EQ(eq.root_reaction(), kRb);
  EXPECT_GE(eq.multiplicity, 1u);
}

TEST(SolveBne, LargeBeliefMaliciousMimicsAtNormal) {
  const auto eq = solve_bne(table1_scenario(), BeliefState(0.35), kNormal);
  EXPECT_EQ(eq.root_action(SenderType::kMalicious), kAb);
  EXPECT_EQ(eq.root_reaction(), kRb);
}

TEST(SolveBne, BeliefNearOnePoolsEverywhere) {
  for (StateIndex x : {kNormal, kAttack}) {
    const auto eq = solve_bne(table1_scenario(), BeliefState(0.99), x);
    EXPECT_EQ(eq.root_action(SenderType::kBenign), kAb);
    EXPECT_EQ(eq.root_action(SenderType::kMalicious), kAb);
  }
}

TEST(SolveBne, ReactionSwitchesAtOneHalf) {
  for (StateIndex x : {kNormal, kAttack}) {
    for (double pi : {0.05, 0.2, 0.3, 0.45, 0.49})
      EXPECT_EQ(solve_bne(table1_scenario(), BeliefState(pi), x).root_reaction(), kRb)
          << pi;
    for (double pi : {0.51, 0.6, 0.8, 1.0})
      EXPECT_EQ(solve_bne(table1_scenario(), BeliefState(pi), x).root_reaction(), kRm)
          << pi;
  }
}

// Below the receiver's switch at 1/2 the malicious type attacks only while
// the belief is small: up to 0.2 at x_n and up to about 0.3077 at x_a.
TEST(SolveBne, MaliciousSwitchingThresholds) {
  const auto s = table1_scenario();
  const double threshold[2] = {0.2, 0.3077};
  for (StateIndex x : {kNormal, kAttack})
    for (int i = 0; i <= 500; ++i) {
      const double pi = i / 1000.0;
      if (std::abs(pi - threshold[x]) < 0.002) continue;
      EXPECT_EQ(solve_bne(s, BeliefState(pi), x).root_action(SenderType::kMalicious),
                pi < threshold[x] ? kAm : kAb)
          << "x=" << x << " pi=" << pi;
    }
}

TEST(SolveBne, NashConceptExamples) {
  const auto s = with_concept(table1_scenario(), SolutionConcept::kNash);
  const auto eq = solve_bne(s, BeliefState(0.1), kNormal);
  EXPECT_EQ(eq.solution_concept, SolutionConcept::kNash);
  EXPECT_EQ(eq.root_action(SenderType::kMalicious), kAm);
  EXPECT_EQ(eq.root_reaction(), kRb);
  EXPECT_EQ(solve_bne(s, BeliefState(0.9), kAttack).root_reaction(), kRm);
}

TEST(SolveBne, NashConceptReportsBestResponseCycle) {
  const auto s = with_concept(table1_scenario(), SolutionConcept::kNash);
  try {
    solve_bne(s, BeliefState(0.3), kNormal);
    FAIL() << "expected NoPureEquilibrium";
  } catch (const NoPureEquilibrium& e) {
    ASSERT_GE(e.cycle().size(), 2u);
    EXPECT_NE(std::string(e.what()).find("no pure BNE"), std::string::npos);
    const std::set<JointIndex> unique(e.cycle().begin(), e.cycle().end());
    EXPECT_EQ(unique.size(), e.cycle().size());
  }
}

TEST(SolveBne, GuardPropagates) {
  auto s = table1_scenario();
  s.horizon = 4;
  EXPECT_THROW(solve_bne(s, BeliefState(0.1), kNormal), CombinatorialLimitError);
}

TEST(SolveBne, BestResponseVerificationTableOne) {
  for (auto c : {SolutionConcept::kSignaling, SolutionConcept::kNash}) {
    const auto s = with_concept(table1_scenario(), c);
    for (int i = 0; i <= 20; ++i)
      for (StateIndex x : {kNormal, kAttack}) {
        const BeliefState pi(i / 20.0);
        try {
          verify_best_responses(s, solve_bne(s, pi, x), pi, x);
        } catch (const NoPureEquilibrium&) {
          ASSERT_EQ(c, SolutionConcept::kNash);
        }
      }
  }
}

TEST(SolveBne, BestResponseVerificationRandomGames) {
  std::mt19937_64 rng(2718);
  for (int trial = 0; trial < 40; ++trial) {
    for (auto c : {SolutionConcept::kSignaling, SolutionConcept::kNash}) {
      auto s = with_concept(random_binary_game(rng, 2, trial % 2 ? 3 : 0), c);
      const BeliefState pi((rng() % 1001) / 1000.0);
      const StateIndex x = rng() % 2;
      try {
        verify_best_responses(s, solve_bne(s, pi, x), pi, x);
      } catch (const NoPureEquilibrium&) {
      }
    }
  }
}

TEST(SolveBne, OneStepMatchesBruteForce) {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 200; ++trial) {
    for (auto c : {SolutionConcept::kSignaling, SolutionConcept::kNash}) {
      const auto s = with_concept(random_binary_game(rng, 1, trial % 3 ? 0 : 2), c);
      const double pi = (rng() % 1001) / 1000.0;
      const StateIndex x = rng() % 2;
      const auto expected = brute_force_one_step(s, pi, x, c);
      if (expected.empty()) {
        EXPECT_THROW(solve_bne(s, BeliefState(pi), x), NoPureEquilibrium);
        continue;
      }
      const auto eq = solve_bne(s, BeliefState(pi), x);
      EXPECT_EQ(eq.multiplicity, expected.size());
      const JointChoice got{eq.root_action(SenderType::kBenign),
                            eq.root_action(SenderType::kMalicious),
                            eq.root_reaction()};
      EXPECT_EQ(got, expected.front()) << "trial " << trial;
    }
  }
}

// Shifting one type's sender utilities by a constant shifts its window value
// by the same constant and leaves the selected profile unchanged.
TEST(SolveBne, SenderUtilityShiftInvariance) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto base = random_binary_game(rng, 2, trial % 2 ? 4 : 0);
    for (SenderType t : {SenderType::kBenign, SenderType::kMalicious}) {
      auto shifted = base;
      const double c = trial % 3 == 0 ? -5.0 : 3.25;
      for (StateIndex x = 0; x < 2; ++x)
        for (ActionIndex a = 0; a < 2; ++a)
          for (ReactionIndex r = 0; r < 2; ++r)
            shifted.utilities.set_sender(t, x, a, r,
                                         base.utilities.sender(t, x, a, r) + c);
      const BeliefState pi((rng() % 101) / 100.0);
      const StateIndex x = rng() % 2;
      std::optional<EquilibriumResult> a;
      try {
        a = solve_bne(base, pi, x);
      } catch (const NoPureEquilibrium&) {
        EXPECT_THROW(solve_bne(shifted, pi, x), NoPureEquilibrium);
        continue;
      }
      const auto b = solve_bne(shifted, pi, x);
      EXPECT_EQ(a->root_action(SenderType::kBenign), b.root_action(SenderType::kBenign));
      EXPECT_EQ(a->root_action(SenderType::kMalicious),
                b.root_action(SenderType::kMalicious));
      EXPECT_EQ(a->root_reaction(), b.root_reaction());
      EXPECT_NEAR(b.sender_value(t) - a->sender_value(t), c, 1e-12);
    }
  }
}

TEST(SolveBne, IndependentOfThreadCount) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = random_binary_game(rng, 3, 3);
    const BeliefState pi((rng() % 101) / 100.0);
    const StateIndex x = rng() % 2;
    std::optional<EquilibriumResult> serial, parallel;
    try {
      serial = solve_bne(s, pi, x, {1});
      parallel = solve_bne(s, pi, x, {4});
    } catch (const NoPureEquilibrium&) {
      EXPECT_THROW(solve_bne(s, pi, x, {4}), NoPureEquilibrium);
      continue;
    }
    EXPECT_EQ(serial->index, parallel->index);
    EXPECT_EQ(serial->profile, parallel->profile);
    EXPECT_EQ(serial->multiplicity, parallel->multiplicity);
    EXPECT_EQ(serial->sender_value_m, parallel->sender_value_m);
  }
}

TEST(RecedingHorizonPolicy, RootDecisions) {
  const RecedingHorizonPolicy policy(table1_scenario());
  EXPECT_EQ(policy.decide(BeliefState(0.1), kNormal), (RootDecision{kAb, kAm, kRb}));
  EXPECT_EQ(policy.decide(BeliefState(0.99), kAttack), (RootDecision{kAb, kAb, kRm}));
}

TEST(RecedingHorizonPolicy, CacheIsDeterministicAndKeyedExactly) {
  const RecedingHorizonPolicy policy(table1_scenario());
  const auto first = policy.solve(BeliefState(0.1), kNormal);
  const auto again = policy.solve(BeliefState(0.1), kNormal);
  EXPECT_EQ(first.get(), again.get());
  EXPECT_EQ(policy.cache_size(), 1u);
  policy.solve(BeliefState(std::nextafter(0.1, 1.0)), kNormal);
  policy.solve(BeliefState(0.1), kAttack);
  EXPECT_EQ(policy.cache_size(), 3u);
}

TEST(RecedingHorizonPolicy, ConcurrentQueriesAgree) {
  const RecedingHorizonPolicy policy(table1_scenario());
  std::vector<std::vector<RootDecision>> seen(4);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&, t] {
      for (int i = 0; i <= 40; ++i)
        seen[t].push_back(policy.decide(BeliefState(i / 40.0), i % 2));
    });
  for (auto& th : pool) th.join();
  for (int t = 1; t < 4; ++t) EXPECT_EQ(seen[t], seen[0]);
  EXPECT_EQ(policy.cache_size(), 41u);
}

TEST(RecedingHorizonPolicy, RejectsInvalidScenario) {
  auto s = table1_scenario();
  s.prior_m = -1;
  EXPECT_THROW(RecedingHorizonPolicy{s}, std::invalid_argument);
}
