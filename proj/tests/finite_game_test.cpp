#include <cmath>

#include <gtest/gtest.h>

#include "hmmcd/corpus.hpp"
#include "hmmcd/finite_game.hpp"

using namespace hmmcd;

namespace {

DiscreteModel sample_model() {
  DiscreteModel m;
  m.pre_obs = {0.5, 0.3, 0.2};
  m.post_obs = {{0.1, 0.3, 0.6}, {0.6, 0.3, 0.1}, {0.2, 0.7, 0.1}};
  m.pre_trans = {{0.6, 0.3, 0.1}, {0.3, 0.6, 0.1}, {0.1, 0.1, 0.8}};
  m.post_trans = m.pre_trans;
  m.stationary = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  return m;
}

}  // namespace

TEST(StoppingRules, CountsMatchRecursion) {
  EXPECT_EQ(count_stopping_rules(2, 1, 1000), 2u);
  EXPECT_EQ(count_stopping_rules(2, 2, 1000), 5u);
  EXPECT_EQ(count_stopping_rules(2, 3, 1000), 26u);
  EXPECT_EQ(count_stopping_rules(4, 3, 10000000), 83522u);
  EXPECT_EQ(count_stopping_rules(9, 3, 1000), 1001u);
}

TEST(FiniteGame, EnumeratedRulesMatchCount) {
  for (InfoModel info : {InfoModel::independent, InfoModel::state_only}) {
    const auto g = random_game(3, info, GameMode::inf);
    const auto r = lemma1_enumerate(g);
    EXPECT_EQ(r.rules_enumerated, count_stopping_rules(w_alphabet(g), g.horizon, g.rule_cap));
  }
}

// Exhaustive search over adversary stopping times equals the node-wise
// extremum, for every information model and both game directions.
TEST(FiniteGame, ReductionHoldsOnRandomGames) {
  const InfoModel infos[] = {InfoModel::independent, InfoModel::observations_only, InfoModel::state_only,
                             InfoModel::both};
  int games = 0;
  for (std::uint64_t s = 0; s < 32; ++s) {
    for (GameMode mode : {GameMode::inf, GameMode::sup}) {
      const auto g = random_game(700 + s, infos[s % 4], mode, s % 2 == 1);
      const auto r = lemma1_enumerate(g);
      EXPECT_NEAR(r.lhs, r.rhs, 1e-12) << s;
      EXPECT_FALSE(r.attaining.empty());
      for (const auto& n : r.attaining) EXPECT_NEAR(n.value(), r.rhs, 1e-12);
      ++games;
    }
  }
  EXPECT_EQ(games, 64);
}

TEST(FiniteGame, SurvivalMassMatchesMemorylessRule) {
  // Under a constant hazard h, P_t(T > t) = (1 - h)^t regardless of the model,
  // and it splits over the w-histories at time t.
  FiniteGame g;
  g.model = sample_model();
  g.info = InfoModel::both;
  g.horizon = 4;
  g.detector = [](std::span<const std::size_t>) { return 0.2; };
  const detail::GameEvaluator ev(g);
  for (std::size_t t = 0; t < g.horizon; ++t) {
    double total = 0.0;
    const std::size_t n = detail::checked_pow(ev.alphabet(), t, g.history_cap);
    for (std::size_t key = 0; key < n; ++key) total += ev.den(ev.index(t, key));
    EXPECT_NEAR(total, std::pow(0.8, static_cast<double>(t)), 1e-14) << t;
  }
}

TEST(FiniteGame, ShewhartNodeValuesArePerStateDetections) {
  const DiscreteChangeModel m(sample_model());
  const auto w = solve_worst_case_prior(m, 10);
  const auto s1 = make_s1(m, 10);
  FiniteGame g;
  g.model = m.raw();
  g.info = InfoModel::state_only;
  g.detector = shewhart_hazard(w.policy);
  const detail::GameEvaluator ev(g);
  // Node (t = 1, z_1 = z) has value P(stop at 2 | z_1 = z).
  for (std::size_t z = 0; z < 3; ++z)
    EXPECT_NEAR(ev.node(1, z).value(), per_state_detection(m, w.policy, z), 1e-14);

  const auto c2 = criteria_bridge(m.raw(), shewhart_hazard(w.policy));
  EXPECT_TRUE(c2.ordered);
  EXPECT_NEAR(c2.p_i, stationary_detection(m, w.policy), 1e-14);
  EXPECT_NEAR(c2.p_iii, w.prior.beta2, 1e-13);
  EXPECT_NEAR(c2.p_iv, w.prior.beta2, 1e-13);
  const auto c1 = criteria_bridge(m.raw(), shewhart_hazard(s1));
  EXPECT_NEAR(c1.p_i, beta1(m, s1), 1e-14);
  EXPECT_NEAR(c1.p_ii, beta1(m, s1), 1e-14);
  EXPECT_NEAR(c1.p_iii, worst_state_detection(m, s1), 1e-13);
}

TEST(FiniteGame, CriteriaOrderedForArbitraryDetectors) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = random_game(40 + s, InfoModel::both, GameMode::inf, s % 2 == 0);
    const auto c = criteria_bridge(g.model, g.detector);
    EXPECT_TRUE(c.ordered) << s << ": " << c.p_i << " " << c.p_ii << " " << c.p_iii << " " << c.p_iv;
  }
}

TEST(FiniteGame, DelayRewardWithSilentDetector) {
  // A detector that never stops is charged H + 1 - t; the supremum sits at t = 0.
  FiniteGame g;
  g.model = sample_model();
  g.info = InfoModel::observations_only;
  g.mode = GameMode::sup;
  g.reward = delay_reward();
  g.horizon = 3;
  g.detector = [](std::span<const std::size_t>) { return 0.0; };
  const auto r = lemma1_enumerate(g);
  EXPECT_NEAR(r.rhs, 4.0, 1e-12);
  EXPECT_NEAR(r.lhs, 4.0, 1e-12);
  ASSERT_FALSE(r.attaining.empty());
  EXPECT_EQ(r.attaining[0].t, 0u);
}

TEST(FiniteGame, StopOnFirstOneBinaryExample) {
  // Binary observations and a detector that stops on the first 1: the
  // conditional detection probability does not depend on the history.
  FiniteGame g;
  g.model.pre_obs = {0.9, 0.1};
  g.model.post_obs = {{0.5, 0.5}, {0.2, 0.8}};
  g.model.pre_trans = {{0.7, 0.3}, {0.4, 0.6}};
  g.model.post_trans = g.model.pre_trans;
  g.model.stationary = {4.0 / 7.0, 3.0 / 7.0};
  g.info = InfoModel::state_only;
  g.detector = [](std::span<const std::size_t> xi) { return xi.back() == 1 ? 1.0 : 0.0; };
  const auto r = lemma1_enumerate(g);
  EXPECT_NEAR(r.lhs, r.rhs, 1e-14);
  // Worst state is z = 0: next state 0 w.p. .7 (detect .5), 1 w.p. .3 (detect .8).
  EXPECT_NEAR(r.rhs, 0.7 * 0.5 + 0.3 * 0.8, 1e-14);
}

TEST(FiniteGame, CapsAndValidation) {
  FiniteGame g = random_game(1, InfoModel::both, GameMode::inf);
  g.history_cap = 10;
  EXPECT_THROW(lemma1_enumerate(g), SizeError);
  g = random_game(1, InfoModel::state_only, GameMode::inf);
  g.rule_cap = 3;
  EXPECT_THROW(lemma1_enumerate(g), SizeError);
  g = random_game(1, InfoModel::state_only, GameMode::inf);
  g.detector = nullptr;
  EXPECT_THROW(lemma1_enumerate(g), ParameterError);
  g = random_game(1, InfoModel::independent, GameMode::inf);
  g.independent_w = {0.5, 0.6};
  EXPECT_THROW(lemma1_enumerate(g), ValidationError);
}

TEST(DiscreteOptimality, NoGreedyCompetitorBeatsBeta2) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const DiscreteChangeModel m(random_discrete_model(900 + s, 2 + s % 3, 2 + s % 5));
    const double gamma = 4.0 + static_cast<double>(s);
    const auto w = solve_worst_case_prior(m, gamma);
    const auto c = discrete_optimality_check(m, gamma, w.prior.beta2, s);
    EXPECT_TRUE(c.pass) << s << " " << c.best_competitor << " > " << w.prior.beta2;
    EXPECT_GT(c.competitors, 0u);
  }
}

TEST(DiscreteOptimality, SampledOrderingsForManySymbols) {
  const DiscreteChangeModel m(random_discrete_model(77, 3, 10));
  const auto w = solve_worst_case_prior(m, 15);
  const auto c = discrete_optimality_check(m, 15, w.prior.beta2, 5, 2000);
  EXPECT_TRUE(c.pass);
  EXPECT_EQ(c.competitors, 2000u);
}
