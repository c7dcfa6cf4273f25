#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "hmmcd/adversary.hpp"
#include "hmmcd/corpus.hpp"
#include "hmmcd/shewhart_discrete.hpp"
#include "hmmcd/shewhart_gaussian.hpp"

using namespace hmmcd;

namespace {

const GaussianAr1Model kModel({0.5, 1.0, 0.5});

DiscreteModel sample_model() {
  DiscreteModel m;
  m.pre_obs = {0.5, 0.3, 0.2};
  m.post_obs = {{0.1, 0.3, 0.6}, {0.6, 0.3, 0.1}, {0.2, 0.7, 0.1}};
  m.pre_trans = {{0.6, 0.3, 0.1}, {0.3, 0.6, 0.1}, {0.1, 0.1, 0.8}};
  m.post_trans = m.pre_trans;
  m.stationary = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  return m;
}

void expect_within(const MonteCarloEstimate& e, double ref, double slack = 0.0) {
  EXPECT_LE(std::abs(e.value - ref), 4.0 * e.std_error + slack) << e.value << " vs " << ref << " se " << e.std_error;
}

}  // namespace

TEST(InfoModel, ParseAndPrint) {
  EXPECT_EQ(parse_info_model("obs"), InfoModel::observations_only);
  EXPECT_EQ(parse_info_model("iv"), InfoModel::both);
  EXPECT_EQ(parse_info_model(to_string(InfoModel::state_only)), InfoModel::state_only);
  EXPECT_THROW(parse_info_model("oracle"), ParameterError);
}

TEST(AdversaryPolicy, RuleMustMatchInformationModel) {
  using A = AdversaryPolicy<double, double>;
  EXPECT_THROW(A(InfoModel::observations_only, StateRule<double>{[](StateHistory<double>) { return true; }}),
               CausalityError);
  EXPECT_THROW(A(InfoModel::independent, JointRule<double, double>{}), CausalityError);
  EXPECT_NO_THROW(A(InfoModel::state_only, StateRule<double>{[](StateHistory<double>) { return true; }}));
}

TEST(AdversaryPolicy, ChangeTimesOnRecordedTrajectory) {
  Stream g = rng_stream(4, 0);
  const auto rec = sample_trajectory(kModel, ChangeTime::never(), 50, g);
  auto fixed = fixed_time_adversary<double, double>(7);
  EXPECT_EQ(adversary_tau(fixed, rec, g), ChangeTime(7));
  auto late = fixed_time_adversary<double, double>(80);
  EXPECT_TRUE(adversary_tau(late, rec, g).is_never());

  // First time the state exceeds its own start value: only z_1.. are visible.
  const double z0 = rec.states[0];
  AdversaryPolicy<double, double> above(InfoModel::state_only, StateRule<double>{[z0](StateHistory<double> h) {
                                          return !h.empty() && h.last() > z0;
                                        }});
  const auto tau = adversary_tau(above, rec, g);
  std::uint64_t expected = 0;
  for (std::size_t t = 1; t <= 50 && expected == 0; ++t)
    if (rec.states[t] > z0) expected = t;
  ASSERT_GT(expected, 0u);
  EXPECT_EQ(tau, ChangeTime(expected));
}

TEST(AdversaryPolicy, GeometricMean) {
  auto adv = geometric_adversary<double, double>(0.25);
  Stream g = rng_stream(8, 0);
  double s = 0;
  const int n = 40000;
  const std::vector<double> buf(1000, 0.0);
  for (int i = 0; i < n; ++i) {
    adv.begin(g);
    std::uint64_t t = 0;
    while (!adv.impose_now({}, {std::span<const double>(buf).first(t)})) ++t;
    s += static_cast<double>(t);
  }
  EXPECT_NEAR(s / n, 3.0, 5 * std::sqrt(12.0 / n));
  EXPECT_THROW((geometric_adversary<double, double>(0.0)), ParameterError);
}

TEST(WorstDetection, IndependentAdversaryGivesStationaryDetection) {
  const auto w = solve_worst_case_prior(kModel, 20);
  ShewhartDetector det(w.policy);
  for (std::uint64_t tau : {0u, 3u}) {
    const auto r = estimate_worst_detection(kModel, det, fixed_time_adversary<double, double>(tau), 200000, 10 + tau);
    expect_within(r.estimate, mismatch_beta2_tilde(kModel, w.policy));
    EXPECT_EQ(r.never_triggered, 0u);
  }
}

TEST(WorstDetection, StateTriggerAttainsBeta2) {
  const double gamma = 20;
  const auto w = solve_worst_case_prior(kModel, gamma);
  ShewhartDetector det(w.policy);
  const double z_star = worst_state(kModel, w.policy);
  const double eps = 0.02;
  const auto r = estimate_worst_detection(kModel, det, worst_state_trigger<double, double>(z_star, eps), 100000, 3);
  auto d = [&](double z) { return per_state_detection(kModel, w.policy, z); };
  expect_within(r.estimate, w.prior.beta2, band_bias_bound(d, z_star, eps));
  EXPECT_GT(r.false_alarms, 0u);
}

TEST(WorstDetection, DiscreteStateTrigger) {
  const DiscreteChangeModel m(sample_model());
  const auto w = solve_worst_case_prior(m, 10);
  ShewhartDetector det(w.policy);
  for (std::size_t z : w.prior.support) {
    const auto r = estimate_worst_detection(m, det, worst_state_trigger<std::size_t, std::size_t>(z), 100000, 17 + z);
    expect_within(r.estimate, w.prior.beta2);
  }
}

TEST(WorstDetection, ImportanceSampledWorstStateOfS1) {
  const auto s1 = make_s1(kModel, 20);
  ShewhartDetector det(s1);
  const double z_star = worst_state(kModel, s1);
  const auto r = estimate_attained_detection(kModel, det, z_star, 0.01, 200000, 5);
  auto d = [&](double z) { return per_state_detection(kModel, s1, z); };
  expect_within(r.estimate, mismatch_beta1_tilde(kModel, s1), band_bias_bound(d, z_star, 0.01));
  EXPECT_THROW(estimate_attained_detection(kModel, det, z_star, 0.0, 1000, 5), ParameterError);
}

TEST(WorstDetection, TooFewSurvivorsIsDegenerate) {
  // Stopping at t = 1 always is a false alarm before tau = 5.
  EXPECT_THROW(estimate_worst_detection(kModel, FixedTimeDetector(1), fixed_time_adversary<double, double>(5), 5000, 1),
               DegenerateEstimateError);
}

TEST(WorstDetection, NeverTriggeredTrialsAreExcluded) {
  // Fires at t = 1 when z_1 > 1, otherwise never within the cap of 30 steps.
  const auto w = solve_worst_case_prior(kModel, 20);
  AdversaryPolicy<double, double> once(InfoModel::state_only, StateRule<double>{[](StateHistory<double> h) {
                                         return h.time() == 1 && h.last() > 1.0;
                                       }});
  const auto r = estimate_worst_detection(kModel, ShewhartDetector(w.policy), once, 4000, 1, 1, 30);
  EXPECT_GT(r.never_triggered, 200u);
  EXPECT_EQ(r.never_triggered + r.false_alarms + r.estimate.conditioning_count, 4000u);
}

TEST(WorstDetection, DeterministicPerSeedAndWorkerCount) {
  const auto w = solve_worst_case_prior(kModel, 20);
  ShewhartDetector det(w.policy);
  auto adv = fixed_time_adversary<double, double>(2);
  const auto a = estimate_worst_detection(kModel, det, adv, 20000, 99, 3);
  const auto b = estimate_worst_detection(kModel, det, adv, 20000, 99, 3);
  const auto c = estimate_worst_detection(kModel, det, adv, 20000, 100, 3);
  EXPECT_EQ(a.estimate.value, b.estimate.value);
  EXPECT_EQ(a.false_alarms, b.false_alarms);
  EXPECT_NE(a.estimate.value, c.estimate.value);
}

TEST(RunPartitioned, ChunksCoverTrialsAndErrorsPropagate) {
  struct Count {
    std::uint64_t n = 0;
    Count& operator+=(const Count& o) {
      n += o.n;
      return *this;
    }
  };
  const auto c = run_partitioned<Count>(1001, 4, 1, [](Stream&, std::uint64_t, std::uint64_t n) { return Count{n}; });
  EXPECT_EQ(c.n, 1001u);
  EXPECT_THROW(run_partitioned<Count>(10, 3, 1,
                                      [](Stream&, std::uint64_t begin, std::uint64_t) -> Count {
                                        if (begin > 0) throw std::runtime_error("worker");
                                        return {};
                                      }),
               std::runtime_error);
  EXPECT_THROW(run_partitioned<Count>(10, 0, 1, [](Stream&, std::uint64_t, std::uint64_t) { return Count{}; }),
               ParameterError);
}

TEST(Arl, ShewhartArlIsGamma) {
  const auto w = solve_worst_case_prior(kModel, 50);
  const auto e = estimate_arl(kModel, ShewhartDetector(w.policy), 50, 100000, 5000, 21);
  expect_within(e, 50.0);
  EXPECT_EQ(e.truncated, 0u);
  EXPECT_THROW(estimate_arl(kModel, ShewhartDetector(w.policy), 50, 1000, 999, 21), ParameterError);
  EXPECT_THROW(estimate_arl(kModel, FixedTimeDetector(1u << 30), 50, 1000, 1000, 21), CapTooSmallError);
}

TEST(Arl, DiscreteRandomizedRule) {
  const DiscreteChangeModel m(sample_model());
  const auto w = solve_worst_case_prior(m, 30);
  expect_within(estimate_arl(m, ShewhartDetector(w.policy), 30, 100000, 3000, 2), 30.0);
}

TEST(Equalizer, ShewhartPassesParityFails) {
  const auto s1 = make_s1(kModel, 20);
  const auto r = equalizer_check(kModel, ShewhartDetector(s1), {0, 1, 2, 5}, 100000, 7, 1, beta1(kModel, s1));
  EXPECT_TRUE(r.pass) << r.max_pairwise_z << " " << *r.max_reference_z;
  const auto wide = make_s1(kModel, 400);
  ParityDetector parity([rg = s1.region](double x) { return rg.contains(x); },
                        [rg = wide.region](double x) { return rg.contains(x); });
  const auto bad = equalizer_check(kModel, parity, {0, 1, 2, 5}, 100000, 7);
  EXPECT_FALSE(bad.pass);
  EXPECT_THROW(equalizer_check(kModel, parity, {21}, 1000, 7), ParameterError);
}

TEST(Detectors, RunOnFixedSequences) {
  Stream g = rng_stream(1, 0);
  const std::vector<double> xs = {0.1, -0.2, 3.5, 0.0};
  auto one = one_sided_detector(3.0);
  EXPECT_EQ(run_detector(one, std::span<const double>(xs), g), 3u);
  auto two = shifted_two_sided_detector(1.0, 1.15);
  EXPECT_EQ(run_detector(two, std::span<const double>(xs), g), 2u);
  FixedTimeDetector fixed(5);
  EXPECT_FALSE(run_detector(fixed, std::span<const double>(xs), g).has_value());
  TruncatedCusum cusum([](double x) { return x - 1.0; }, 2.0, 3);
  EXPECT_EQ(run_detector(cusum, std::span<const double>(xs), g), 3u);
  const auto s1 = make_s1(kModel, 10);
  EXPECT_EQ(run_policy(s1, std::span<const double>(xs), g), 3u);
}

TEST(Detectors, RandomizedShewhartStopsAtRateQ) {
  DiscreteModel raw;
  raw.pre_obs = {0.004, 0.996};
  raw.post_obs = {{0.5, 0.5}};
  raw.pre_trans = {{1.0}};
  raw.post_trans = {{1.0}};
  raw.stationary = {1.0};
  const DiscreteChangeModel m(raw);
  auto p = make_shewhart_policy(m, 1, {3 * 0.004, 0.2 * 0.996}, 500);
  ShewhartDetector det(p);
  Stream g = rng_stream(3, 0);
  int stops = 0;
  for (int i = 0; i < 20000; ++i) stops += det.observe(std::size_t{0}, g);
  EXPECT_NEAR(stops / 20000.0, 0.5, 0.02);
  for (int i = 0; i < 100; ++i) EXPECT_FALSE(det.observe(std::size_t{1}, g));
}
