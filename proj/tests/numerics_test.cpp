#include <cmath>

#include <gtest/gtest.h>

#include "hmmcd/numerics.hpp"
#include "hmmcd/random.hpp"

using namespace hmmcd;

// Reference values from scipy.stats.norm.
TEST(NormCdf, MatchesReferenceIncludingTails) {
  EXPECT_NEAR(norm_cdf(-10.0) / 7.61985302416047e-24, 1.0, 1e-12);
  EXPECT_NEAR(norm_cdf(-3.0), 0.0013498980316300933, 1e-16);
  EXPECT_NEAR(norm_cdf(0.5), 0.6914624612740131, 1e-15);
  EXPECT_NEAR(norm_cdf(2.0), 0.9772498680518208, 1e-15);
  EXPECT_NEAR((Normal{0.0, 1.0}.upper(8.0)) / 6.22096057427174e-16, 1.0, 1e-12);
}

TEST(NormQuantile, MatchesReference) {
  EXPECT_NEAR(norm_quantile(1e-12), -7.034483825301131, 1e-12);
  EXPECT_NEAR(norm_quantile(1e-3), -3.090232306167813, 1e-13);
  EXPECT_NEAR(norm_quantile(0.025), -1.9599639845400545, 1e-13);
  EXPECT_NEAR(norm_quantile(0.3), -0.5244005127080409, 1e-14);
  EXPECT_EQ(norm_quantile(0.5), 0.0);
  EXPECT_NEAR(norm_quantile(0.999), 3.090232306167813, 1e-13);
}

TEST(NormQuantile, RejectsOutsideOpenInterval) {
  EXPECT_THROW(norm_quantile(0.0), DomainError);
  EXPECT_THROW(norm_quantile(1.0), DomainError);
  EXPECT_THROW(norm_quantile(std::nan("")), DomainError);
}

TEST(NormQuantile, InvertsCdfOnGrid) {
  for (double x = -8.0; x <= 8.0; x += 0.25) {
    const double p = norm_cdf(x);
    if (p <= 0.0 || p >= 1.0) continue;
    // Above 0 the CDF loses relative precision near 1, so compare in x with a p-aware slack.
    const double tol = x < 0 ? 1e-12 : 1e-15 / (norm_pdf(x) + 1e-300) + 1e-12;
    EXPECT_NEAR(norm_quantile(p), x, tol) << "x=" << x;
  }
}

TEST(GaussHermite, WeightsSumToSqrtPi) {
  for (std::size_t n : {2u, 5u, 16u, 64u, 128u}) {
    double s = 0.0;
    for (double w : gauss_hermite(n).weights) s += w;
    EXPECT_NEAR(s, std::sqrt(M_PI), 1e-12) << n;
  }
}

TEST(GaussHermite, ExactForNormalMoments) {
  // E[X^4] for N(m, v) = m^4 + 6 m^2 v + 3 v^2.
  const double m = 0.7, v = 1.3;
  const double e4 = gauss_hermite_expect([](double x) { return x * x * x * x; }, m, v, 8);
  EXPECT_NEAR(e4, m * m * m * m + 6 * m * m * v + 3 * v * v, 1e-12);
  EXPECT_NEAR(gauss_hermite_expect([](double x) { return x; }, m, v, 2), m, 1e-14);
}

TEST(GaussHermite, SmoothNonPolynomialExpectation) {
  // E[cos X] for X ~ N(0, v) is exp(-v/2).
  const double v = 0.8;
  EXPECT_NEAR(gauss_hermite_expect([](double x) { return std::cos(x); }, 0.0, v), std::exp(-v / 2), 1e-14);
  EXPECT_THROW(gauss_hermite_expect([](double) { return 1.0; }, 0.0, 0.0), DomainError);
  EXPECT_THROW(gauss_hermite(1), ParameterError);
}

TEST(IntegrateRealLine, NormalDensityIntegratesToOne) {
  const Normal n{2.0, 3.0};
  EXPECT_NEAR(integrate_real_line([&](double x) { return n.pdf(x); }, 2.0, std::sqrt(3.0)), 1.0, 1e-13);
}

TEST(SolveMonotoneRoot, FindsRootToTolerance) {
  auto f = [](double x) { return x * x * x - 2.0; };
  const double r = solve_monotone_root(f, make_bracket(f, 0.0, 2.0), 1e-14);
  EXPECT_LE(std::abs(f(r)), 1e-14);
  EXPECT_NEAR(r, std::cbrt(2.0), 1e-14);
}

TEST(SolveMonotoneRoot, DecreasingFunctionAndEndpoints) {
  auto f = [](double x) { return 1.0 - x; };
  EXPECT_NEAR(solve_monotone_root(f, make_bracket(f, -3.0, 5.0)), 1.0, 1e-12);
  EXPECT_EQ(solve_monotone_root(f, make_bracket(f, 1.0, 5.0)), 1.0);
}

TEST(SolveMonotoneRoot, NoSignChangeThrows) {
  auto f = [](double x) { return x * x + 1.0; };
  EXPECT_THROW(solve_monotone_root(f, make_bracket(f, -1.0, 1.0)), BracketError);
}

TEST(SolveMonotoneRoot, UnreachableToleranceThrows) {
  // A jump: the residual never drops below 1 however fine the bracket.
  auto f = [](double x) { return x < 0.3 ? -1.0 : 1.0; };
  EXPECT_THROW(solve_monotone_root(f, make_bracket(f, 0.0, 1.0), 1e-3), SolverError);
}

TEST(Stream, SameSeedAndIdReproduce) {
  Stream a = rng_stream(42, 3), b = rng_stream(42, 3), c = rng_stream(42, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Stream, UniformAndNormalMoments) {
  Stream g = rng_stream(1, 0);
  const int n = 200000;
  double su = 0, sn = 0, snn = 0;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = g.normal();
    sn += z;
    snn += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sn / n, 0.0, 5 / std::sqrt(n));
  EXPECT_NEAR(snn / n, 1.0, 5 * std::sqrt(2.0 / n));
}

TEST(Stream, CategoricalSkipsZeroMass) {
  Stream g = rng_stream(5, 0);
  const double p[] = {0.0, 0.25, 0.0, 0.75, 0.0};
  int counts[5] = {};
  for (int i = 0; i < 40000; ++i) ++counts[g.categorical(p)];
  EXPECT_EQ(counts[0] + counts[2] + counts[4], 0);
  EXPECT_NEAR(counts[1] / 40000.0, 0.25, 0.015);
}
