#pragma once

// Scalar numerical kernels: standard normal CDF and quantile, Gauss-Hermite
// quadrature and bracketed root finding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "hmmcd/error.hpp"

namespace hmmcd {

inline constexpr std::size_t kDefaultQuadratureOrder = 64;

/// Standard normal CDF evaluated through erfc, accurate in both tails.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Inverse of norm_cdf. Throws DomainError unless 0 < p < 1.
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("norm_quantile: p must lie in (0, 1)");
  // Work in the lower half so that the tail keeps full relative precision.
  if (p > 0.5) return -norm_quantile(1.0 - p);

  // Acklam's rational approximation as the starting point.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  // Halley refinement against the erfc-based CDF.
  for (int i = 0; i < 3; ++i) {
    const double e = norm_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

/// Univariate normal law.
struct Normal {
  double mean = 0.0;
  double var = 1.0;

  double sd() const { return std::sqrt(var); }
  double pdf(double x) const {
    const double s = sd();
    return norm_pdf((x - mean) / s) / s;
  }
  double cdf(double x) const { return norm_cdf((x - mean) / sd()); }
  /// P(X >= x).
  double upper(double x) const { return norm_cdf((mean - x) / sd()); }
};

/// Gauss-Hermite rule for the weight exp(-x^2) (physicists' normalization:
/// the weights sum to sqrt(pi)).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t order = 0;
};

namespace detail {

inline QuadratureRule compute_gauss_hermite(std::size_t n) {
  // Newton iteration on the orthonormal Hermite recurrence.
  QuadratureRule rule;
  rule.order = n;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  const std::size_t m = (n + 1) / 2;
  double z = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * rule.nodes[n - 1];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * rule.nodes[n - 2];
    } else {
      z = 2.0 * z - rule.nodes[n - i + 1];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4;
      double p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    // Store descending from the top end; mirrored below.
    rule.nodes[n - 1 - i] = z;
    rule.nodes[i] = -z;
    rule.weights[n - 1 - i] = 2.0 / (pp * pp);
    rule.weights[i] = rule.weights[n - 1 - i];
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace detail

/// Cached Gauss-Hermite rule of the given order (order >= 2).
inline const QuadratureRule& gauss_hermite(std::size_t order) {
  if (order < 2) throw ParameterError("order", "Gauss-Hermite order must be at least 2");
  static std::mutex mutex;
  static std::map<std::size_t, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, detail::compute_gauss_hermite(order)).first;
  return it->second;
}

/// E[f(Z)] for Z ~ Normal(mean, var) by Gauss-Hermite quadrature. Exact for
/// polynomials of degree < 2 * order.
template <class F>
double gauss_hermite_expect(F&& f, double mean, double var,
                            std::size_t order = kDefaultQuadratureOrder) {
  if (!(var > 0.0)) throw DomainError("gauss_hermite_expect: variance must be positive");
  const QuadratureRule& rule = gauss_hermite(order);
  const double scale = std::sqrt(2.0 * var);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.order; ++i) sum += rule.weights[i] * f(mean + scale * rule.nodes[i]);
  return sum / std::sqrt(std::numbers::pi);
}

/// Integral of f over the real line, for f concentrated around `center` with
/// spread of order `scale`.
template <class F>
double integrate_real_line(F&& f, double center, double scale,
                           std::size_t order = kDefaultQuadratureOrder) {
  const QuadratureRule& rule = gauss_hermite(order);
  const double h = 2.0 * scale;
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.order; ++i) {
    const double y = rule.nodes[i];
    sum += rule.weights[i] * std::exp(y * y) * f(center + h * y);
  }
  return h * sum;
}

struct RootBracket {
  double lo = 0.0;
  double hi = 0.0;
  double f_lo = 0.0;
  double f_hi = 0.0;
};

template <class F>
RootBracket make_bracket(F&& f, double lo, double hi) {
  return RootBracket{lo, hi, f(lo), f(hi)};
}

/// Root of a continuous monotone f inside `bracket` by bisection; the returned
/// point satisfies |f(x)| <= tol. Throws BracketError without a sign change.
template <class F>
double solve_monotone_root(F&& f, RootBracket bracket, double tol = 1e-12) {
  if (bracket.f_lo == 0.0) return bracket.lo;
  if (bracket.f_hi == 0.0) return bracket.hi;
  if (std::signbit(bracket.f_lo) == std::signbit(bracket.f_hi))
    throw BracketError("solve_monotone_root: no sign change on bracket");
  double lo = bracket.lo;
  double hi = bracket.hi;
  double f_lo = bracket.f_lo;
  double best = std::abs(f_lo) < std::abs(bracket.f_hi) ? lo : hi;
  double best_res = std::min(std::abs(f_lo), std::abs(bracket.f_hi));
  for (int it = 0; it < 4000; ++it) {
    if (best_res <= tol) return best;
    const double mid = lo + 0.5 * (hi - lo);
    if (mid == lo || mid == hi) break;
    const double f_mid = f(mid);
    if (std::abs(f_mid) < best_res) {
      best_res = std::abs(f_mid);
      best = mid;
    }
    if (f_mid == 0.0) return mid;
    if (std::signbit(f_mid) == std::signbit(f_lo)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  if (best_res <= tol) return best;
  throw SolverError("solve_monotone_root: bracket collapsed before the residual reached tolerance");
}

}  // namespace hmmcd
