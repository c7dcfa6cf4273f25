#pragma once

// Shewhart tests for the Gaussian AR(1) model. Both averaged densities are
// normal with variance above one, so {L_j >= nu} is the two-sided region
// |xi - c| >= r in observation space; calibration solves for r.

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmmcd/error.hpp"
#include "hmmcd/gaussian_model.hpp"
#include "hmmcd/numerics.hpp"
#include "hmmcd/shewhart.hpp"

namespace hmmcd {

using GaussianPrior = WorstCasePrior<double>;

/// Stop when |xi - center| >= half_width.
struct TwoSidedRegion {
  double center = 0.0;
  double half_width = 0.0;

  bool contains(double x) const { return std::abs(x - center) >= half_width; }
  double mass(const Normal& law) const { return law.cdf(center - half_width) + law.upper(center + half_width); }
};

struct GaussianShewhartPolicy {
  int variant = 1;
  Normal averaged;
  TwoSidedRegion region;
  CalibrationResult calibration;

  double averaged_density(double x) const { return averaged.pdf(x); }
  double log_likelihood_ratio(double x) const {
    const double d = x - averaged.mean;
    return -0.5 * std::log(averaged.var) - 0.5 * d * d / averaged.var + 0.5 * x * x;
  }
  double likelihood_ratio(double x) const { return std::exp(log_likelihood_ratio(x)); }
  double threshold() const { return calibration.threshold; }
  double stop_probability(double x) const { return region.contains(x) ? 1.0 : 0.0; }
};

inline double stop_mass_pre(const GaussianAr1Model& model, const GaussianShewhartPolicy& p) {
  return p.region.mass(model.pre_obs_law());
}
inline double stop_mass_post(const GaussianAr1Model& model, const GaussianShewhartPolicy& p, double z) {
  return p.region.mass(model.post_obs_law(z));
}

/// f_bar_0^1 ~ N(mu, 1 + sigma2 / (1 - alpha^2)).
inline Normal averaged_density_1(const GaussianAr1Model& model) {
  const auto& p = model.params();
  return {p.mu, 1.0 + p.sigma2 / (1.0 - p.alpha * p.alpha)};
}

/// f_bar_0^2 for a point-mass (or degenerate/stationary) prior.
inline Normal averaged_density_2(const GaussianAr1Model& model, const GaussianPrior& prior) {
  if (prior.degenerate) return averaged_density_1(model);
  if (prior.support.size() != 1)
    throw ParameterError("prior", "the Gaussian closed form needs a single support point");
  return model.conditional_obs(prior.support.front());
}

namespace detail {

inline TwoSidedRegion region_for(const Normal& density) {
  if (!(density.var > 1.0))
    throw CalibrationError("averaged density must be wider than the nominal N(0,1)");
  return {-density.mean / (density.var - 1.0), 0.0};
}

}  // namespace detail

/// Threshold with P_inf(L >= nu) = 1/gamma, solved for the observation-space
/// half width by bisection.
inline CalibrationResult calibrate(const GaussianAr1Model& model, const Normal& density, double gamma) {
  if (!(gamma > 1.0) || !std::isfinite(gamma)) throw ParameterError("gamma", "must exceed 1");
  TwoSidedRegion region = detail::region_for(density);
  const Normal nominal = model.pre_obs_law();
  const double target = 1.0 / gamma;
  auto excess = [&](double r) { return TwoSidedRegion{region.center, r}.mass(nominal) - target; };
  const double hi = std::abs(region.center) + 40.0;
  region.half_width = solve_monotone_root(excess, make_bracket(excess, 0.0, hi), 1e-15);

  const double p = region.mass(nominal);
  const double boundary = region.center + region.half_width;
  const double d = boundary - density.mean;
  const double lr = std::exp(-0.5 * std::log(density.var) - 0.5 * d * d / density.var + 0.5 * boundary * boundary);
  CalibrationResult c = finish_calibration(gamma, lr, 0.0, p);
  c.obs_threshold = region.half_width;
  c.obs_center = region.center;
  return c;
}

inline GaussianShewhartPolicy make_shewhart_policy(const GaussianAr1Model& model, int variant, const Normal& density,
                                                   double gamma) {
  GaussianShewhartPolicy p;
  p.variant = variant;
  p.averaged = density;
  p.calibration = calibrate(model, density, gamma);
  p.region = {*p.calibration.obs_center, *p.calibration.obs_threshold};
  return p;
}

inline GaussianShewhartPolicy make_s1(const GaussianAr1Model& model, double gamma) {
  return make_shewhart_policy(model, 1, averaged_density_1(model), gamma);
}

/// One-step detection probability of a policy when z_prev is stationary.
inline double stationary_detection(const GaussianAr1Model& model, const GaussianShewhartPolicy& policy) {
  return policy.region.mass(averaged_density_1(model));
}

/// beta_1: one-step detection of S_1 under f_bar_0^1.
inline double beta1(const GaussianAr1Model& model, const GaussianShewhartPolicy& s1) {
  return stationary_detection(model, s1);
}

/// P_0(stop at t+1 | z_t = z_prev) from the closed-form conditional density.
inline double per_state_detection(const GaussianAr1Model& model, const GaussianShewhartPolicy& policy, double z_prev) {
  return policy.region.mass(model.conditional_obs(z_prev));
}

/// State whose conditional observation mean sits on the region center, i.e.
/// the minimizer of per_state_detection. NaN when alpha = 0 (no minimizer).
inline double worst_state(const GaussianAr1Model& model, const GaussianShewhartPolicy& policy) {
  const auto& p = model.params();
  if (p.alpha == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (policy.region.center - (1.0 - p.alpha) * p.mu) / p.alpha;
}

/// Worst-case prior: a point mass on z* = -mu (1 - alpha) / alpha, where the
/// conditional observation mean vanishes. For alpha = 0 every state is worst
/// and the prior is flagged degenerate.
inline WorstCaseSolution<GaussianShewhartPolicy, double> solve_worst_case_prior(const GaussianAr1Model& model,
                                                                                double gamma) {
  const auto& p = model.params();
  WorstCaseSolution<GaussianShewhartPolicy, double> out;
  if (p.alpha == 0.0) {
    out.prior.degenerate = true;
  } else {
    out.prior.support = {-p.mu * (1.0 - p.alpha) / p.alpha};
    out.prior.weights = {1.0};
  }
  out.policy = make_shewhart_policy(model, 2, averaged_density_2(model, out.prior), gamma);
  out.calibration = out.policy.calibration;
  const double z_ref = out.prior.degenerate ? p.mu : out.prior.support.front();
  out.prior.beta2 = per_state_detection(model, out.policy, z_ref);
  out.prior.equalization_residual =
      std::abs(per_state_detection_numeric(model, out.policy, z_ref) - out.prior.beta2);
  return out;
}

/// Worst-case detection of a policy against a state-aware adversary:
/// inf over z_prev of per_state_detection.
inline double worst_state_detection(const GaussianAr1Model& model, const GaussianShewhartPolicy& policy) {
  if (model.params().alpha == 0.0) return per_state_detection(model, policy, model.params().mu);
  return policy.region.mass(Normal{policy.region.center, 1.0 + model.params().sigma2});
}

/// beta~_1: S_1 used while the adversary does see the state.
inline double mismatch_beta1_tilde(const GaussianAr1Model& model, const GaussianShewhartPolicy& s1) {
  return worst_state_detection(model, s1);
}

/// beta~_2: S_2 used while the adversary does not see the state.
inline double mismatch_beta2_tilde(const GaussianAr1Model& model, const GaussianShewhartPolicy& s2) {
  return stationary_detection(model, s2);
}

/// Quadrature route for the state-aware worst case: grid search followed by a
/// golden-section refinement of per_state_detection_numeric.
inline double worst_state_detection_numeric(const GaussianAr1Model& model, const GaussianShewhartPolicy& policy,
                                            double lo, double hi, std::size_t grid = 201) {
  auto d = [&](double z) { return per_state_detection_numeric(model, policy, z); };
  double best_z = lo, best = d(lo);
  const double step = (hi - lo) / static_cast<double>(grid - 1);
  for (std::size_t i = 1; i < grid; ++i) {
    const double z = lo + step * static_cast<double>(i);
    const double v = d(z);
    if (v < best) {
      best = v;
      best_z = z;
    }
  }
  double a = std::max(lo, best_z - step), b = std::min(hi, best_z + step);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), e = a + g * (b - a);
  double fc = d(c), fe = d(e);
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    if (fc < fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - g * (b - a);
      fc = d(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + g * (b - a);
      fe = d(e);
    }
  }
  return std::min({best, fc, fe});
}

/// The example's closed forms, written in the observation-space thresholds
/// nu1 (rule |xi + mu (1 - alpha^2)/sigma2| >= nu1) and nu2 (rule |xi| >= nu2).
namespace closed_form {

inline double s1_offset(const GaussianAr1Params& p) { return p.mu * (1.0 - p.alpha * p.alpha) / p.sigma2; }

/// Solves Phi(c - nu1) + Phi(-c - nu1) = 1/gamma with c = mu (1 - alpha^2) / sigma2.
inline double nu1(const GaussianAr1Params& p, double gamma) {
  const double c = s1_offset(p);
  auto f = [&](double nu) { return norm_cdf(c - nu) + norm_cdf(-c - nu) - 1.0 / gamma; };
  return solve_monotone_root(f, make_bracket(f, 0.0, std::abs(c) + 40.0), 1e-15);
}

/// 2 Phi(-nu2) = 1/gamma.
inline double nu2(double gamma) { return -norm_quantile(0.5 / gamma); }

inline double beta1(const GaussianAr1Params& p, double nu1) {
  const double c = s1_offset(p);
  const double sd = std::sqrt(1.0 + p.sigma2 / (1.0 - p.alpha * p.alpha));
  return norm_cdf((p.mu * (1.0 + c) - nu1) / sd) + norm_cdf(-(p.mu * (1.0 + c) + nu1) / sd);
}

inline double beta2(const GaussianAr1Params& p, double nu2) { return 2.0 * norm_cdf(-nu2 / std::sqrt(1.0 + p.sigma2)); }

inline double beta1_tilde(const GaussianAr1Params& p, double nu1) {
  return 2.0 * norm_cdf(-nu1 / std::sqrt(1.0 + p.sigma2));
}

inline double beta2_tilde(const GaussianAr1Params& p, double nu2) {
  const double one_m = 1.0 - p.alpha * p.alpha;
  const double r = std::sqrt(one_m) / std::sqrt(one_m + p.sigma2);
  return norm_cdf((-nu2 + p.mu) * r) + norm_cdf(-(nu2 + p.mu) * r);
}

}  // namespace closed_form

}  // namespace hmmcd
