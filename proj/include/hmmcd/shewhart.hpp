#pragma once

// Types and model-generic evaluations shared by the Gaussian and finite
// Shewhart constructions.
//
// A policy P used with model M must provide the overloads
//   double stop_mass_pre(const M&, const P&)             P_inf(stop in one step)
//   double stop_mass_post(const M&, const P&, state z)   P(stop | xi ~ f_0(.|z))
// from which everything below is assembled with the model's expectations.

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "hmmcd/model.hpp"

namespace hmmcd {

struct CalibrationResult {
  double gamma = 0.0;
  /// Threshold on the likelihood ratio L_j.
  double threshold = 0.0;
  /// Probability of stopping when L_j equals the threshold (0 without atoms).
  double randomization = 0.0;
  /// |E_inf[S] - gamma| / gamma with E_inf[S] = 1 / P_inf(stop in one step).
  double residual = 0.0;
  double stop_probability = 0.0;
  /// Gaussian model only: the equivalent observation-space rule |xi - center| >= obs_threshold.
  std::optional<double> obs_threshold;
  std::optional<double> obs_center;
};

/// Worst-case prior pi on the last pre-change state. `degenerate` marks the
/// case where every state is equally bad and pi is taken to be the stationary law.
template <class State>
struct WorstCasePrior {
  std::vector<State> support;
  std::vector<double> weights;
  double beta2 = 0.0;
  double equalization_residual = 0.0;
  bool degenerate = false;
};

template <class Policy, class State>
struct WorstCaseSolution {
  WorstCasePrior<State> prior;
  CalibrationResult calibration;
  Policy policy;
};

inline CalibrationResult finish_calibration(double gamma, double threshold, double q, double stop_probability) {
  CalibrationResult c;
  c.gamma = gamma;
  c.threshold = threshold;
  c.randomization = q;
  c.stop_probability = stop_probability;
  c.residual = std::abs(1.0 / stop_probability - gamma) / gamma;
  return c;
}

/// f_bar_0^1(xi) = int int f_0(xi|z) g_0(z|z') g_inf(z') dz' dz.
template <ChangeModel M>
double averaged_density_1_numeric(const M& model, const typename M::obs_type& xi) {
  using S = typename M::state_type;
  return model.expect_stationary([&](const S& zp) {
    return model.expect_post_transition(zp, [&](const S& z) { return model.post_obs_density(xi, z); });
  });
}

/// f_bar_0^2(xi) for a finitely supported prior; a degenerate prior stands for
/// the stationary law.
template <ChangeModel M>
double averaged_density_2_numeric(const M& model, const WorstCasePrior<typename M::state_type>& prior,
                                  const typename M::obs_type& xi) {
  using S = typename M::state_type;
  if (prior.degenerate) return averaged_density_1_numeric(model, xi);
  double s = 0.0;
  for (std::size_t i = 0; i < prior.support.size(); ++i)
    s += prior.weights[i] *
         model.expect_post_transition(prior.support[i], [&](const S& z) { return model.post_obs_density(xi, z); });
  return s;
}

/// One-step detection probability given the last pre-change state, through
/// the model's expectation over z_{t} ~ g_0(.|z_prev).
template <ChangeModel M, class Policy>
double per_state_detection_numeric(const M& model, const Policy& policy, const typename M::state_type& z_prev) {
  return model.expect_post_transition(
      z_prev, [&](const typename M::state_type& z) { return stop_mass_post(model, policy, z); });
}

/// One-step detection probability when the last pre-change state is
/// stationary, i.e. int f_bar_0^1(xi) 1{stop} dxi.
template <ChangeModel M, class Policy>
double stationary_detection_numeric(const M& model, const Policy& policy) {
  return model.expect_stationary(
      [&](const typename M::state_type& zp) { return per_state_detection_numeric(model, policy, zp); });
}

}  // namespace hmmcd
