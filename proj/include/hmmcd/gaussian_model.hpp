#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>

#include "hmmcd/error.hpp"
#include "hmmcd/model.hpp"
#include "hmmcd/numerics.hpp"
#include "hmmcd/random.hpp"

namespace hmmcd {

/// Hidden mean z_t = mu + v_t with v_t ~ N(alpha v_{t-1}, sigma2).
struct GaussianAr1Params {
  double alpha = 0.5;
  double mu = 1.0;
  double sigma2 = 0.5;
};

inline void validate(const GaussianAr1Params& p) {
  if (!std::isfinite(p.alpha) || std::abs(p.alpha) >= 1.0)
    throw ParameterError("alpha", "AR coefficient must satisfy |alpha| < 1");
  if (!std::isfinite(p.mu)) throw ParameterError("mu", "must be finite");
  if (!std::isfinite(p.sigma2) || !(p.sigma2 > 0.0))
    throw ParameterError("sigma2", "innovation variance must be positive");
}

/// Observations N(0,1) before the change and N(z_t,1) after; the hidden AR(1)
/// state keeps the same kernel across the change.
class GaussianAr1Model {
 public:
  using state_type = double;
  using obs_type = double;

  explicit GaussianAr1Model(GaussianAr1Params params,
                            std::size_t quadrature_order = kDefaultQuadratureOrder)
      : params_(params), order_(quadrature_order) {
    validate(params_);
    check_construction();
  }

  const GaussianAr1Params& params() const { return params_; }
  std::size_t quadrature_order() const { return order_; }

  Normal stationary() const { return {params_.mu, params_.sigma2 / (1.0 - params_.alpha * params_.alpha)}; }
  Normal pre_obs_law() const { return {0.0, 1.0}; }
  Normal post_obs_law(double z) const { return {z, 1.0}; }
  Normal transition_law(double z_prev) const {
    return {(1.0 - params_.alpha) * params_.mu + params_.alpha * z_prev, params_.sigma2};
  }
  /// Closed form of f_0(xi | z_{t-1}): N((1-alpha) mu + alpha z_{t-1}, 1 + sigma2).
  Normal conditional_obs(double z_prev) const {
    return {(1.0 - params_.alpha) * params_.mu + params_.alpha * z_prev, 1.0 + params_.sigma2};
  }

  double pre_obs_density(double xi) const { return norm_pdf(xi); }
  double post_obs_density(double xi, double z) const { return norm_pdf(xi - z); }
  double pre_transition(double z_next, double z) const { return transition_law(z).pdf(z_next); }
  double post_transition(double z_next, double z) const { return pre_transition(z_next, z); }
  double stationary_density(double z) const { return stationary().pdf(z); }

  double sample_stationary(Stream& gen) const {
    const Normal s = stationary();
    return gen.normal(s.mean, s.sd());
  }
  double sample_pre_transition(double z, Stream& gen) const {
    return (1.0 - params_.alpha) * params_.mu + params_.alpha * z + std::sqrt(params_.sigma2) * gen.normal();
  }
  double sample_post_transition(double z, Stream& gen) const { return sample_pre_transition(z, gen); }
  double sample_pre_obs(Stream& gen) const { return gen.normal(); }
  double sample_post_obs(double z, Stream& gen) const { return z + gen.normal(); }

  template <class F>
  double expect_stationary(F&& f) const {
    const Normal s = stationary();
    return gauss_hermite_expect(f, s.mean, s.var, order_);
  }
  template <class F>
  double expect_pre_transition(double z, F&& f) const {
    const Normal k = transition_law(z);
    return gauss_hermite_expect(f, k.mean, k.var, order_);
  }
  template <class F>
  double expect_post_transition(double z, F&& f) const {
    return expect_pre_transition(z, std::forward<F>(f));
  }

  /// max |int g_inf(z'|z) g_inf(z) dz - g_inf(z')| over the grid.
  double stationarity_residual(std::span<const double> grid) const {
    double worst = 0.0;
    for (double zn : grid) {
      const double lhs = expect_stationary([&](double z) { return pre_transition(zn, z); });
      worst = std::max(worst, std::abs(lhs - stationary_density(zn)));
    }
    return worst;
  }

 private:
  void check_construction() const {
    const Normal s = stationary();
    auto mass = [&](auto&& density, double center, double scale) {
      return integrate_real_line(density, center, scale, order_);
    };
    double worst = std::abs(mass([&](double x) { return pre_obs_density(x); }, 0.0, 1.0) - 1.0);
    worst = std::max(worst, std::abs(mass([&](double x) { return post_obs_density(x, s.mean); }, s.mean, 1.0) - 1.0));
    worst = std::max(worst, std::abs(mass([&](double x) { return stationary_density(x); }, s.mean, s.sd()) - 1.0));
    const Normal k = transition_law(s.mean);
    worst = std::max(worst, std::abs(mass([&](double x) { return pre_transition(x, s.mean); }, k.mean, k.sd()) - 1.0));
    if (worst > 1e-8) throw ValidationError("density", -1, "a model density does not normalize");
    const double grid[] = {s.mean - 2.0 * s.sd(), s.mean, s.mean + 2.0 * s.sd()};
    if (stationarity_residual(grid) > 1e-8)
      throw ValidationError("stationary", -1, "stationary density is not invariant under the kernel");
  }

  GaussianAr1Params params_;
  std::size_t order_;
};

static_assert(ChangeModel<GaussianAr1Model>);

inline GaussianAr1Model make_gaussian_ar1(const GaussianAr1Params& params) {
  return GaussianAr1Model(params);
}

inline Normal post_conditional_obs_density(const GaussianAr1Model& model, double z_prev) {
  return model.conditional_obs(z_prev);
}

}  // namespace hmmcd
