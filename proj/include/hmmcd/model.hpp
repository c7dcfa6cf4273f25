#pragma once

// The hidden Markov change model contract shared by the continuous (Gaussian
// AR(1)) and finite instantiations, and trajectory simulation under a change
// imposed at time tau.

#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "hmmcd/error.hpp"
#include "hmmcd/random.hpp"

namespace hmmcd {

/// A change model supplies the nominal observation density f_inf, the
/// post-change conditional density f_0(.|z), the nominal and post-change state
/// kernels g_inf(z'|z), g_0(z'|z), the stationary state density, samplers for
/// each, and expectations against the state laws (quadrature for continuous
/// states, exact sums for finite ones).
template <class M>
concept ChangeModel = requires(const M& m, const typename M::state_type& z,
                               const typename M::obs_type& x, Stream& gen,
                               const std::function<double(const typename M::state_type&)>& f) {
  typename M::state_type;
  typename M::obs_type;
  { m.pre_obs_density(x) } -> std::convertible_to<double>;
  { m.post_obs_density(x, z) } -> std::convertible_to<double>;
  { m.pre_transition(z, z) } -> std::convertible_to<double>;
  { m.post_transition(z, z) } -> std::convertible_to<double>;
  { m.stationary_density(z) } -> std::convertible_to<double>;
  { m.sample_stationary(gen) } -> std::same_as<typename M::state_type>;
  { m.sample_pre_transition(z, gen) } -> std::same_as<typename M::state_type>;
  { m.sample_post_transition(z, gen) } -> std::same_as<typename M::state_type>;
  { m.sample_pre_obs(gen) } -> std::same_as<typename M::obs_type>;
  { m.sample_post_obs(z, gen) } -> std::same_as<typename M::obs_type>;
  { m.expect_stationary(f) } -> std::convertible_to<double>;
  { m.expect_pre_transition(z, f) } -> std::convertible_to<double>;
  { m.expect_post_transition(z, f) } -> std::convertible_to<double>;
};

/// Change time tau. Observations 1..tau follow the nominal regime; tau = never
/// yields purely nominal trajectories.
class ChangeTime {
 public:
  constexpr explicit ChangeTime(std::uint64_t t) : t_(t) {}
  static constexpr ChangeTime never() { return ChangeTime(std::numeric_limits<std::uint64_t>::max()); }

  constexpr bool is_never() const { return t_ == std::numeric_limits<std::uint64_t>::max(); }
  constexpr std::uint64_t value() const { return t_; }
  /// True when time step t (t >= 1) is still generated by the nominal regime.
  constexpr bool nominal_at(std::uint64_t t) const { return t <= t_; }

  friend constexpr bool operator==(ChangeTime, ChangeTime) = default;

 private:
  std::uint64_t t_;
};

/// One step of a simulated trajectory.
template <class State, class Obs>
struct TrajectoryStep {
  State state;
  Obs observation;
};

/// Streams (z_t, xi_t) one step at a time following the factorized joint law:
/// z_0 ~ stationary; for t <= tau, z_t ~ g_inf(.|z_{t-1}), xi_t ~ f_inf; for
/// t > tau, z_t ~ g_0(.|z_{t-1}), xi_t ~ f_0(.|z_t).
template <ChangeModel M>
class TrajectoryStepper {
 public:
  using state_type = typename M::state_type;
  using obs_type = typename M::obs_type;

  TrajectoryStepper(const M& model, ChangeTime tau) : model_(&model), tau_(tau) {}

  /// Draws z_0 and rewinds the clock to t = 0.
  state_type start(Stream& gen) {
    t_ = 0;
    state_ = model_->sample_stationary(gen);
    return state_;
  }

  TrajectoryStep<state_type, obs_type> step(Stream& gen) {
    ++t_;
    if (tau_.nominal_at(t_)) {
      state_ = model_->sample_pre_transition(state_, gen);
      return {state_, model_->sample_pre_obs(gen)};
    }
    state_ = model_->sample_post_transition(state_, gen);
    return {state_, model_->sample_post_obs(state_, gen)};
  }

  void set_change_time(ChangeTime tau) { tau_ = tau; }
  std::uint64_t time() const { return t_; }
  const state_type& state() const { return state_; }

 private:
  const M* model_;
  ChangeTime tau_;
  std::uint64_t t_ = 0;
  state_type state_{};
};

template <class State, class Obs>
struct TrajectoryRecord {
  ChangeTime tau = ChangeTime::never();
  std::vector<Obs> observations;  // xi_1 .. xi_H
  std::vector<State> states;      // z_0 .. z_H
  std::size_t horizon = 0;
};

template <ChangeModel M>
TrajectoryRecord<typename M::state_type, typename M::obs_type> sample_trajectory(
    const M& model, ChangeTime tau, std::size_t horizon, Stream& gen) {
  if (horizon < 1) throw ParameterError("horizon", "must be at least 1");
  TrajectoryRecord<typename M::state_type, typename M::obs_type> rec;
  rec.tau = tau;
  rec.horizon = horizon;
  rec.observations.reserve(horizon);
  rec.states.reserve(horizon + 1);
  TrajectoryStepper<M> stepper(model, tau);
  rec.states.push_back(stepper.start(gen));
  for (std::size_t t = 1; t <= horizon; ++t) {
    auto s = stepper.step(gen);
    rec.states.push_back(s.state);
    rec.observations.push_back(s.observation);
  }
  return rec;
}

/// f_0(xi | z_prev) = E[f_0(xi | z) | z ~ g_0(.|z_prev)] through the model's
/// generic expectation (quadrature or summation).
template <ChangeModel M>
double post_conditional_obs_density_numeric(const M& model, const typename M::state_type& z_prev,
                                            const typename M::obs_type& xi) {
  return model.expect_post_transition(
      z_prev, [&](const typename M::state_type& z) { return model.post_obs_density(xi, z); });
}

}  // namespace hmmcd
