#pragma once

// The change-imposing adversary and the Monte-Carlo side of the detection
// game. An adversary rule only ever receives the coordinates its information
// model grants, so every simulated tau is a stopping time of the declared
// filtration. State histories start at z_1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "hmmcd/detectors.hpp"
#include "hmmcd/error.hpp"
#include "hmmcd/model.hpp"
#include "hmmcd/monte_carlo.hpp"

namespace hmmcd {

/// Criteria i to iv: what the adversary's data stream w_t consists of.
enum class InfoModel { independent, observations_only, state_only, both };

inline std::string_view to_string(InfoModel m) {
  switch (m) {
    case InfoModel::independent: return "independent";
    case InfoModel::observations_only: return "observations_only";
    case InfoModel::state_only: return "state_only";
    case InfoModel::both: return "both";
  }
  return "?";
}

inline InfoModel parse_info_model(std::string_view s) {
  if (s == "independent" || s == "none" || s == "i") return InfoModel::independent;
  if (s == "observations_only" || s == "obs" || s == "ii") return InfoModel::observations_only;
  if (s == "state_only" || s == "state" || s == "iii") return InfoModel::state_only;
  if (s == "both" || s == "iv") return InfoModel::both;
  throw ParameterError("adversary", "unknown information model '" + std::string(s) + "'");
}

/// z_1 .. z_t.
template <class S>
struct StateHistory {
  std::span<const S> z;
  std::size_t time() const { return z.size(); }
  bool empty() const { return z.empty(); }
  const S& last() const { return z.back(); }
};

/// xi_1 .. xi_t.
template <class O>
struct ObservationHistory {
  std::span<const O> xi;
  std::size_t time() const { return xi.size(); }
  bool empty() const { return xi.empty(); }
  const O& last() const { return xi.back(); }
};

/// Change time drawn before any data is seen.
struct IndependentRule {
  std::function<ChangeTime(Stream&)> draw;
};
template <class O>
struct ObservationRule {
  std::function<bool(ObservationHistory<O>)> impose;
};
template <class S>
struct StateRule {
  std::function<bool(StateHistory<S>)> impose;
};
template <class S, class O>
struct JointRule {
  std::function<bool(StateHistory<S>, ObservationHistory<O>)> impose;
};

template <class S, class O>
class AdversaryPolicy {
 public:
  using Rule = std::variant<IndependentRule, ObservationRule<O>, StateRule<S>, JointRule<S, O>>;

  /// Throws CausalityError if the rule's input does not match the information model.
  AdversaryPolicy(InfoModel info, Rule rule) : info_(info), rule_(std::move(rule)) {
    const std::size_t expected = static_cast<std::size_t>(info);
    if (rule_.index() != expected)
      throw CausalityError(std::string("rule shape does not match information model ") + std::string(to_string(info)));
  }

  InfoModel info_model() const { return info_; }

  /// Per-trial setup; independent rules draw their change time here.
  void begin(Stream& gen) {
    if (auto* r = std::get_if<IndependentRule>(&rule_)) drawn_ = r->draw(gen);
  }

  /// Decision at time t = history length: impose the change now (tau = t)?
  bool impose_now(StateHistory<S> z, ObservationHistory<O> xi) const {
    switch (info_) {
      case InfoModel::independent:
        return !drawn_.is_never() && drawn_.value() == xi.time();
      case InfoModel::observations_only:
        return std::get<ObservationRule<O>>(rule_).impose(xi);
      case InfoModel::state_only:
        return std::get<StateRule<S>>(rule_).impose(z);
      case InfoModel::both:
        return std::get<JointRule<S, O>>(rule_).impose(z, xi);
    }
    return false;
  }

 private:
  InfoModel info_;
  Rule rule_;
  ChangeTime drawn_ = ChangeTime::never();
};

template <class S, class O>
AdversaryPolicy<S, O> fixed_time_adversary(std::uint64_t tau) {
  return {InfoModel::independent, IndependentRule{[tau](Stream&) { return ChangeTime(tau); }}};
}

/// tau ~ Geometric(p) on {0, 1, ...}, independent of the data.
template <class S, class O>
AdversaryPolicy<S, O> geometric_adversary(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ParameterError("p", "must lie in (0, 1]");
  return {InfoModel::independent, IndependentRule{[p](Stream& gen) {
            std::uint64_t t = 0;
            while (gen.uniform() >= p) ++t;
            return ChangeTime(t);
          }}};
}

namespace detail {

template <class S>
bool near_state(const S& z, const S& target, double eps) {
  if constexpr (std::is_floating_point_v<S>) return std::abs(z - target) <= eps;
  else return z == target;
}

}  // namespace detail

/// Imposes the change the first time z_t lies within eps of z_star (equality
/// for finite states).
template <class S, class O>
AdversaryPolicy<S, O> worst_state_trigger(S z_star, double eps = 0.01) {
  return {InfoModel::state_only, StateRule<S>{[z_star, eps](StateHistory<S> h) {
            return !h.empty() && detail::near_state(h.last(), z_star, eps);
          }}};
}

/// Change time chosen by the adversary on a recorded trajectory (never if it
/// does not fire within the record).
template <class S, class O>
ChangeTime adversary_tau(AdversaryPolicy<S, O>& policy, const TrajectoryRecord<S, O>& rec, Stream& gen) {
  policy.begin(gen);
  const std::span<const S> z(rec.states);
  const std::span<const O> xi(rec.observations);
  for (std::size_t t = 0; t <= rec.horizon; ++t)
    if (policy.impose_now({z.subspan(1, t)}, {xi.first(t)})) return ChangeTime(t);
  return ChangeTime::never();
}

struct DetectionReport {
  MonteCarloEstimate estimate;
  std::uint64_t false_alarms = 0;
  /// Trials where the adversary never imposed a change within the cap.
  std::uint64_t never_triggered = 0;
};

inline constexpr std::uint64_t kMinSurvivors = 100;
inline constexpr std::uint64_t kAdversaryHorizonCap = 100000;

namespace detail {

struct DetectionCounts {
  double survivors = 0.0, hits = 0.0;
  std::uint64_t false_alarms = 0, never = 0;
  DetectionCounts& operator+=(const DetectionCounts& o) {
    survivors += o.survivors;
    hits += o.hits;
    false_alarms += o.false_alarms;
    never += o.never;
    return *this;
  }
};

}  // namespace detail

/// Estimates P(T = tau + 1 | T > tau) with the adversary choosing tau. Trials
/// with a false alarm at or before tau are dropped, as are trials where the
/// adversary does not fire within `horizon_cap` steps.
template <ChangeModel M, class Detector>
DetectionReport estimate_worst_detection(const M& model, const Detector& detector,
                                         const AdversaryPolicy<typename M::state_type, typename M::obs_type>& adversary,
                                         std::uint64_t trials, std::uint64_t seed, unsigned workers = 1,
                                         std::uint64_t horizon_cap = kAdversaryHorizonCap) {
  using S = typename M::state_type;
  using O = typename M::obs_type;
  static_assert(SequentialDetector<Detector, O>);
  if (trials == 0) throw ParameterError("trials", "must be positive");
  auto counts = run_partitioned<detail::DetectionCounts>(
      trials, workers, seed, [&](Stream& gen, std::uint64_t, std::uint64_t n) {
        detail::DetectionCounts c;
        Detector det = detector;
        auto adv = adversary;
        std::vector<S> zs;
        std::vector<O> xs;
        for (std::uint64_t i = 0; i < n; ++i) {
          det.reset();
          adv.begin(gen);
          zs.clear();
          xs.clear();
          S z = model.sample_stationary(gen);
          bool alarm = false, triggered = false;
          for (std::uint64_t t = 0;; ++t) {
            if (adv.impose_now({std::span<const S>(zs)}, {std::span<const O>(xs)})) {
              triggered = true;
              break;
            }
            if (t == horizon_cap) break;
            z = model.sample_pre_transition(z, gen);
            const O x = model.sample_pre_obs(gen);
            zs.push_back(z);
            xs.push_back(x);
            if (det.observe(x, gen)) {
              alarm = true;
              break;
            }
          }
          if (alarm) {
            ++c.false_alarms;
            continue;
          }
          if (!triggered) {
            ++c.never;
            continue;
          }
          z = model.sample_post_transition(z, gen);
          const O x = model.sample_post_obs(z, gen);
          c.survivors += 1.0;
          if (det.observe(x, gen)) c.hits += 1.0;
        }
        return c;
      });
  if (counts.survivors < static_cast<double>(kMinSurvivors))
    throw DegenerateEstimateError("only " + std::to_string(static_cast<std::uint64_t>(counts.survivors)) +
                                  " trials survived the conditioning event {T > tau}");
  DetectionReport r;
  r.estimate = proportion_estimate(counts.hits, counts.survivors, trials, seed);
  r.false_alarms = counts.false_alarms;
  r.never_triggered = counts.never;
  return r;
}

namespace detail {

struct WeightedRatio {
  // sum w x, sum w y, and the second moments needed for the delta method.
  double wx = 0.0, wy = 0.0, wxx = 0.0, wyy = 0.0, wxy = 0.0;
  double survivors = 0.0;
  WeightedRatio& operator+=(const WeightedRatio& o) {
    wx += o.wx;
    wy += o.wy;
    wxx += o.wxx;
    wyy += o.wyy;
    wxy += o.wxy;
    survivors += o.survivors;
    return *this;
  }
};

}  // namespace detail

/// State-aware adversary for a worst state too rare to be hit by waiting:
/// tau = 1 if z_1 lies within eps of z_star, never otherwise. z_1 is drawn
/// uniformly on the band and reweighted by its stationary density, and the
/// conditional detection probability is the self-normalized weighted ratio.
template <ChangeModel M, class Detector>
  requires std::is_floating_point_v<typename M::state_type>
DetectionReport estimate_attained_detection(const M& model, const Detector& detector, double z_star, double eps,
                                            std::uint64_t trials, std::uint64_t seed, unsigned workers = 1) {
  using O = typename M::obs_type;
  if (!(eps > 0.0)) throw ParameterError("eps", "band half width must be positive");
  if (trials == 0) throw ParameterError("trials", "must be positive");
  auto acc = run_partitioned<detail::WeightedRatio>(trials, workers, seed, [&](Stream& gen, std::uint64_t,
                                                                               std::uint64_t n) {
    detail::WeightedRatio a;
    Detector det = detector;
    for (std::uint64_t i = 0; i < n; ++i) {
      det.reset();
      const double z1 = z_star - eps + 2.0 * eps * gen.uniform();
      const double w = model.stationary_density(z1) * 2.0 * eps;
      const O x1 = model.sample_pre_obs(gen);
      if (det.observe(x1, gen)) continue;  // false alarm at t = 1 <= tau
      const double z2 = model.sample_post_transition(z1, gen);
      const O x2 = model.sample_post_obs(z2, gen);
      const double y = det.observe(x2, gen) ? 1.0 : 0.0;
      a.survivors += 1.0;
      a.wx += w;
      a.wy += w * y;
      a.wxx += w * w;
      a.wyy += w * w * y;
      a.wxy += w * w * y;
    }
    return a;
  });
  if (acc.survivors < static_cast<double>(kMinSurvivors))
    throw DegenerateEstimateError("too few survivors of the conditioning event");
  DetectionReport r;
  const double ratio = acc.wy / acc.wx;
  // Var of sum w (y - R x) with x = 1 on survivors.
  const double resid = acc.wyy - 2.0 * ratio * acc.wxy + ratio * ratio * acc.wxx;
  r.estimate.value = ratio;
  r.estimate.std_error = std::sqrt(std::max(0.0, resid)) / acc.wx;
  r.estimate.trials = trials;
  r.estimate.seed = seed;
  r.estimate.conditioning_count = static_cast<std::uint64_t>(acc.survivors);
  r.false_alarms = trials - r.estimate.conditioning_count;
  return r;
}

/// max over the band |z - z_star| <= eps of |d(z) - d(z_star)|, on a grid.
template <class F>
double band_bias_bound(F&& d, double z_star, double eps, int grid = 201) {
  const double ref = d(z_star);
  double worst = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double z = z_star - eps + 2.0 * eps * i / (grid - 1);
    worst = std::max(worst, std::abs(d(z) - ref));
  }
  return worst;
}

/// Mean time to false alarm under purely nominal data.
template <ChangeModel M, class Detector>
MonteCarloEstimate estimate_arl(const M& model, const Detector& detector, double gamma, std::uint64_t trials,
                                std::uint64_t horizon_cap, std::uint64_t seed, unsigned workers = 1) {
  using O = typename M::obs_type;
  if (static_cast<double>(horizon_cap) < 20.0 * gamma) throw ParameterError("horizon_cap", "must be at least 20 gamma");
  if (trials == 0) throw ParameterError("trials", "must be positive");
  struct Acc {
    Moments m;
    std::uint64_t truncated = 0;
    Acc& operator+=(const Acc& o) {
      m += o.m;
      truncated += o.truncated;
      return *this;
    }
  };
  auto acc = run_partitioned<Acc>(trials, workers, seed, [&](Stream& gen, std::uint64_t, std::uint64_t n) {
    Acc a;
    Detector det = detector;
    for (std::uint64_t i = 0; i < n; ++i) {
      det.reset();
      std::uint64_t t = 0;
      bool stopped = false;
      while (t < horizon_cap) {
        ++t;
        const O x = model.sample_pre_obs(gen);
        if (det.observe(x, gen)) {
          stopped = true;
          break;
        }
      }
      if (!stopped) ++a.truncated;
      a.m.add(static_cast<double>(t));
    }
    return a;
  });
  if (static_cast<double>(acc.truncated) > 1e-3 * static_cast<double>(trials))
    throw CapTooSmallError("more than 0.1% of runs reached the horizon cap of " + std::to_string(horizon_cap));
  MonteCarloEstimate e;
  e.value = acc.m.mean();
  e.std_error = acc.m.std_error();
  e.trials = trials;
  e.seed = seed;
  e.conditioning_count = trials;
  e.truncated = acc.truncated;
  return e;
}

struct EqualizerReport {
  std::vector<std::uint64_t> times;
  std::vector<MonteCarloEstimate> estimates;
  /// Largest |a - b| / sqrt(se_a^2 + se_b^2) over pairs.
  double max_pairwise_z = 0.0;
  /// Largest |estimate - reference| / se, when a reference is given.
  std::optional<double> max_reference_z;
  bool pass = false;
};

/// Estimates P_t(T = t + 1 | T > t) at each fixed change time t and checks
/// that they agree within 3 combined standard errors (and with `reference`
/// within 3 standard errors, if given).
template <ChangeModel M, class Detector>
EqualizerReport equalizer_check(const M& model, const Detector& detector, const std::vector<std::uint64_t>& times,
                                std::uint64_t trials, std::uint64_t seed, unsigned workers = 1,
                                std::optional<double> reference = std::nullopt) {
  using S = typename M::state_type;
  using O = typename M::obs_type;
  EqualizerReport r;
  r.times = times;
  for (std::uint64_t t : times) {
    if (t > 20) throw ParameterError("times", "change times must lie in 0..20");
    auto adv = fixed_time_adversary<S, O>(t);
    r.estimates.push_back(estimate_worst_detection(model, detector, adv, trials, seed + t, workers).estimate);
  }
  for (std::size_t i = 0; i < r.estimates.size(); ++i)
    for (std::size_t j = i + 1; j < r.estimates.size(); ++j) {
      const auto& a = r.estimates[i];
      const auto& b = r.estimates[j];
      const double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
      r.max_pairwise_z = std::max(r.max_pairwise_z, std::abs(a.value - b.value) / se);
    }
  r.pass = r.max_pairwise_z <= 3.0;
  if (reference) {
    double z = 0.0;
    for (const auto& e : r.estimates) z = std::max(z, std::abs(e.value - *reference) / e.std_error);
    r.max_reference_z = z;
    r.pass = r.pass && z <= 3.0;
  }
  return r;
}

}  // namespace hmmcd
