#pragma once

// Exact evaluation of the detection game on a finite model over a short
// horizon H. The adversary sees w_t, which is an independent coin, xi_t, z_t or
// (z_t, xi_t) depending on the information model, and may impose the change at
// any t in 0..H-1. The detector stops at s with hazard h(xi_1..xi_s). T is
// truncated at H + 1, so E_t[phi(T, t) | T > t, w_1..w_t] is a finite sum over
// joint paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hmmcd/adversary.hpp"
#include "hmmcd/discrete_model.hpp"
#include "hmmcd/error.hpp"
#include "hmmcd/shewhart_discrete.hpp"

namespace hmmcd {

enum class GameMode { inf, sup };

/// Probability that the detector stops at time s = xi.size() given that it has
/// not stopped before.
using DetectorHazard = std::function<double(std::span<const std::size_t> xi)>;
/// phi(t, s): reward when the detector stops at t and the change was at s.
using GameReward = std::function<double(std::uint64_t t, std::uint64_t s)>;

inline GameReward one_step_reward() {
  return [](std::uint64_t t, std::uint64_t s) { return t == s + 1 ? 1.0 : 0.0; };
}
inline GameReward delay_reward() {
  return [](std::uint64_t t, std::uint64_t s) { return t > s ? static_cast<double>(t - s) : 0.0; };
}

struct FiniteGame {
  DiscreteModel model;
  InfoModel info = InfoModel::state_only;
  /// Law of w_t for the independent information model.
  std::vector<double> independent_w = {0.5, 0.5};
  GameReward reward = one_step_reward();
  std::size_t horizon = 3;
  DetectorHazard detector;
  GameMode mode = GameMode::inf;
  std::size_t history_cap = 100000;
  std::size_t rule_cap = 2000000;
};

inline DetectorHazard shewhart_hazard(const DiscreteShewhartPolicy& policy) {
  return [stop = policy.stop_prob](std::span<const std::size_t> xi) { return stop[xi.back()]; };
}

/// One node (t, w_1..w_t) of the adversary's information tree.
struct GameNode {
  std::size_t t = 0;
  std::vector<std::size_t> history;
  double num = 0.0;  // E[phi(T, t) 1{T > t} 1{history}] under P_t
  double den = 0.0;  // P_t(T > t, history)
  double value() const { return num / den; }
};

struct Lemma1Result {
  double lhs = 0.0;
  double rhs = 0.0;
  /// Every (t, history) attaining rhs within 1e-12.
  std::vector<GameNode> attaining;
  std::size_t rules_enumerated = 0;
  std::size_t nodes = 0;
};

inline std::size_t w_alphabet(const FiniteGame& g) {
  switch (g.info) {
    case InfoModel::independent: return g.independent_w.size();
    case InfoModel::observations_only: return g.model.obs_count();
    case InfoModel::state_only: return g.model.state_count();
    case InfoModel::both: return g.model.state_count() * g.model.obs_count();
  }
  return 0;
}

namespace detail {

inline std::size_t checked_pow(std::size_t base, std::size_t exp, std::size_t cap) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (base != 0 && r > cap / base) return cap + 1;
    r *= base;
  }
  return r;
}

class GameEvaluator {
 public:
  explicit GameEvaluator(const FiniteGame& g) : g_(g), nw_(w_alphabet(g)) {
    validate(g_.model);
    if (!g_.detector) throw ParameterError("detector", "a detector hazard is required");
    if (g_.horizon < 1) throw ParameterError("horizon", "must be at least 1");
    if (g_.info == InfoModel::independent) detail::check_distribution(g_.independent_w, "independent_w", -1, nw_, 1e-12);
    std::size_t total = 0;
    for (std::size_t t = 0; t < g_.horizon; ++t) {
      total += checked_pow(nw_, t, g_.history_cap);
      if (total > g_.history_cap) throw SizeError("w-history tree exceeds the cap of " + std::to_string(g_.history_cap));
    }
    offsets_.resize(g_.horizon + 1, 0);
    for (std::size_t t = 0; t < g_.horizon; ++t) offsets_[t + 1] = offsets_[t] + checked_pow(nw_, t, g_.history_cap);
    num_.assign(offsets_.back(), 0.0);
    den_.assign(offsets_.back(), 0.0);
    for (std::size_t t = 0; t < g_.horizon; ++t) accumulate(t);
  }

  std::size_t node_count() const { return offsets_.back(); }
  std::size_t alphabet() const { return nw_; }
  std::size_t index(std::size_t t, std::size_t key) const { return offsets_[t] + key; }
  double num(std::size_t i) const { return num_[i]; }
  double den(std::size_t i) const { return den_[i]; }

  GameNode node(std::size_t t, std::size_t key) const {
    GameNode n;
    n.t = t;
    n.history.resize(t);
    std::size_t k = key;
    for (std::size_t i = t; i-- > 0;) {
      n.history[i] = k % nw_;
      k /= nw_;
    }
    n.num = num_[index(t, key)];
    n.den = den_[index(t, key)];
    return n;
  }

 private:
  std::size_t w_of(std::size_t z, std::size_t xi) const {
    switch (g_.info) {
      case InfoModel::observations_only: return xi;
      case InfoModel::state_only: return z;
      case InfoModel::both: return z * g_.model.obs_count() + xi;
      case InfoModel::independent: break;
    }
    return 0;
  }

  // Joint path enumeration for change time t. At step s the state moves with
  // g_inf / g_0 and xi is drawn from f_inf / f_0(.|z_s).
  void accumulate(std::size_t t) {
    const DiscreteModel& m = g_.model;
    xi_.clear();
    for (std::size_t z0 = 0; z0 < m.state_count(); ++z0)
      if (m.stationary[z0] > 0.0) step(t, 1, z0, m.stationary[z0], 1.0, 0);
  }

  // prob = P(path up to s - 1), survive = P(T > s - 1 | xi_1..xi_{s-1}).
  void step(std::size_t t, std::size_t s, std::size_t z_prev, double prob, double survive, std::size_t key) {
    const DiscreteModel& m = g_.model;
    if (s == t + 1) den_[index(t, key)] += prob * survive;
    if (s > g_.horizon) {
      num_[index(t, key)] += prob * survive * g_.reward(g_.horizon + 1, t);
      return;
    }
    const bool pre = s <= t;
    const Matrix& trans = pre ? m.pre_trans : m.post_trans;
    for (std::size_t z = 0; z < m.state_count(); ++z) {
      const double pz = trans[z_prev][z];
      if (pz == 0.0) continue;
      for (std::size_t x = 0; x < m.obs_count(); ++x) {
        const double px = pre ? m.pre_obs[x] : m.post_obs[z][x];
        if (px == 0.0) continue;
        xi_.push_back(x);
        const double h = std::clamp(g_.detector(std::span<const std::size_t>(xi_)), 0.0, 1.0);
        const double p = prob * pz * px;
        if (pre && g_.info == InfoModel::independent) {
          for (std::size_t w = 0; w < nw_; ++w) {
            if (g_.independent_w[w] == 0.0) continue;
            // A stop at s <= t is a false alarm; it carries no reward and leaves {T > t}.
            step(t, s + 1, z, p * g_.independent_w[w], survive * (1.0 - h), key * nw_ + w);
          }
        } else {
          if (!pre) num_[index(t, key)] += p * survive * h * g_.reward(s, t);
          const std::size_t next_key = pre ? key * nw_ + w_of(z, x) : key;
          step(t, s + 1, z, p, survive * (1.0 - h), next_key);
        }
        xi_.pop_back();
      }
    }
  }

  const FiniteGame& g_;
  std::size_t nw_;
  std::vector<std::size_t> offsets_;
  std::vector<double> num_, den_;
  std::vector<std::size_t> xi_;
};

}  // namespace detail

/// rhs of the reduction: min (max) over t and w-histories with positive
/// probability of E_t[phi(T, t) | T > t, w_1..w_t].
inline double conditional_extremum(const detail::GameEvaluator& ev, const FiniteGame& g,
                                   std::vector<GameNode>* attaining = nullptr) {
  const bool inf = g.mode == GameMode::inf;
  double best = inf ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < g.horizon; ++t) {
    const std::size_t n = detail::checked_pow(ev.alphabet(), t, g.history_cap);
    for (std::size_t key = 0; key < n; ++key) {
      const std::size_t i = ev.index(t, key);
      if (!(ev.den(i) > 0.0)) continue;
      const double v = ev.num(i) / ev.den(i);
      if (inf ? v < best : v > best) best = v;
    }
  }
  if (attaining) {
    attaining->clear();
    for (std::size_t t = 0; t < g.horizon; ++t) {
      const std::size_t n = detail::checked_pow(ev.alphabet(), t, g.history_cap);
      for (std::size_t key = 0; key < n; ++key) {
        const std::size_t i = ev.index(t, key);
        if (ev.den(i) > 0.0 && std::abs(ev.num(i) / ev.den(i) - best) <= 1e-12) attaining->push_back(ev.node(t, key));
      }
    }
  }
  return best;
}

namespace detail {

// Every antichain of the w-history tree below (t, key) as (sum num, sum den),
// the empty antichain included.
inline void antichains(const GameEvaluator& ev, const FiniteGame& g, std::size_t t, std::size_t key,
                       std::vector<std::pair<double, double>>& out, std::size_t cap) {
  const std::size_t i = ev.index(t, key);
  std::vector<std::pair<double, double>> acc{{0.0, 0.0}};
  if (t + 1 < g.horizon) {
    for (std::size_t w = 0; w < ev.alphabet(); ++w) {
      std::vector<std::pair<double, double>> child;
      antichains(ev, g, t + 1, key * ev.alphabet() + w, child, cap);
      std::vector<std::pair<double, double>> next;
      if (acc.size() * child.size() > cap) throw SizeError("number of adversary stopping rules exceeds the cap");
      next.reserve(acc.size() * child.size());
      for (const auto& a : acc)
        for (const auto& c : child) next.emplace_back(a.first + c.first, a.second + c.second);
      acc.swap(next);
    }
  }
  acc.emplace_back(ev.num(i), ev.den(i));
  if (acc.size() > cap) throw SizeError("number of adversary stopping rules exceeds the cap");
  out.swap(acc);
}

}  // namespace detail

/// Number of adversary stopping rules (antichains, including "never") on a
/// tree of the given depth and branching.
inline std::size_t count_stopping_rules(std::size_t branching, std::size_t depth, std::size_t cap) {
  std::size_t n = 1;  // depth 0: never
  for (std::size_t d = 0; d < depth; ++d) {
    const std::size_t p = detail::checked_pow(n, branching, cap);
    if (p > cap) return cap + 1;
    n = 1 + p;
  }
  return n;
}

/// Checks inf_tau E_tau[phi(T, tau) | T > tau] against the double infimum over
/// t and w-histories. lhs enumerates every adversary stopping time (an
/// antichain of stopping nodes; "never" contributes nothing to either side of
/// the conditional expectation); rhs is the node-wise extremum.
inline Lemma1Result lemma1_enumerate(const FiniteGame& game) {
  const detail::GameEvaluator ev(game);
  Lemma1Result r;
  r.nodes = ev.node_count();
  r.rhs = conditional_extremum(ev, game, &r.attaining);
  const std::size_t rules = count_stopping_rules(ev.alphabet(), game.horizon, game.rule_cap);
  if (rules > game.rule_cap) throw SizeError("number of adversary stopping rules exceeds the cap");
  std::vector<std::pair<double, double>> all;
  detail::antichains(ev, game, 0, 0, all, game.rule_cap);
  r.rules_enumerated = all.size();
  const bool inf = game.mode == GameMode::inf;
  r.lhs = inf ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  for (const auto& [num, den] : all) {
    if (!(den > 0.0)) continue;
    const double v = num / den;
    if (inf ? v < r.lhs : v > r.lhs) r.lhs = v;
  }
  return r;
}

struct CriteriaValues {
  double p_i = 0.0, p_ii = 0.0, p_iii = 0.0, p_iv = 0.0;
  bool ordered = false;
};

/// The four worst-case detection probabilities of a detector, one per
/// information model, each the rhs of the reduction with phi = 1{t = s + 1}.
inline CriteriaValues criteria_bridge(const DiscreteModel& model, const DetectorHazard& detector,
                                      std::size_t horizon = 3) {
  auto value = [&](InfoModel info) {
    FiniteGame g;
    g.model = model;
    g.info = info;
    g.detector = detector;
    g.horizon = horizon;
    g.reward = one_step_reward();
    const detail::GameEvaluator ev(g);
    return conditional_extremum(ev, g);
  };
  CriteriaValues c;
  c.p_i = value(InfoModel::independent);
  c.p_ii = value(InfoModel::observations_only);
  c.p_iii = value(InfoModel::state_only);
  c.p_iv = value(InfoModel::both);
  const double tol = 1e-12;
  c.ordered = c.p_i + tol >= c.p_ii && c.p_ii + tol >= c.p_iv && c.p_i + tol >= c.p_iii && c.p_iii + tol >= c.p_iv;
  return c;
}

struct OptimalityCheck {
  std::size_t competitors = 0;
  double best_competitor = 0.0;  // largest worst-state detection among competitors
  double beta2 = 0.0;
  bool pass = false;
};

/// Competing one-step detectors calibrated to gamma: for each ordering of the
/// symbols, fill the false-alarm budget greedily in that order, randomizing on
/// the last symbol used. None may beat beta_2 against a state-aware adversary.
/// Orderings are enumerated exhaustively for up to 8 symbols and sampled
/// otherwise.
inline OptimalityCheck discrete_optimality_check(const DiscreteChangeModel& model, double gamma, double beta2,
                                                 std::uint64_t seed = 1, std::size_t samples = 50000) {
  const auto& pre = model.raw().pre_obs;
  const std::size_t nk = model.obs_count();
  const Matrix c = conditional_obs_matrix(model);
  const auto active = active_states(model);
  OptimalityCheck out;
  out.beta2 = beta2;
  auto evaluate = [&](const std::vector<std::size_t>& order) {
    std::vector<double> stop(nk, 0.0);
    double left = 1.0 / gamma;
    for (std::size_t k : order) {
      if (left <= 0.0) break;
      if (pre[k] <= left) {
        stop[k] = 1.0;
        left -= pre[k];
      } else {
        stop[k] = left / pre[k];
        left = 0.0;
      }
    }
    if (left > 1e-15) return;  // budget cannot be met by this ordering
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t z : active) {
      double d = 0.0;
      for (std::size_t k = 0; k < nk; ++k) d += c[z][k] * stop[k];
      worst = std::min(worst, d);
    }
    out.best_competitor = std::max(out.best_competitor, worst);
    ++out.competitors;
  };
  std::vector<std::size_t> order(nk);
  for (std::size_t k = 0; k < nk; ++k) order[k] = k;
  if (nk <= 8) {
    do evaluate(order);
    while (std::next_permutation(order.begin(), order.end()));
  } else {
    Stream gen = rng_stream(seed, 0);
    for (std::size_t i = 0; i < samples; ++i) {
      for (std::size_t k = nk; k-- > 1;) std::swap(order[k], order[gen.next() % (k + 1)]);
      evaluate(order);
    }
  }
  out.pass = out.best_competitor <= beta2 + 1e-12;
  return out;
}

}  // namespace hmmcd
