#pragma once

// Shewhart tests for finite models. L takes finitely many values, so the
// calibration needs randomization on the boundary atom, and the worst-case
// prior is the solution of a small linear program.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "hmmcd/detail/simplex.hpp"
#include "hmmcd/discrete_model.hpp"
#include "hmmcd/error.hpp"
#include "hmmcd/shewhart.hpp"

namespace hmmcd {

using DiscretePrior = WorstCasePrior<std::size_t>;

struct DiscreteShewhartPolicy {
  int variant = 1;
  std::vector<double> averaged;  // f_bar_0^j over Xi
  std::vector<double> lr;        // L_j per symbol; +inf where f_inf vanishes
  std::vector<double> stop_prob; // probability of stopping on each symbol
  CalibrationResult calibration;

  double averaged_density(std::size_t k) const { return averaged[k]; }
  double likelihood_ratio(std::size_t k) const { return lr[k]; }
  double threshold() const { return calibration.threshold; }
  double randomization() const { return calibration.randomization; }
  double stop_probability(std::size_t k) const { return stop_prob[k]; }
};

inline double stop_mass_pre(const DiscreteChangeModel& model, const DiscreteShewhartPolicy& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < model.obs_count(); ++k) s += model.raw().pre_obs[k] * p.stop_prob[k];
  return s;
}
inline double stop_mass_post(const DiscreteChangeModel& model, const DiscreteShewhartPolicy& p, std::size_t z) {
  double s = 0.0;
  for (std::size_t k = 0; k < model.obs_count(); ++k) s += model.raw().post_obs[z][k] * p.stop_prob[k];
  return s;
}

/// Rows C[z'] = f_0(. | z_{t-1} = z') for every state.
inline Matrix conditional_obs_matrix(const DiscreteChangeModel& model) {
  Matrix c(model.state_count());
  for (std::size_t z = 0; z < model.state_count(); ++z) c[z] = post_conditional_obs_density(model, z);
  return c;
}

/// States with positive stationary mass; only these can precede a change.
inline std::vector<std::size_t> active_states(const DiscreteChangeModel& model) {
  std::vector<std::size_t> out;
  for (std::size_t z = 0; z < model.state_count(); ++z)
    if (model.raw().stationary[z] > 0.0) out.push_back(z);
  return out;
}

inline std::vector<double> averaged_density_1(const DiscreteChangeModel& model) {
  const Matrix c = conditional_obs_matrix(model);
  std::vector<double> out(model.obs_count(), 0.0);
  for (std::size_t z = 0; z < model.state_count(); ++z)
    for (std::size_t k = 0; k < model.obs_count(); ++k) out[k] += model.raw().stationary[z] * c[z][k];
  return out;
}

inline std::vector<double> averaged_density_2(const DiscreteChangeModel& model, const DiscretePrior& prior) {
  if (prior.degenerate) return averaged_density_1(model);
  if (prior.support.size() != prior.weights.size()) throw ParameterError("prior", "support and weights differ in size");
  std::vector<double> out(model.obs_count(), 0.0);
  for (std::size_t i = 0; i < prior.support.size(); ++i) {
    const auto row = post_conditional_obs_density(model, prior.support[i]);
    for (std::size_t k = 0; k < row.size(); ++k) out[k] += prior.weights[i] * row[k];
  }
  return out;
}

inline std::vector<double> likelihood_ratio(const DiscreteChangeModel& model, const std::vector<double>& density) {
  std::vector<double> lr(density.size());
  for (std::size_t k = 0; k < density.size(); ++k) {
    const double f = model.raw().pre_obs[k];
    if (f > 0.0) lr[k] = density[k] / f;
    else lr[k] = density[k] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return lr;
}

namespace detail {

inline bool same_atom(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

inline double mass_equivalent_q(const std::vector<double>& pre, const std::vector<double>& lr,
                                const std::vector<double>& stop, double threshold) {
  double on = 0.0, stopped = 0.0;
  for (std::size_t k = 0; k < pre.size(); ++k) {
    if (!same_atom(lr[k], threshold)) continue;
    on += pre[k];
    stopped += pre[k] * stop[k];
  }
  return on > 0.0 ? stopped / on : 0.0;
}

}  // namespace detail

/// Sorts the atoms of L by value and fills the false-alarm budget 1/gamma from
/// the top, randomizing with probability q on the boundary atom.
inline CalibrationResult calibrate(const DiscreteChangeModel& model, const std::vector<double>& density, double gamma,
                                   std::vector<double>* stop_prob = nullptr) {
  if (!(gamma > 1.0) || !std::isfinite(gamma)) throw ParameterError("gamma", "must exceed 1");
  const auto& pre = model.raw().pre_obs;
  const std::vector<double> lr = likelihood_ratio(model, density);
  std::vector<std::size_t> order(lr.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lr[a] > lr[b]; });

  const double target = 1.0 / gamma;
  std::vector<double> stop(lr.size(), 0.0);
  double above = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double value = lr[order[i]];
    if (!(value > 0.0)) break;
    std::size_t j = i;
    double atom = 0.0;
    while (j < order.size() && detail::same_atom(lr[order[j]], value)) atom += pre[order[j++]];
    if (above + atom >= target) {
      const double q = atom > 0.0 ? std::clamp((target - above) / atom, 0.0, 1.0) : 1.0;
      for (std::size_t m = i; m < j; ++m) stop[order[m]] = q;
      double p = 0.0;
      for (std::size_t k = 0; k < stop.size(); ++k) p += pre[k] * stop[k];
      if (stop_prob) *stop_prob = std::move(stop);
      return finish_calibration(gamma, value, q, p);
    }
    for (std::size_t m = i; m < j; ++m) stop[order[m]] = 1.0;
    above += atom;
    i = j;
  }
  throw CalibrationError("false-alarm budget 1/gamma exceeds the nominal mass where L > 0");
}

inline DiscreteShewhartPolicy make_shewhart_policy(const DiscreteChangeModel& model, int variant,
                                                   std::vector<double> density, double gamma) {
  DiscreteShewhartPolicy p;
  p.variant = variant;
  p.lr = likelihood_ratio(model, density);
  p.averaged = std::move(density);
  p.calibration = calibrate(model, p.averaged, gamma, &p.stop_prob);
  return p;
}

inline DiscreteShewhartPolicy make_s1(const DiscreteChangeModel& model, double gamma) {
  return make_shewhart_policy(model, 1, averaged_density_1(model), gamma);
}

inline double per_state_detection(const DiscreteChangeModel& model, const DiscreteShewhartPolicy& policy,
                                  std::size_t z_prev) {
  const auto row = post_conditional_obs_density(model, z_prev);
  double s = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) s += row[k] * policy.stop_prob[k];
  return s;
}

inline double stationary_detection(const DiscreteChangeModel& model, const DiscreteShewhartPolicy& policy) {
  const auto f = averaged_density_1(model);
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += f[k] * policy.stop_prob[k];
  return s;
}

inline double beta1(const DiscreteChangeModel& model, const DiscreteShewhartPolicy& s1) {
  return stationary_detection(model, s1);
}

/// min over active states of per_state_detection.
inline double worst_state_detection(const DiscreteChangeModel& model, const DiscreteShewhartPolicy& policy) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t z : active_states(model)) best = std::min(best, per_state_detection(model, policy, z));
  return best;
}

namespace detail {

inline void fill_prior_diagnostics(const DiscreteChangeModel& model, DiscretePrior& prior,
                                   const DiscreteShewhartPolicy& policy) {
  prior.equalization_residual = 0.0;
  for (std::size_t z : prior.support)
    prior.equalization_residual =
        std::max(prior.equalization_residual, std::abs(per_state_detection(model, policy, z) - prior.beta2));
}

inline DiscreteShewhartPolicy policy_from_saddle(const DiscreteChangeModel& model, const DiscretePrior& prior,
                                                 double threshold, std::vector<double> stop, double gamma) {
  DiscreteShewhartPolicy p;
  p.variant = 2;
  p.averaged = averaged_density_2(model, prior);
  p.lr = likelihood_ratio(model, p.averaged);
  for (std::size_t k = 0; k < stop.size(); ++k) stop[k] = std::clamp(stop[k], 0.0, 1.0);
  double mass = 0.0;
  for (std::size_t k = 0; k < stop.size(); ++k) mass += model.raw().pre_obs[k] * stop[k];
  const double q = mass_equivalent_q(model.raw().pre_obs, p.lr, stop, threshold);
  p.stop_prob = std::move(stop);
  p.calibration = finish_calibration(gamma, threshold, q, mass);
  return p;
}

}  // namespace detail

/// Worst-case prior for S_2 as the saddle point of
///   max_s min_z sum_k C[z][k] s_k   s.t.  sum_k f_inf(k) s_k = 1/gamma, 0 <= s <= 1.
/// The detector program yields beta_2 and the stopping probabilities, the dual
/// (adversary) program yields pi and the threshold. When several symbols tie
/// on the boundary the stopping probability can differ between them; the
/// reported q is their mass-weighted average.
inline WorstCaseSolution<DiscreteShewhartPolicy, std::size_t> solve_worst_case_prior(const DiscreteChangeModel& model,
                                                                                     double gamma) {
  using detail::LinearProgram;
  using detail::LpConstraint;
  using detail::LpStatus;
  using detail::Relation;
  if (!(gamma > 1.0) || !std::isfinite(gamma)) throw ParameterError("gamma", "must exceed 1");

  const Matrix c = conditional_obs_matrix(model);
  const auto active = active_states(model);
  const auto& pre = model.raw().pre_obs;
  const std::size_t nk = model.obs_count();
  const std::size_t na = active.size();

  // Detector: variables (s_0..s_{K-1}, t).
  LinearProgram det;
  det.objective.assign(nk + 1, 0.0);
  det.objective[nk] = 1.0;
  for (std::size_t z : active) {
    LpConstraint row{std::vector<double>(nk + 1, 0.0), Relation::less_equal, 0.0};
    for (std::size_t k = 0; k < nk; ++k) row.coeffs[k] = -c[z][k];
    row.coeffs[nk] = 1.0;
    det.constraints.push_back(std::move(row));
  }
  {
    LpConstraint row{std::vector<double>(nk + 1, 0.0), Relation::equal, 1.0 / gamma};
    for (std::size_t k = 0; k < nk; ++k) row.coeffs[k] = pre[k];
    det.constraints.push_back(std::move(row));
  }
  for (std::size_t k = 0; k < nk; ++k) {
    LpConstraint row{std::vector<double>(nk + 1, 0.0), Relation::less_equal, 1.0};
    row.coeffs[k] = 1.0;
    det.constraints.push_back(std::move(row));
  }
  const auto det_sol = detail::solve_lp(det);
  if (det_sol.status == LpStatus::infeasible) throw CalibrationError("false-alarm budget 1/gamma is not attainable");
  if (det_sol.status != LpStatus::optimal) throw SolverError("detector program did not reach an optimum");

  // Adversary: variables (pi_active, lambda+, lambda-, m_0..m_{K-1}); maximize the negated dual objective.
  const std::size_t nv = na + 2 + nk;
  LinearProgram adv;
  adv.objective.assign(nv, 0.0);
  adv.objective[na] = -1.0 / gamma;
  adv.objective[na + 1] = 1.0 / gamma;
  for (std::size_t k = 0; k < nk; ++k) adv.objective[na + 2 + k] = -1.0;
  for (std::size_t k = 0; k < nk; ++k) {
    LpConstraint row{std::vector<double>(nv, 0.0), Relation::greater_equal, 0.0};
    for (std::size_t a = 0; a < na; ++a) row.coeffs[a] = -c[active[a]][k];
    row.coeffs[na] = pre[k];
    row.coeffs[na + 1] = -pre[k];
    row.coeffs[na + 2 + k] = 1.0;
    adv.constraints.push_back(std::move(row));
  }
  {
    LpConstraint row{std::vector<double>(nv, 0.0), Relation::equal, 1.0};
    for (std::size_t a = 0; a < na; ++a) row.coeffs[a] = 1.0;
    adv.constraints.push_back(std::move(row));
  }
  const auto adv_sol = detail::solve_lp(adv);
  if (adv_sol.status != LpStatus::optimal) throw SolverError("adversary program did not reach an optimum");
  if (std::abs(adv_sol.value + det_sol.value) > 1e-10)
    throw SolverError("detector and adversary programs disagree on the game value");

  WorstCaseSolution<DiscreteShewhartPolicy, std::size_t> out;
  double total = 0.0;
  for (std::size_t a = 0; a < na; ++a) {
    if (adv_sol.x[a] <= 1e-12) continue;
    out.prior.support.push_back(active[a]);
    out.prior.weights.push_back(adv_sol.x[a]);
    total += adv_sol.x[a];
  }
  for (double& w : out.prior.weights) w /= total;
  out.prior.beta2 = det_sol.value;

  std::vector<double> stop(det_sol.x.begin(), det_sol.x.begin() + static_cast<std::ptrdiff_t>(nk));
  const double threshold = adv_sol.x[na] - adv_sol.x[na + 1];
  out.policy = detail::policy_from_saddle(model, out.prior, threshold, std::move(stop), gamma);
  out.calibration = out.policy.calibration;
  detail::fill_prior_diagnostics(model, out.prior, out.policy);
  return out;
}

/// Independent route to the same saddle point: every vertex is described by a
/// support S and a set F of |S| boundary symbols, for which the equalization
/// and calibration conditions become two square linear systems. Returns every
/// feasible candidate (distinct supports); a generic model has exactly one.
inline std::vector<WorstCaseSolution<DiscreteShewhartPolicy, std::size_t>> enumerate_worst_case_prior(
    const DiscreteChangeModel& model, double gamma, double tol = 1e-10) {
  if (!(gamma > 1.0) || !std::isfinite(gamma)) throw ParameterError("gamma", "must exceed 1");
  const auto active = active_states(model);
  if (active.size() > 12 || model.obs_count() > 16)
    throw SizeError("subset enumeration is limited to 12 states and 16 symbols");
  const Matrix c = conditional_obs_matrix(model);
  const auto& pre = model.raw().pre_obs;
  const std::size_t nk = model.obs_count();
  const std::size_t na = active.size();

  std::vector<WorstCaseSolution<DiscreteShewhartPolicy, std::size_t>> found;
  for (unsigned smask = 1; smask < (1u << na); ++smask) {
    std::vector<std::size_t> sup;
    for (std::size_t a = 0; a < na; ++a)
      if (smask & (1u << a)) sup.push_back(active[a]);
    const std::size_t ns = sup.size();
    if (ns > nk) continue;
    for (unsigned fmask = 0; fmask < (1u << nk); ++fmask) {
      if (static_cast<std::size_t>(std::popcount(fmask)) != ns) continue;
      std::vector<std::size_t> frac;
      for (std::size_t k = 0; k < nk; ++k)
        if (fmask & (1u << k)) frac.push_back(k);

      // Dual: sum_{z in S} pi_z C[z][k] - nu f_inf(k) = 0 (k in F), sum pi = 1.
      Eigen::MatrixXd a(ns + 1, ns + 1);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(ns + 1);
      for (std::size_t r = 0; r < ns; ++r) {
        for (std::size_t i = 0; i < ns; ++i) a(r, i) = c[sup[i]][frac[r]];
        a(r, ns) = -pre[frac[r]];
      }
      for (std::size_t i = 0; i < ns; ++i) a(ns, i) = 1.0;
      a(ns, ns) = 0.0;
      b(ns) = 1.0;
      Eigen::FullPivLU<Eigen::MatrixXd> dual_lu(a);
      if (!dual_lu.isInvertible()) continue;
      const Eigen::VectorXd dual = dual_lu.solve(b);
      const double nu = dual(ns);
      bool ok = nu >= -tol;
      for (std::size_t i = 0; i < ns && ok; ++i) ok = dual(i) > tol;
      if (!ok) continue;

      // Off-boundary symbols stop iff their likelihood ratio exceeds nu.
      std::vector<double> stop(nk, 0.0);
      std::vector<bool> in_f(nk, false);
      for (std::size_t k : frac) in_f[k] = true;
      for (std::size_t k = 0; k < nk && ok; ++k) {
        if (in_f[k]) continue;
        double num = 0.0;
        for (std::size_t i = 0; i < ns; ++i) num += dual(i) * c[sup[i]][k];
        if (num == 0.0 && pre[k] == 0.0) continue;
        const double gap = num - nu * pre[k];
        if (std::abs(gap) <= tol) ok = false;  // a further tie belongs to a different F
        stop[k] = gap > 0.0 ? 1.0 : 0.0;
      }
      if (!ok) continue;

      // Primal: sum_k C[z][k] s_k = beta (z in S), sum_k f_inf(k) s_k = 1/gamma.
      Eigen::MatrixXd p(ns + 1, ns + 1);
      Eigen::VectorXd rhs(ns + 1);
      for (std::size_t r = 0; r < ns; ++r) {
        double fixed = 0.0;
        for (std::size_t k = 0; k < nk; ++k)
          if (!in_f[k]) fixed += c[sup[r]][k] * stop[k];
        for (std::size_t i = 0; i < ns; ++i) p(r, i) = c[sup[r]][frac[i]];
        p(r, ns) = -1.0;
        rhs(r) = -fixed;
      }
      double fixed_pre = 0.0;
      for (std::size_t k = 0; k < nk; ++k)
        if (!in_f[k]) fixed_pre += pre[k] * stop[k];
      for (std::size_t i = 0; i < ns; ++i) p(ns, i) = pre[frac[i]];
      p(ns, ns) = 0.0;
      rhs(ns) = 1.0 / gamma - fixed_pre;
      Eigen::FullPivLU<Eigen::MatrixXd> primal_lu(p);
      if (!primal_lu.isInvertible()) continue;
      const Eigen::VectorXd primal = primal_lu.solve(rhs);
      for (std::size_t i = 0; i < ns && ok; ++i) {
        ok = primal(i) >= -tol && primal(i) <= 1.0 + tol;
        stop[frac[i]] = std::clamp(primal(i), 0.0, 1.0);
      }
      const double beta = primal(ns);
      if (!ok) continue;

      // Off-support states must not do worse than beta.
      for (std::size_t z : active) {
        double d = 0.0;
        for (std::size_t k = 0; k < nk; ++k) d += c[z][k] * stop[k];
        if (d < beta - tol) ok = false;
      }
      if (!ok) continue;

      bool duplicate = false;
      for (const auto& f : found)
        if (f.prior.support == sup && std::abs(f.prior.beta2 - beta) <= 1e-9) duplicate = true;
      if (duplicate) continue;

      WorstCaseSolution<DiscreteShewhartPolicy, std::size_t> sol;
      sol.prior.support = sup;
      sol.prior.weights.assign(dual.data(), dual.data() + ns);
      sol.prior.beta2 = beta;
      sol.policy = detail::policy_from_saddle(model, sol.prior, nu, std::move(stop), gamma);
      sol.calibration = sol.policy.calibration;
      detail::fill_prior_diagnostics(model, sol.prior, sol.policy);
      found.push_back(std::move(sol));
    }
  }
  return found;
}

}  // namespace hmmcd
