// hmmcd: calibrate, tabulate and simulate Shewhart change detectors for
// hidden Markov models.
//
// Exit codes: 0 ok, 1 verification failure, 2 config error, 3 I/O error,
// 4 degenerate Monte-Carlo estimate.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hmmcd/hmmcd.hpp"

using nlohmann::json;
using namespace hmmcd;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kIoError = 3, kDegenerate = 4 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  double alpha = 0.5;
  double mu = 1.0;
  double sigma2 = 0.5;
  std::string model;
  std::string gamma;
  std::uint64_t trials = 0;
  std::uint64_t seed = 42;
  unsigned workers = 1;
  std::string out;
  bool oracle = false;
  std::string detector = "s2";
  std::string adversary = "state";
  double eps = 0.01;
  std::uint64_t tau = 0;

  json to_json() const {
    json j{{"gamma", gamma}, {"trials", trials}, {"seed", seed}, {"workers", workers}, {"oracle", oracle}};
    if (model.empty()) j["gaussian"] = {{"alpha", alpha}, {"mu", mu}, {"sigma2", sigma2}};
    else j["model"] = model;
    if (!out.empty()) j["out"] = out;
    return j;
  }
};

std::vector<double> parse_gamma(const std::string& spec) {
  std::vector<double> out;
  auto number = [](const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ParameterError("gamma", "cannot parse '" + s + "'");
    }
  };
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ParameterError("gamma", "range must be lo:hi:n");
    const double lo = number(parts[0]), hi = number(parts[1]);
    const double n = number(parts[2]);
    if (n < 1 || n != std::floor(n)) throw ParameterError("gamma", "point count must be a positive integer");
    if (!(lo > 0.0) || !(hi >= lo)) throw ParameterError("gamma", "range needs 0 < lo <= hi");
    const auto count = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i < count; ++i) {
      const double f = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
      out.push_back(i + 1 == count ? hi : std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))));
    }
  } else {
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  }
  if (out.empty()) throw ParameterError("gamma", "no values given");
  for (double g : out)
    if (!(g > 1.0) || !std::isfinite(g)) throw ParameterError("gamma", "values must exceed 1");
  return out;
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open output file " + path);
  f << text;
  f.flush();
  if (!f) throw IoError("failed writing " + path);
}

json estimate_json(const MonteCarloEstimate& e) {
  return {{"value", e.value},
          {"std_error", e.std_error},
          {"trials", e.trials},
          {"seed", e.seed},
          {"conditioning_count", e.conditioning_count},
          {"truncated", e.truncated}};
}

json prior_json(const auto& prior) {
  return {{"support", prior.support},
          {"weights", prior.weights},
          {"beta2", prior.beta2},
          {"equalization_residual", prior.equalization_residual},
          {"degenerate", prior.degenerate}};
}

DiscreteChangeModel discrete_from(const Config& c) {
  if (!std::ifstream(c.model)) throw IoError("cannot open model file " + c.model);
  return DiscreteChangeModel(load_discrete_model(c.model));
}

GaussianAr1Model gaussian_from(const Config& c) { return GaussianAr1Model({c.alpha, c.mu, c.sigma2}); }

// ---- calibrate ----

json calibrate_gaussian(const Config& c, double gamma) {
  const auto m = gaussian_from(c);
  const auto s1 = make_s1(m, gamma);
  const auto w = solve_worst_case_prior(m, gamma);
  return {{"gamma", gamma},
          {"nu1", *s1.calibration.obs_threshold},
          {"nu2", *w.calibration.obs_threshold},
          {"s1_center", *s1.calibration.obs_center},
          {"s2_center", *w.calibration.obs_center},
          {"nu1_lr", s1.calibration.threshold},
          {"nu2_lr", w.calibration.threshold},
          {"beta1", beta1(m, s1)},
          {"beta2", w.prior.beta2},
          {"beta1_tilde", mismatch_beta1_tilde(m, s1)},
          {"beta2_tilde", mismatch_beta2_tilde(m, w.policy)},
          {"residual", std::max(s1.calibration.residual, w.calibration.residual)},
          {"prior", prior_json(w.prior)}};
}

json calibrate_discrete(const Config& c, const DiscreteChangeModel& m, double gamma) {
  const auto s1 = make_s1(m, gamma);
  WorstCaseSolution<DiscreteShewhartPolicy, std::size_t> w;
  if (c.oracle) {
    auto all = enumerate_worst_case_prior(m, gamma);
    if (all.empty()) throw SolverError("subset enumeration found no saddle point");
    if (all.size() > 1) throw SolverError("worst-case prior is not unique; subset enumeration found several");
    w = std::move(all.front());
  } else {
    w = solve_worst_case_prior(m, gamma);
  }
  return {{"gamma", gamma},
          {"nu1", s1.calibration.threshold},
          {"q1", s1.calibration.randomization},
          {"nu2", w.calibration.threshold},
          {"q2", w.calibration.randomization},
          {"stop_prob2", w.policy.stop_prob},
          {"beta1", beta1(m, s1)},
          {"beta2", w.prior.beta2},
          {"beta1_tilde", worst_state_detection(m, s1)},
          {"beta2_tilde", stationary_detection(m, w.policy)},
          {"residual", std::max(s1.calibration.residual, w.calibration.residual)},
          {"prior", prior_json(w.prior)}};
}

int cmd_calibrate(Config c) {
  if (c.gamma.empty()) c.gamma = "1000";
  const auto gammas = parse_gamma(c.gamma);
  json results = json::array();
  if (c.model.empty()) {
    for (double g : gammas) results.push_back(calibrate_gaussian(c, g));
  } else {
    const DiscreteChangeModel m = discrete_from(c);
    for (double g : gammas) results.push_back(calibrate_discrete(c, m, g));
  }
  json doc{{"command", "calibrate"},
           {"solver", c.model.empty() ? "closed_form" : (c.oracle ? "enumeration" : "linear_program")},
           {"config", c.to_json()},
           {"results", results}};
  write_output(doc.dump(2) + "\n", c.out);
  return kOk;
}

// ---- figure1 ----

int cmd_figure1(Config c) {
  if (c.gamma.empty()) c.gamma = "1.05:1000:60";
  const auto gammas = parse_gamma(c.gamma);
  if (gammas.size() < 2) throw ParameterError("gamma", "figure1 needs at least two points");
  if (!c.model.empty()) throw ParameterError("model", "figure1 uses the Gaussian AR(1) model");
  const auto m = gaussian_from(c);
  std::string csv = "gamma,nu1,nu2,beta1,beta2,beta1_tilde,beta2_tilde\n";
  char line[512];
  for (double g : gammas) {
    const auto s1 = make_s1(m, g);
    const auto w = solve_worst_case_prior(m, g);
    std::snprintf(line, sizeof line, "%.10e,%.10e,%.10e,%.10e,%.10e,%.10e,%.10e\n", g, *s1.calibration.obs_threshold,
                  *w.calibration.obs_threshold, beta1(m, s1), w.prior.beta2, mismatch_beta1_tilde(m, s1),
                  mismatch_beta2_tilde(m, w.policy));
    csv += line;
  }
  // At gamma = 1 both tests stop at once: zero thresholds, every probability 1.
  std::snprintf(line, sizeof line, "# limit gamma->1+: %.10e,%.10e,%.10e,%.10e,%.10e,%.10e,%.10e\n", 1.0, 0.0, 0.0,
                1.0, 1.0, 1.0, 1.0);
  csv += line;
  csv += "# config: " + c.to_json().dump() + "\n";
  if (c.out.empty()) c.out = "figure1.csv";
  write_output(csv, c.out);
  return kOk;
}

// ---- simulate ----

struct Reference {
  double value;
  double bias = 0.0;
  std::string method;
};

template <class M, class Policy>
json simulate_with(const Config& c, const M& model, const Policy& policy, double gamma, double stationary_ref,
                   std::function<json(json&)> detection) {
  ShewhartDetector<Policy> det(policy);
  json rep;
  const auto cap = static_cast<std::uint64_t>(std::ceil(100.0 * gamma));
  rep["arl"] = estimate_json(estimate_arl(model, det, gamma, c.trials, cap, c.seed, c.workers));
  rep["arl"]["reference"] = gamma;
  const double z_arl = std::abs(rep["arl"]["value"].get<double>() - gamma) / rep["arl"]["std_error"].get<double>();
  rep["arl"]["verdict"] = z_arl <= 3.0 ? "PASS" : "FAIL";
  rep["detection"] = detection(rep);
  const auto eq = equalizer_check(model, det, {0, 1, 2, 5, 10}, c.trials, c.seed + 100, c.workers, stationary_ref);
  json e = json::array();
  for (std::size_t i = 0; i < eq.times.size(); ++i) {
    auto j = estimate_json(eq.estimates[i]);
    j["t"] = eq.times[i];
    e.push_back(j);
  }
  rep["equalizer"] = {{"estimates", e},
                      {"reference", stationary_ref},
                      {"max_pairwise_z", eq.max_pairwise_z},
                      {"max_reference_z", *eq.max_reference_z},
                      {"verdict", eq.pass ? "PASS" : "FAIL"}};
  return rep;
}

json detection_json(const DetectionReport& r, const Reference& ref) {
  json j = estimate_json(r.estimate);
  j["false_alarms"] = r.false_alarms;
  j["never_triggered"] = r.never_triggered;
  j["reference"] = ref.value;
  j["bias_bound"] = ref.bias;
  j["method"] = ref.method;
  const bool ok = std::abs(r.estimate.value - ref.value) <= 3.0 * r.estimate.std_error + ref.bias;
  j["verdict"] = ok ? "PASS" : "FAIL";
  return j;
}

int cmd_simulate(const Config& c) {
  if (c.trials < 10000) throw ParameterError("trials", "Monte-Carlo subcommands need at least 10000 trials");
  const std::string gspec = c.gamma.empty() ? "100" : c.gamma;
  const auto gammas = parse_gamma(gspec);
  if (c.detector != "s1" && c.detector != "s2") throw ParameterError("detector", "must be s1 or s2");
  const InfoModel info = parse_info_model(c.adversary);
  if (!(c.eps > 0.0)) throw ParameterError("eps", "must be positive");
  Config echo = c;
  echo.gamma = gspec;
  json results = json::array();
  bool all_pass = true;

  for (double gamma : gammas) {
    json rep;
    if (c.model.empty()) {
      const auto m = gaussian_from(c);
      const auto s1 = make_s1(m, gamma);
      const auto w = solve_worst_case_prior(m, gamma);
      const GaussianShewhartPolicy& pol = c.detector == "s1" ? s1 : w.policy;
      const double stat_ref = stationary_detection(m, pol);
      rep = simulate_with(c, m, pol, gamma, stat_ref, [&](json&) {
        ShewhartDetector<GaussianShewhartPolicy> det(pol);
        if (info == InfoModel::independent || info == InfoModel::observations_only) {
          // Observations carry no information on the state before the change,
          // so no xi-measurable rule does worse than a data-independent one.
          auto adv = info == InfoModel::independent
                         ? fixed_time_adversary<double, double>(c.tau)
                         : AdversaryPolicy<double, double>(InfoModel::observations_only,
                                                           ObservationRule<double>{[](ObservationHistory<double> h) {
                                                             return !h.empty() && std::abs(h.last()) < 0.5;
                                                           }});
          const auto r = estimate_worst_detection(m, det, adv, c.trials, c.seed, c.workers);
          return detection_json(r, {stat_ref, 0.0, "simulated trajectories"});
        }
        const double z_star = worst_state(m, pol);
        auto d = [&](double z) { return per_state_detection(m, pol, z); };
        const Reference ref{worst_state_detection(m, pol), band_bias_bound(d, z_star, c.eps),
                            "first hit of the state band"};
        const Normal st = m.stationary();
        if (std::abs(z_star - st.mean) > 4.0 * st.sd()) {
          // Waiting for the band would almost never succeed before a false alarm.
          const auto r = estimate_attained_detection(m, det, z_star, c.eps, c.trials, c.seed, c.workers);
          return detection_json(r, {ref.value, ref.bias, "importance-sampled z_1 in the state band"});
        }
        auto adv = info == InfoModel::state_only
                       ? worst_state_trigger<double, double>(z_star, c.eps)
                       : AdversaryPolicy<double, double>(
                             InfoModel::both,
                             JointRule<double, double>{[z_star, eps = c.eps](StateHistory<double> z,
                                                                             ObservationHistory<double>) {
                               return !z.empty() && std::abs(z.last() - z_star) <= eps;
                             }});
        const auto r = estimate_worst_detection(m, det, adv, c.trials, c.seed, c.workers);
        return detection_json(r, ref);
      });
      rep["z_star"] = worst_state(m, pol);
    } else {
      const DiscreteChangeModel m = discrete_from(c);
      const auto s1 = make_s1(m, gamma);
      const auto w = solve_worst_case_prior(m, gamma);
      const DiscreteShewhartPolicy& pol = c.detector == "s1" ? s1 : w.policy;
      const double stat_ref = stationary_detection(m, pol);
      rep = simulate_with(c, m, pol, gamma, stat_ref, [&](json&) {
        using S = std::size_t;
        ShewhartDetector<DiscreteShewhartPolicy> det(pol);
        if (info == InfoModel::independent || info == InfoModel::observations_only) {
          auto adv = fixed_time_adversary<S, S>(c.tau);
          const auto r = estimate_worst_detection(m, det, adv, c.trials, c.seed, c.workers);
          return detection_json(r, {stat_ref, 0.0, "simulated trajectories"});
        }
        std::size_t z_star = 0;
        double best = 2.0;
        for (std::size_t z : active_states(m)) {
          const double d = per_state_detection(m, pol, z);
          if (d < best) {
            best = d;
            z_star = z;
          }
        }
        auto adv = worst_state_trigger<S, S>(z_star);
        const auto r = estimate_worst_detection(m, det, adv, c.trials, c.seed, c.workers);
        return detection_json(r, {best, 0.0, "first hit of the worst state"});
      });
    }
    rep["gamma"] = gamma;
    rep["detector"] = c.detector;
    rep["adversary"] = std::string(to_string(info));
    for (const char* k : {"arl", "detection", "equalizer"})
      all_pass = all_pass && rep[k]["verdict"] == "PASS";
    results.push_back(rep);
  }
  json cfg = echo.to_json();
  cfg["detector"] = c.detector;
  cfg["adversary"] = c.adversary;
  cfg["eps"] = c.eps;
  cfg["tau"] = c.tau;
  json doc{{"command", "simulate"}, {"config", cfg}, {"results", results}, {"verdict", all_pass ? "PASS" : "FAIL"}};
  write_output(doc.dump(2) + "\n", c.out);
  return kOk;
}

// ---- verify ----

int cmd_verify(const Config& c) {
  if (c.trials < 10000) throw ParameterError("trials", "Monte-Carlo subcommands need at least 10000 trials");
  json checks = json::array();
  bool all_pass = true;
  auto record = [&](const std::string& name, bool pass, json detail, bool expect_fail = false) {
    const bool ok = expect_fail ? !pass : pass;
    detail["name"] = name;
    detail["result"] = pass ? "pass" : "fail";
    detail["expected"] = expect_fail ? "fail" : "pass";
    detail["ok"] = ok;
    checks.push_back(detail);
    all_pass = all_pass && ok;
  };

  // Lemma 1 on random games plus the stop-on-first-one game.
  {
    std::size_t games = 0;
    double worst_gap = 0.0;
    const InfoModel infos[] = {InfoModel::independent, InfoModel::observations_only, InfoModel::state_only,
                               InfoModel::both};
    for (std::uint64_t i = 0; i < 24; ++i) {
      for (GameMode mode : {GameMode::inf, GameMode::sup}) {
        const auto g = random_game(c.seed * 1000 + i, infos[i % 4], mode, i % 3 == 0);
        const auto r = lemma1_enumerate(g);
        worst_gap = std::max(worst_gap, std::abs(r.lhs - r.rhs));
        ++games;
      }
    }
    FiniteGame g;
    g.model = random_discrete_model(c.seed, 2, 2);
    g.info = InfoModel::independent;
    g.detector = [](std::span<const std::size_t> xi) { return xi.back() == 1 ? 1.0 : 0.0; };
    const auto r = lemma1_enumerate(g);
    worst_gap = std::max(worst_gap, std::abs(r.lhs - r.rhs));
    ++games;
    record("lemma1", worst_gap <= 1e-12, {{"games", games}, {"max_abs_gap", worst_gap}});
  }

  // Discrete solver vs subset enumeration, criteria ordering and one-step optimality.
  {
    std::size_t models = 0, skipped = 0;
    double worst_weight = 0.0, worst_beta = 0.0, worst_excess = -1.0;
    bool support_ok = true, bridge_ok = true;
    for (std::uint64_t i = 0; models < 12 && i < 200; ++i) {
      const std::size_t nz = 2 + i % 3, nx = 2 + (i / 3) % 3;
      const DiscreteChangeModel m(random_discrete_model(c.seed + i, nz, nx));
      const double gamma = 5.0 + 5.0 * static_cast<double>(i % 4);
      const auto all = enumerate_worst_case_prior(m, gamma);
      if (all.size() != 1) {
        ++skipped;
        continue;
      }
      const auto lp = solve_worst_case_prior(m, gamma);
      ++models;
      support_ok = support_ok && lp.prior.support == all[0].prior.support;
      if (lp.prior.support == all[0].prior.support)
        for (std::size_t k = 0; k < lp.prior.weights.size(); ++k)
          worst_weight = std::max(worst_weight, std::abs(lp.prior.weights[k] - all[0].prior.weights[k]));
      worst_beta = std::max(worst_beta, std::abs(lp.prior.beta2 - all[0].prior.beta2));
      const auto opt = discrete_optimality_check(m, gamma, lp.prior.beta2, c.seed);
      worst_excess = std::max(worst_excess, opt.best_competitor - lp.prior.beta2);
      const auto s1 = make_s1(m, gamma);
      const auto b2 = criteria_bridge(m.raw(), shewhart_hazard(lp.policy));
      const auto b1 = criteria_bridge(m.raw(), shewhart_hazard(s1));
      const double bt1 = beta1(m, s1);
      bridge_ok = bridge_ok && b1.ordered && b2.ordered && std::abs(b2.p_iii - lp.prior.beta2) <= 1e-12 &&
                  std::abs(b2.p_iv - lp.prior.beta2) <= 1e-12 && std::abs(b1.p_i - bt1) <= 1e-12 &&
                  std::abs(b1.p_ii - bt1) <= 1e-12;
    }
    record("discrete_oracle", support_ok && worst_weight <= 1e-9 && worst_beta <= 1e-12,
           {{"models", models},
            {"skipped_non_unique", skipped},
            {"max_weight_diff", worst_weight},
            {"max_beta2_diff", worst_beta}});
    record("discrete_optimality", worst_excess <= 1e-12, {{"max_excess_over_beta2", worst_excess}});
    record("criteria_bridge", bridge_ok, json::object());
  }

  // Theorem 2 family at gamma = 100 on the Gaussian model.
  {
    const auto m = gaussian_from(c);
    const auto rep = theorem2_family_check(m, 100.0, c.trials, c.seed, c.workers);
    json members = json::array();
    for (const auto& mem : rep.members) {
      members.push_back({{"name", mem.name},
                         {"included", mem.included},
                         {"note", mem.note},
                         {"ratio_j1", mem.ratio[0].ratio.value},
                         {"se_j1", mem.ratio[0].ratio.std_error},
                         {"ratio_j2", mem.ratio[1].ratio.value},
                         {"se_j2", mem.ratio[1].ratio.std_error}});
    }
    record("theorem2_family", rep.pass, {{"beta1", rep.beta[0]}, {"beta2", rep.beta[1]}, {"members", members}});
  }

  // Equalizer: S1 passes; the parity rule is a negative control expected to fail.
  {
    const auto m = gaussian_from(c);
    const auto s1 = make_s1(m, 100.0);
    const auto wide = make_s1(m, 1000.0);
    const double b1 = beta1(m, s1);
    const auto eq = equalizer_check(m, ShewhartDetector<GaussianShewhartPolicy>(s1), {0, 1, 2, 5, 10}, c.trials,
                                    c.seed, c.workers, b1);
    record("equalizer_s1", eq.pass, {{"max_pairwise_z", eq.max_pairwise_z}, {"max_reference_z", *eq.max_reference_z}});
    ParityDetector parity([r = s1.region](double x) { return r.contains(x); },
                          [r = wide.region](double x) { return r.contains(x); });
    const auto neg = equalizer_check(m, parity, {0, 1, 2, 5, 10}, c.trials, c.seed, c.workers);
    record("equalizer_parity_control", neg.pass, {{"max_pairwise_z", neg.max_pairwise_z}}, true);
  }

  json doc{{"command", "verify"}, {"config", c.to_json()}, {"checks", checks}, {"verdict", all_pass ? "PASS" : "FAIL"}};
  write_output(doc.dump(2) + "\n", c.out);
  if (!all_pass) {
    for (const auto& ch : checks)
      if (!ch["ok"].get<bool>()) std::cerr << "failed check: " << ch["name"].get<std::string>() << "\n";
  }
  return all_pass ? kOk : kVerifyFailed;
}

void apply_config_file(Config& c, const std::string& path, const CLI::App& app) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ParameterError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParameterError("config", "expected a JSON object");
  auto given = [&](const char* flag) { return app.count(flag) > 0; };
  try {
    for (auto& [key, val] : doc.items()) {
      if (key == "alpha") { if (!given("--alpha")) c.alpha = val.get<double>(); }
      else if (key == "mu") { if (!given("--mu")) c.mu = val.get<double>(); }
      else if (key == "sigma2") { if (!given("--sigma2")) c.sigma2 = val.get<double>(); }
      else if (key == "model") { if (!given("--model")) c.model = val.get<std::string>(); }
      else if (key == "gamma") {
        if (given("--gamma")) continue;
        if (val.is_string()) c.gamma = val.get<std::string>();
        else if (val.is_number()) c.gamma = json(val).dump();
        else if (val.is_array()) {
          std::string s;
          for (const auto& v : val) s += (s.empty() ? "" : ",") + v.dump();
          c.gamma = s;
        } else throw ParameterError("gamma", "expected a number, list or range string");
      }
      else if (key == "trials") { if (!given("--trials")) c.trials = val.get<std::uint64_t>(); }
      else if (key == "seed") { if (!given("--seed")) c.seed = val.get<std::uint64_t>(); }
      else if (key == "workers") { if (!given("--workers")) c.workers = val.get<unsigned>(); }
      else if (key == "out") { if (!given("--out")) c.out = val.get<std::string>(); }
      else if (key == "oracle") { if (!given("--oracle")) c.oracle = val.get<bool>(); }
      else if (key == "detector") { if (!given("--detector")) c.detector = val.get<std::string>(); }
      else if (key == "adversary") { if (!given("--adversary")) c.adversary = val.get<std::string>(); }
      else if (key == "eps") { if (!given("--eps")) c.eps = val.get<double>(); }
      else if (key == "tau") { if (!given("--tau")) c.tau = val.get<std::uint64_t>(); }
      else throw ParameterError(key, "unknown config key");
    }
  } catch (const json::type_error& e) {
    throw ParameterError("config", e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shewhart change detection for hidden Markov models"};
  app.require_subcommand(1);
  app.fallthrough();
  Config c;
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  app.add_option("--alpha", c.alpha, "AR(1) coefficient of the Gaussian model");
  app.add_option("--mu", c.mu, "post-change state mean");
  app.add_option("--sigma2", c.sigma2, "innovation variance");
  app.add_option("--model", c.model, "discrete model JSON (replaces the Gaussian model)");
  app.add_option("--gamma", c.gamma, "false-alarm period: value, comma list, or lo:hi:n (log-spaced)");
  app.add_option("--trials", c.trials, "Monte-Carlo trials");
  app.add_option("--seed", seed_flag, "master seed (fallback: HMMCD_SEED, then 42)");
  app.add_option("--workers", c.workers, "worker threads; part of the determinism key");
  app.add_option("--out", c.out, "output path");
  app.add_flag("--oracle", c.oracle, "use subset enumeration for the discrete worst-case prior");
  app.add_option("--config", config_path, "JSON config file; flags take precedence");

  auto* calibrate = app.add_subcommand("calibrate", "thresholds, detection probabilities and worst-case prior");
  auto* figure1 = app.add_subcommand("figure1", "detection-probability curves as CSV");
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo ARL, worst-case detection and equalizer check");
  simulate->add_option("--detector", c.detector, "s1 or s2");
  simulate->add_option("--adversary", c.adversary, "independent, obs, state or both");
  simulate->add_option("--eps", c.eps, "half width of the worst-state band");
  simulate->add_option("--tau", c.tau, "change time for the independent adversary");
  auto* verify = app.add_subcommand("verify", "run the verification corpus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (const char* env = std::getenv("HMMCD_SEED")) {
      try {
        c.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw ParameterError("HMMCD_SEED", "not an unsigned integer");
      }
    }
    if (!config_path.empty()) apply_config_file(c, config_path, app);
    if (seed_flag) c.seed = *seed_flag;
    if (c.workers == 0) throw ParameterError("workers", "must be at least 1");
    if (simulate->parsed() && c.trials == 0) c.trials = 1000000;
    if (verify->parsed() && c.trials == 0) c.trials = 100000;
    validate(GaussianAr1Params{c.alpha, c.mu, c.sigma2});

    if (calibrate->parsed()) return cmd_calibrate(c);
    if (figure1->parsed()) return cmd_figure1(c);
    if (simulate->parsed()) return cmd_simulate(c);
    if (verify->parsed()) return cmd_verify(c);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const DegenerateEstimateError& e) {
    std::cerr << "degenerate estimate: " << e.what() << "\n";
    return kDegenerate;
  } catch (const ParameterError& e) {
    std::cerr << "invalid parameter " << e.what() << "\n";
    return kConfigError;
  } catch (const ValidationError& e) {
    std::cerr << "invalid model " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
