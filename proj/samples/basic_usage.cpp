// Calibrate both Shewhart tests on the Gaussian AR(1) model and on a small
// discrete model, then run S2 on a simulated trajectory with a change at 50.

#include <iostream>

#include "hmmcd/hmmcd.hpp"

int main(int argc, char** argv) {
  using namespace hmmcd;
  const double gamma = 100.0;

  const GaussianAr1Model g({0.5, 1.0, 0.5});
  const auto s1 = make_s1(g, gamma);
  const auto s2 = solve_worst_case_prior(g, gamma);
  std::cout << "gaussian: nu1=" << *s1.calibration.obs_threshold << " nu2=" << *s2.calibration.obs_threshold
            << " beta1=" << beta1(g, s1) << " beta2=" << s2.prior.beta2 << "\n";

  Stream gen = rng_stream(7, 0);
  const auto path = sample_trajectory(g, ChangeTime(50), 400, gen);
  const auto alarm = run_policy(s2.policy, std::span<const double>(path.observations), gen);
  std::cout << "alarm at " << (alarm ? std::to_string(*alarm) : std::string("none")) << "\n";

  if (argc > 1) {
    const DiscreteChangeModel d(load_discrete_model(argv[1]));
    const auto w = solve_worst_case_prior(d, gamma);
    std::cout << "discrete: beta2=" << w.prior.beta2 << " support=";
    for (std::size_t k = 0; k < w.prior.support.size(); ++k)
      std::cout << (k ? "," : "") << w.prior.support[k] << ":" << w.prior.weights[k];
    std::cout << "\n";
  }
}
