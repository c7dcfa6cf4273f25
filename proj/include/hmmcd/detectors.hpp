#pragma once

// Sequential detectors fed one observation at a time. Besides the Shewhart
// policies this holds the competitor rules used by the theorem checks and the
// parity rule used as a negative control for the equalizer test.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>

#include "hmmcd/random.hpp"

namespace hmmcd {

template <class D, class Obs>
concept SequentialDetector = requires(D d, const Obs& x, Stream& gen) {
  d.reset();
  { d.observe(x, gen) } -> std::same_as<bool>;
};

/// Stops on xi with the policy's per-observation stopping probability; a
/// uniform draw is consumed only when that probability is strictly between 0 and 1.
template <class Policy>
class ShewhartDetector {
 public:
  explicit ShewhartDetector(const Policy& policy) : policy_(&policy) {}
  void reset() {}
  template <class Obs>
  bool observe(const Obs& x, Stream& gen) {
    const double p = policy_->stop_probability(x);
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return gen.uniform() < p;
  }

 private:
  const Policy* policy_;
};

/// Memoryless rule given by an arbitrary acceptance region.
class RegionDetector {
 public:
  explicit RegionDetector(std::function<bool(double)> region) : region_(std::move(region)) {}
  void reset() {}
  bool observe(double x, Stream&) { return region_(x); }

 private:
  std::function<bool(double)> region_;
};

/// xi >= c.
inline RegionDetector one_sided_detector(double c) {
  return RegionDetector([c](double x) { return x >= c; });
}

/// |xi - shift| >= c.
inline RegionDetector shifted_two_sided_detector(double shift, double c) {
  return RegionDetector([shift, c](double x) { return std::abs(x - shift) >= c; });
}

/// T = n regardless of the data.
class FixedTimeDetector {
 public:
  explicit FixedTimeDetector(std::uint64_t n) : n_(n) {}
  void reset() { t_ = 0; }
  template <class Obs>
  bool observe(const Obs&, Stream&) {
    return ++t_ >= n_;
  }

 private:
  std::uint64_t n_;
  std::uint64_t t_ = 0;
};

/// Uses one region at odd times and another at even times. Its conditional
/// one-step detection probability depends on the parity of t, so it is not an
/// equalizer.
class ParityDetector {
 public:
  ParityDetector(std::function<bool(double)> odd, std::function<bool(double)> even)
      : odd_(std::move(odd)), even_(std::move(even)) {}
  void reset() { t_ = 0; }
  bool observe(double x, Stream&) {
    ++t_;
    return (t_ % 2 == 1) ? odd_(x) : even_(x);
  }

 private:
  std::function<bool(double)> odd_, even_;
  std::uint64_t t_ = 0;
};

/// CUSUM on a one-step log-likelihood ratio with a forced stop at `horizon`.
class TruncatedCusum {
 public:
  TruncatedCusum(std::function<double(double)> log_lr, double h, std::uint64_t horizon)
      : log_lr_(std::move(log_lr)), h_(h), horizon_(horizon) {}
  void reset() {
    w_ = 0.0;
    t_ = 0;
  }
  bool observe(double x, Stream&) {
    ++t_;
    w_ = std::max(0.0, w_ + log_lr_(x));
    return w_ >= h_ || t_ >= horizon_;
  }
  double threshold() const { return h_; }

 private:
  std::function<double(double)> log_lr_;
  double h_;
  std::uint64_t horizon_;
  double w_ = 0.0;
  std::uint64_t t_ = 0;
};

/// First alarm time (1-based) over a finite observation sequence, or nullopt
/// if the sequence ends first.
template <class Detector, class Obs>
  requires SequentialDetector<Detector, Obs>
std::optional<std::uint64_t> run_detector(Detector& detector, std::span<const Obs> observations, Stream& gen) {
  detector.reset();
  for (std::size_t i = 0; i < observations.size(); ++i)
    if (detector.observe(observations[i], gen)) return i + 1;
  return std::nullopt;
}

template <class Policy, class Obs>
std::optional<std::uint64_t> run_policy(const Policy& policy, std::span<const Obs> observations, Stream& gen) {
  ShewhartDetector<Policy> d(policy);
  return run_detector(d, observations, gen);
}

}  // namespace hmmcd
