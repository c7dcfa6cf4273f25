#pragma once

// Seeded, partitioned Monte-Carlo execution. Trials are split into contiguous
// chunks, one per worker, each with its own stream rng_stream(seed, worker).
// Results are reduced in worker order, so output depends only on
// (seed, trials, workers).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

#include "hmmcd/error.hpp"
#include "hmmcd/random.hpp"

namespace hmmcd {

struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  /// Trials that survived the conditioning event (all trials when unconditioned).
  std::uint64_t conditioning_count = 0;
  /// Trials cut off by a horizon cap.
  std::uint64_t truncated = 0;
};

/// Mean and variance of a stream of values, mergeable across workers.
struct Moments {
  double n = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x, double w = 1.0) {
    n += w;
    sum += w * x;
    sum_sq += w * x * x;
  }
  Moments& operator+=(const Moments& o) {
    n += o.n;
    sum += o.sum;
    sum_sq += o.sum_sq;
    return *this;
  }
  double mean() const { return n > 0.0 ? sum / n : 0.0; }
  double variance() const {
    if (n < 2.0) return 0.0;
    const double m = mean();
    return std::max(0.0, (sum_sq - n * m * m) / (n - 1.0));
  }
  double std_error() const { return n > 0.0 ? std::sqrt(variance() / n) : 0.0; }
};

/// Runs body(stream, first_trial, count) -> Acc on `workers` threads and adds
/// the partial results together in worker order. Acc needs operator+=.
template <class Acc, class Body>
Acc run_partitioned(std::uint64_t trials, unsigned workers, std::uint64_t seed, Body&& body) {
  if (workers == 0) throw ParameterError("workers", "must be at least 1");
  std::vector<Acc> parts(workers);
  std::vector<std::exception_ptr> errors(workers);
  auto chunk = [&](unsigned w) {
    const std::uint64_t begin = trials * w / workers;
    const std::uint64_t end = trials * (w + 1) / workers;
    try {
      Stream gen = rng_stream(seed, w);
      parts[w] = body(gen, begin, end - begin);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    chunk(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(chunk, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  Acc total{};
  for (auto& p : parts) total += p;
  return total;
}

/// Binomial proportion with its standard error.
inline MonteCarloEstimate proportion_estimate(double hits, double n, std::uint64_t trials, std::uint64_t seed) {
  MonteCarloEstimate e;
  e.trials = trials;
  e.seed = seed;
  e.conditioning_count = static_cast<std::uint64_t>(n);
  e.value = n > 0.0 ? hits / n : 0.0;
  e.std_error = n > 0.0 ? std::sqrt(e.value * (1.0 - e.value) / n) : 0.0;
  return e;
}

}  // namespace hmmcd
